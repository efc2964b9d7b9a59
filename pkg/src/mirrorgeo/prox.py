"""Bregman projection onto the constraint ball and the dual-space step.

The two-step mirror update is

    w'      = grad Psi*( grad Psi(w) - eta g )      (dual_step)
    w_next  = argmin_{w in W} B_Psi(w | w')         (bregman_project)

The projection only needs grad Psi(w') -- for the fused MD step that vector
is already known, so ``bregman_project_dual`` takes it directly.  Analytic
routes cover the classic cases; everything else goes through away-step
Frank-Wolfe on h(w) = Psi(w) - <theta, w>, whose duality gap is the
reported residual and whose iterates are feasible by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._solvers import fw_minimize
from .geometry import (
    Ball,
    GroupBall,
    LpBall,
    SimplexBall,
    VertexHullBall,
    holder_conjugate,
    lp_norm,
)
from .regularizers import (
    Entropy,
    EuclideanHalfSq,
    GroupSquared,
    PsiR,
    Regularizer,
    VertexHullSquared,
    psi_conj_grad,
    psi_grad,
)


@dataclass
class ProjectionResult:
    point: np.ndarray
    residual: float  # optimality-gap estimate (0.0 for exact analytic routes)
    iterations: int


def dual_step(reg: Regularizer, w, g, eta: float) -> np.ndarray:
    """grad Psi*( grad Psi(w) - eta g )."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    theta = psi_grad(reg, w) - eta * np.asarray(g, dtype=float)
    return psi_conj_grad(reg, theta)


def _soft_threshold_onto_l1(y, radius, tol=1e-12):
    """Euclidean projection onto the l_1 ball via bisection on the KKT
    multiplier (tolerance on lambda is absolute)."""
    y = np.asarray(y, dtype=float)
    if np.sum(np.abs(y)) <= radius:
        return y.copy()
    lo, hi = 0.0, float(np.max(np.abs(y)))
    while hi - lo > tol:
        lam = 0.5 * (lo + hi)
        if np.sum(np.maximum(np.abs(y) - lam, 0.0)) > radius:
            lo = lam
        else:
            hi = lam
    lam = 0.5 * (lo + hi)
    return np.sign(y) * np.maximum(np.abs(y) - lam, 0.0)


def _radial_onto_lp(reg, ball, theta):
    """Matched psi_r onto its own l_r ball: the Bregman projection is radial
    (KKT: the gradient of psi_r and the l_r subgradient are collinear)."""
    w0 = psi_conj_grad(reg, theta)
    g = ball.gauge(w0)
    if g <= 1.0:
        return w0
    return w0 / g


def _rnormsq_onto_sum_ball(beta, r, c, total):
    """min beta |rho|_r^2 - <c, rho> over {rho >= 0, sum rho <= total},
    c >= 0, r in (1, 2].  KKT: rho(lam) = grad f*((c - lam)+) with
    f = beta |.|_r^2; sum rho(lam) is decreasing, so bisection on lam."""
    rs = 1.0 / (1.0 - 1.0 / r) if r > 1 else math.inf  # conjugate exponent

    def rho_of(lam):
        z = np.maximum(c - lam, 0.0)
        nrm = float(lp_norm(z, rs))
        if nrm == 0.0:
            return np.zeros_like(z)
        return nrm ** (2.0 - rs) * np.sign(z) * np.abs(z) ** (rs - 1.0) / (2.0 * beta)

    rho = rho_of(0.0)
    if rho.sum() <= total:
        return rho
    lo, hi = 0.0, float(np.max(c))
    for _ in range(200):
        lam = 0.5 * (lo + hi)
        s = rho_of(lam).sum()
        if s > total:
            lo = lam
        else:
            hi = lam
        if hi - lo <= 1e-16 * max(1.0, float(np.max(c))):
            break
    rho = rho_of(0.5 * (lo + hi))
    s = rho.sum()
    if s > 0:
        rho *= min(1.0, total / s)
    return rho


def _psir_onto_l1(reg, ball, theta):
    """PsiR (r <= 2) onto the l_1 ball: signs follow theta and the
    magnitudes solve the reduced problem over the positive face."""
    beta = reg.scale / (2.0 * (reg.r - 1.0))
    c = np.abs(theta)
    rho = _rnormsq_onto_sum_ball(beta, reg.r, c, ball.radius)
    return np.sign(theta) * rho


def _group_onto_group1(reg, ball, theta):
    """GroupSquared onto the (q, 1) group ball: each column aligns with the
    l_q support direction of the corresponding theta column, and the column
    masses solve the reduced l_r problem."""
    from .geometry import lp_support_direction

    k, d = reg.k, reg.d
    tm = np.asarray(theta, dtype=float).reshape(k, d)
    qs = holder_conjugate(reg.q)
    c = lp_norm(tm, qs, axis=0)  # column dual norms
    beta = reg._coeff
    rho = _rnormsq_onto_sum_ball(beta, reg.r, c, ball.radius)
    out = np.zeros((k, d))
    for j in range(d):
        if rho[j] > 0 and c[j] > 0:
            out[:, j] = rho[j] * lp_support_direction(tm[:, j], reg.q)
    return out.reshape(k * d)


def bregman_project_dual(
    reg: Regularizer,
    w_ball: Ball,
    theta,
    gap_tol: float = 1e-9,
    max_iter: int = 10_000,
    warm=None,
) -> ProjectionResult:
    """argmin_{w in W} Psi(w) - <theta, w>  (== Bregman projection of the
    point y with grad Psi(y) = theta)."""
    theta = np.asarray(theta, dtype=float)

    # --- analytic routes ------------------------------------------------
    if isinstance(reg, EuclideanHalfSq):
        y = theta / reg.scale
        if isinstance(w_ball, LpBall) and w_ball.p == 2:
            nrm = float(lp_norm(y, 2))
            pt = y if nrm <= w_ball.radius else y * (w_ball.radius / nrm)
            return ProjectionResult(pt, 0.0, 0)
        if isinstance(w_ball, LpBall) and w_ball.p == 1:
            return ProjectionResult(_soft_threshold_onto_l1(y, w_ball.radius), 0.0, 0)
    if isinstance(reg, EuclideanHalfSq) and isinstance(w_ball, LpBall) and math.isinf(w_ball.p):
        y = theta / reg.scale
        return ProjectionResult(np.clip(y, -w_ball.radius, w_ball.radius), 0.0, 0)
    if isinstance(reg, Entropy) and isinstance(w_ball, SimplexBall):
        t = theta / reg.scale
        t = t - t.max()
        e = np.exp(t)
        return ProjectionResult(w_ball.radius * e / e.sum(), 0.0, 0)
    if isinstance(reg, PsiR) and isinstance(w_ball, LpBall) and w_ball.p == reg.r:
        return ProjectionResult(_radial_onto_lp(reg, w_ball, theta), 0.0, 0)
    if isinstance(reg, PsiR) and reg.r <= 2.0 and isinstance(w_ball, LpBall) and w_ball.p == 1:
        return ProjectionResult(_psir_onto_l1(reg, w_ball, theta), 0.0, 0)
    if (
        isinstance(reg, GroupSquared)
        and isinstance(w_ball, GroupBall)
        and w_ball.q == reg.q
        and w_ball.r == 1.0
        and w_ball.k == reg.k
        and w_ball.d == reg.d
    ):
        return ProjectionResult(_group_onto_group1(reg, w_ball, theta), 0.0, 0)
    if (
        isinstance(reg, VertexHullSquared)
        and isinstance(w_ball, VertexHullBall)
        and w_ball.vertices == reg.hull.vertices
        and reg._Vinv is not None
    ):
        # coefficient space: min coeff*|a|_q^2 - <V^T theta, a> over |a|_1 <= R
        z = reg._V.T @ theta
        R = w_ball.radius
        if reg.q == 2.0:
            a = _soft_threshold_onto_l1(z / (2.0 * reg._coeff), R)
            return ProjectionResult(reg._V @ a, 0.0, 0)
        coeff_ball = LpBall(1.0, len(z), R)
        coeff_reg = PsiR(r=reg.q, dim=len(z), scale=2.0 * (reg.q - 1.0) * reg._coeff)
        sub = bregman_project_dual(coeff_reg, coeff_ball, z, gap_tol, max_iter,
                                   warm=(reg._Vinv @ warm if warm is not None else None))
        return ProjectionResult(reg._V @ sub.point, sub.residual, sub.iterations)

    # --- generic Frank-Wolfe route ---------------------------------------
    def grad(w):
        return psi_grad(reg, w) - theta

    x0 = None
    if warm is not None:
        x0 = np.array(warm, dtype=float)
        if not w_ball.contains(x0, 1e-9):
            x0 = None
    if x0 is None:
        if isinstance(w_ball, SimplexBall):
            x0 = np.full(w_ball.dim, w_ball.radius / w_ball.dim)
        else:
            x0 = np.zeros(w_ball.dim)
    res = fw_minimize(grad, w_ball.support_point, x0=x0, gap_tol=gap_tol, max_iter=max_iter)
    return ProjectionResult(res.x, res.gap, res.iterations)


def bregman_project(
    reg: Regularizer,
    w_ball: Ball,
    y,
    gap_tol: float = 1e-9,
    max_iter: int = 10_000,
    warm=None,
) -> ProjectionResult:
    """argmin_{w in W} B_Psi(w | y); see module docstring for the routes."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("projection target must be finite")
    if w_ball.contains(y, 1e-12):
        return ProjectionResult(y.copy(), 0.0, 0)
    theta = psi_grad(reg, y)
    return bregman_project_dual(reg, w_ball, theta, gap_tol=gap_tol, max_iter=max_iter, warm=warm)


def bregman_divergence(reg: Regularizer, w, wprime) -> float:
    """B_Psi(w | w') = Psi(w) - Psi(w') - <grad Psi(w'), w - w'>."""
    w = np.asarray(w, dtype=float)
    wprime = np.asarray(wprime, dtype=float)
    from .regularizers import psi_eval

    return float(
        psi_eval(reg, w)
        - psi_eval(reg, wprime)
        - np.dot(psi_grad(reg, wprime), w - wprime)
    )
