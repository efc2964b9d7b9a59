"""Catalog of distance-generating functions with certified convexity data.

Each regularizer Psi carries

* ``q_exponent``      -- its uniform-convexity exponent q (>= 2),
* ``convexity_norm``  -- the ball whose gauge it is q-uniformly convex
                         against (after any scaling applied),
* ``sup_over_w``      -- sup of Psi over the paired constraint set, filled
                         in by the catalog constructor,
* ``scale``           -- a multiplicative factor; scaling up preserves the
                         convexity certificate.

``scaled_for_pair`` rescales a base regularizer so that it is honestly
q-uniformly convex w.r.t. the dual gauge of the pair's data ball, which is
exactly the precondition of the mirror-descent regret bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import (
    INF,
    Ball,
    DualGaugeBall,
    GroupBall,
    GeometryPair,
    LpBall,
    SimplexBall,
    VertexHullBall,
    holder_conjugate,
    lp_norm,
    lp_support_direction,
)

ENTROPY_FLOOR = 1e-12  # clamp for log at the simplex boundary


def _lp_power_map(x, s):
    """sign(x)|x|^(s-1), the coordinatewise conjugate map for l_s norms."""
    return np.sign(x) * np.power(np.abs(x), s - 1.0)


class Regularizer:
    q_exponent: float = 2.0
    convexity_norm: Ball | None = None
    sup_over_w: float | None = None
    scale: float = 1.0

    def value(self, w):
        raise NotImplementedError

    def grad(self, w):
        raise NotImplementedError

    def conj_grad(self, theta):
        """grad of the convex conjugate: argmax_w <theta, w> - Psi(w)."""
        raise NotImplementedError

    @property
    def kind(self):
        return type(self).__name__


@dataclass
class PsiR(Regularizer):
    """psi_r: |w|_r^2 / (2(r-1)) for r in (1, 2], (2^r / r) |w|_r^r for r > 2.

    The squared branch is 2-uniformly convex w.r.t. l_r; the power branch
    (Clarkson) is r-uniformly convex w.r.t. l_r.  A scale > 1 only
    strengthens the certificate.  ``scale != 1`` is the ScaledPsiR kind.
    """

    r: float
    dim: int
    scale: float = 1.0
    convexity_norm: Ball | None = None
    sup_over_w: float | None = None

    def __post_init__(self):
        if not (1.0 < self.r < INF):
            raise ValueError("r must be in (1, inf)")
        if self.convexity_norm is None:
            self.convexity_norm = LpBall(self.r, self.dim)

    @property
    def q_exponent(self):
        return max(self.r, 2.0)

    @property
    def kind(self):
        return "PsiR" if self.scale == 1.0 else "ScaledPsiR"

    def value(self, w):
        w = np.asarray(w, dtype=float)
        nrm = lp_norm(w, self.r)
        if self.r <= 2.0:
            return self.scale * nrm**2 / (2.0 * (self.r - 1.0))
        return self.scale * (2.0**self.r / self.r) * nrm**self.r

    def grad(self, w):
        w = np.asarray(w, dtype=float)
        if self.r <= 2.0:
            nrm = float(lp_norm(w, self.r))
            if nrm == 0.0:
                return np.zeros_like(w)
            return self.scale * nrm ** (2.0 - self.r) / (self.r - 1.0) * _lp_power_map(w, self.r)
        return self.scale * 2.0**self.r * _lp_power_map(w, self.r)

    def conj_grad(self, theta):
        theta = np.asarray(theta, dtype=float) / self.scale
        rs = holder_conjugate(self.r)
        if self.r <= 2.0:
            z = theta * (self.r - 1.0)
            nrm = float(lp_norm(z, rs))
            if nrm == 0.0:
                return np.zeros_like(z)
            return nrm ** (2.0 - rs) * _lp_power_map(z, rs)
        return _lp_power_map(theta / 2.0**self.r, rs)


@dataclass
class EuclideanHalfSq(Regularizer):
    """Psi(w) = |w|_2^2 / 2; self-conjugate, 2-uniformly convex w.r.t. l_2."""

    dim: int
    scale: float = 1.0
    convexity_norm: Ball | None = None
    sup_over_w: float | None = None
    q_exponent: float = 2.0

    def __post_init__(self):
        if self.convexity_norm is None:
            self.convexity_norm = LpBall(2.0, self.dim)

    def value(self, w):
        w = np.asarray(w, dtype=float)
        return self.scale * 0.5 * (w * w).sum(axis=-1)

    def grad(self, w):
        return self.scale * np.asarray(w, dtype=float)

    def conj_grad(self, theta):
        return np.asarray(theta, dtype=float) / self.scale


@dataclass
class Entropy(Regularizer):
    """Shifted negative entropy sum w_i log(d w_i) on the simplex.

    Minimum 0 at the uniform point, sup log d at a vertex.  The paper's
    sum w log(1/w) is the same Bregman generator up to sign and an affine
    shift, so the multiplicative-weights update is identical; this shifted
    form satisfies the Psi >= 0 contract.  1-strongly convex w.r.t. l_1 on
    the simplex (Pinsker).
    """

    dim: int
    scale: float = 1.0
    convexity_norm: Ball | None = None
    sup_over_w: float | None = None
    q_exponent: float = 2.0

    def __post_init__(self):
        if self.convexity_norm is None:
            self.convexity_norm = LpBall(1.0, self.dim)

    def value(self, w):
        w = np.asarray(w, dtype=float)
        if np.min(w) < -1e-12:
            raise ValueError("entropy requires nonnegative coordinates")
        wc = np.maximum(w, ENTROPY_FLOOR)
        return self.scale * np.sum(w * np.log(self.dim * wc), axis=-1)

    def grad(self, w):
        w = np.asarray(w, dtype=float)
        if np.min(w) < -1e-12:
            raise ValueError("entropy requires nonnegative coordinates")
        wc = np.maximum(w, ENTROPY_FLOOR)
        return self.scale * (np.log(self.dim * wc) + 1.0)

    def conj_grad(self, theta):
        # softmax: argmax over the simplex (the domain of Psi)
        t = np.asarray(theta, dtype=float) / self.scale
        t = t - t.max()
        e = np.exp(t)
        return e / e.sum()


@dataclass
class GroupSquared(Regularizer):
    """Psi(w) = scale * |w|_{q,r}^2 / (q + r - 2) on k x d matrices."""

    q: float
    r: float
    k: int
    d: int
    scale: float = 1.0
    convexity_norm: Ball | None = None
    sup_over_w: float | None = None
    q_exponent: float = 2.0

    def __post_init__(self):
        if not (1.0 < self.q <= 2.0 and 1.0 < self.r <= 2.0):
            raise ValueError("group exponents must be in (1, 2]")
        if self.convexity_norm is None:
            self.convexity_norm = GroupBall(self.q, self.r, self.k, self.d)

    @property
    def _coeff(self):
        return self.scale / (self.q + self.r - 2.0)

    @property
    def dim(self):
        return self.k * self.d

    def _ball(self):
        return GroupBall(self.q, self.r, self.k, self.d)

    def value(self, w):
        nrm = self._ball().norm(w)
        return self._coeff * nrm**2

    def grad(self, w):
        w = np.asarray(w, dtype=float)
        m = w.reshape(self.k, self.d)
        cols = lp_norm(m, self.q, axis=0)
        nrm = float(lp_norm(cols, self.r))
        if nrm == 0.0:
            return np.zeros_like(w)
        # column factor (c_j/N)^(r-1) / c_j^(q-1), zero columns contribute 0
        safe = np.where(cols > 0, cols, 1.0)
        fac = np.where(cols > 0, (safe / nrm) ** (self.r - 1.0) / safe ** (self.q - 1.0), 0.0)
        g = _lp_power_map(m, self.q) * fac
        return 2.0 * self._coeff * nrm * g.reshape(w.shape)

    def conj_grad(self, theta):
        # Psi = beta N^2  =>  grad Psi*(t) = N*(t) / (2 beta) * (unit-N support point)
        theta = np.asarray(theta, dtype=float)
        ball = self._ball()
        nstar = ball.dual(theta)
        if nstar == 0.0:
            return np.zeros_like(theta)
        pt = ball.support_point(theta)  # unit-N point
        return nstar / (2.0 * self._coeff) * pt


@dataclass
class VertexHullSquared(Regularizer):
    """Psi(w) = scale * |w|_{W,q}^2 / (2(q-1)) where |w|_{W,q} is the
    minimal l_q coefficient norm over hull representations w = sum a_i v_i.

    With linearly independent vertices the representation is unique and
    everything is closed form; otherwise the minimal representation is
    found numerically and the gradient recovered from the KKT system.
    """

    q: float
    hull: VertexHullBall
    scale: float = 1.0
    convexity_norm: Ball | None = None
    sup_over_w: float | None = None
    q_exponent: float = 2.0

    def __post_init__(self):
        if not (1.0 < self.q <= 2.0):
            raise ValueError("q must be in (1, 2]")
        V = self.hull.vertex_array.T  # dim x K
        self._V = V
        self._Vinv = None
        if V.shape[0] == V.shape[1]:
            try:
                self._Vinv = np.linalg.inv(V)
            except np.linalg.LinAlgError:
                self._Vinv = None
        if self.convexity_norm is None:
            self.convexity_norm = self.hull

    @property
    def _coeff(self):
        return self.scale / (2.0 * (self.q - 1.0))

    @property
    def dim(self):
        return self._V.shape[0]

    def coeff_norm(self, w):
        """|w|_{W,q} = min |alpha|_q subject to V alpha = w."""
        w = np.asarray(w, dtype=float)
        if self._Vinv is not None:
            return float(lp_norm(self._Vinv @ w, self.q))
        return float(lp_norm(self._min_rep(w), self.q))

    def _min_rep(self, w):
        from scipy.optimize import minimize

        V = self._V
        K = V.shape[1]
        a0, *_ = np.linalg.lstsq(V, w, rcond=None)

        def obj(a):
            return float(np.sum(np.abs(a) ** self.q))

        def jac(a):
            return self.q * _lp_power_map(a, self.q)

        cons = [{"type": "eq", "fun": lambda a: V @ a - w, "jac": lambda a: V}]
        res = minimize(obj, a0, jac=jac, method="SLSQP", constraints=cons,
                       options={"maxiter": 500, "ftol": 1e-14})
        return res.x

    def value(self, w):
        w = np.asarray(w, dtype=float)
        if self._Vinv is not None and w.ndim > 1:
            a = w @ self._Vinv.T
            return self._coeff * lp_norm(a, self.q) ** 2
        return self._coeff * self.coeff_norm(w) ** 2

    def grad(self, w):
        w = np.asarray(w, dtype=float)
        if self._Vinv is not None:
            u = self._Vinv @ w
            nrm = float(lp_norm(u, self.q))
            if nrm == 0.0:
                return np.zeros_like(w)
            gu = 2.0 * nrm ** (2.0 - self.q) * _lp_power_map(u, self.q)  # d(|u|_q^2)/du
            return self._coeff * self._Vinv.T @ gu
        # redundant hull: N grad from the KKT multiplier of the min-rep problem
        a = self._min_rep(w)
        nrm = float(lp_norm(a, self.q))
        if nrm == 0.0:
            return np.zeros_like(w)
        g_a = nrm ** (1.0 - self.q) * _lp_power_map(a, self.q)  # grad of |a|_q
        theta, *_ = np.linalg.lstsq(self._V.T, g_a, rcond=None)
        return 2.0 * self._coeff * nrm * theta

    def conj_grad(self, theta):
        # N*(theta) = |V^T theta|_{q*}; grad Psi* = N*/(2 beta) * grad N*
        theta = np.asarray(theta, dtype=float)
        z = self._V.T @ theta
        qs = holder_conjugate(self.q)
        nstar = float(lp_norm(z, qs))
        if nstar == 0.0:
            return np.zeros_like(theta)
        dz = lp_support_direction(z, self.q)  # unit-l_q maximizer of <z, .>
        return nstar / (2.0 * self._coeff) * (self._V @ dz)


# ---------------------------------------------------------------------------
# Spec operation surface
# ---------------------------------------------------------------------------


def psi_eval(reg: Regularizer, w) -> float:
    v = reg.value(w)
    return float(v) if np.ndim(v) == 0 else v


def psi_grad(reg: Regularizer, w) -> np.ndarray:
    return reg.grad(w)


def psi_conj_grad(reg: Regularizer, theta) -> np.ndarray:
    return reg.conj_grad(theta)


@dataclass
class SupEstimate:
    value: float
    certified: bool  # True when analytic / vertex-exact, False for ascent lower bounds
    method: str

    def __float__(self):
        return self.value


def _ascent_sup(reg, ball, restarts=64, iters=40, seed=0):
    """Multi-start convex-maximization ascent s <- support_point(grad Psi(s))."""
    rng = np.random.default_rng(seed)
    best = 0.0
    starts = [ball.support_point(rng.standard_normal(ball.dim)) for _ in range(restarts)]
    pts = ball.extreme_points()
    if pts is not None:
        starts.extend(list(pts[: min(len(pts), 64)]))
    for s in starts:
        s = np.asarray(s, dtype=float)
        val = psi_eval(reg, s)
        for _ in range(iters):
            g = reg.grad(s)
            if not np.any(g):
                g = rng.standard_normal(ball.dim)
            s2 = ball.support_point(g)
            v2 = psi_eval(reg, s2)
            if v2 <= val + 1e-15:
                break
            s, val = s2, v2
        best = max(best, val)
    return best


def sup_over_ball(reg: Regularizer, w_ball: Ball, seed: int = 0, restarts: int = 64) -> SupEstimate:
    """sup of Psi over the ball; analytic where the pair allows, otherwise
    vertex enumeration (<= 2^16 extreme points) or multi-start ascent."""
    # analytic routes -----------------------------------------------------
    if isinstance(reg, (PsiR, EuclideanHalfSq)) and isinstance(w_ball, LpBall):
        r = reg.r if isinstance(reg, PsiR) else 2.0
        p = w_ball.p
        expo = max(1.0 / r - (0.0 if math.isinf(p) else 1.0 / p), 0.0)
        if math.isinf(p):
            expo = 1.0 / r
        max_nrm = w_ball.radius * w_ball.dim**expo
        return SupEstimate(psi_eval(reg, _scaled_vertex(reg, w_ball, max_nrm)), True, "analytic")
    if isinstance(reg, Entropy) and isinstance(w_ball, SimplexBall):
        if w_ball.radius != 1.0:
            raise ValueError("entropy pairing expects the probability simplex")
        return SupEstimate(reg.scale * math.log(w_ball.dim), True, "analytic")
    if isinstance(reg, GroupSquared) and isinstance(w_ball, GroupBall):
        if w_ball.q == reg.q and w_ball.r == 1.0:
            # max of |w|_{q,r} over the (q,1) ball is at a single-column point
            return SupEstimate(reg._coeff * w_ball.radius**2, True, "analytic")
    if isinstance(reg, VertexHullSquared) and isinstance(w_ball, VertexHullBall):
        if w_ball.vertices == reg.hull.vertices:
            vals = [psi_eval(reg, v) for v in w_ball.extreme_points()]
            return SupEstimate(max(vals), True, "vertex")
    # vertex enumeration --------------------------------------------------
    pts = w_ball.extreme_points()
    if pts is not None and len(pts) <= 2**16:
        vals = gauge_like_eval(reg, np.asarray(pts, dtype=float))
        return SupEstimate(float(np.max(vals)), True, "vertex")
    # ascent lower bound --------------------------------------------------
    return SupEstimate(
        _ascent_sup(reg, w_ball, restarts=restarts, seed=seed), False, "ascent-lower-bound"
    )


def gauge_like_eval(reg, pts):
    try:
        vals = reg.value(pts)
        if np.ndim(vals) == 1:
            return vals
    except Exception:
        pass
    return np.array([psi_eval(reg, p) for p in pts])


def _scaled_vertex(reg, ball, target_norm):
    """A ball point attaining l_r norm equal to target (sparse or dense)."""
    d = ball.dim
    r = reg.r if isinstance(reg, PsiR) else 2.0
    p = ball.p
    if (not math.isinf(p)) and r >= p:
        v = np.zeros(d)
        v[0] = ball.radius
        return v
    return np.full(d, ball.radius * (1.0 if math.isinf(p) else d ** (-1.0 / p)))


def d_p_upper(reg: Regularizer, w_ball: Ball, p: float, seed: int = 0) -> float:
    """(sup_W Psi)^((p-1)/p) -- the D_p upper bound certified by Psi.

    Caller asserts Psi is p/(p-1)-uniformly convex w.r.t. the X* gauge on W
    (which ``scaled_for_pair`` arranges); p in (1, 2].
    """
    if not (1.0 < p <= 2.0):
        raise ValueError("p must be in (1, 2]")
    sup = reg.sup_over_w
    if sup is None:
        sup = sup_over_ball(reg, w_ball, seed=seed).value
    return float(sup) ** ((p - 1.0) / p)


def scaled_psi_for_lp_pair(p1: float, p2: float, d: int, r: float) -> PsiR:
    """The paper's rescaled psi_r for the (B_p1, B_p2) pair:
    scale = d^(Q * max(1/q2 - 1/r, 0)), Q = max(r, 2), q2 = conj(p2)."""
    if p1 < 1 or p2 < 1 or d < 1:
        raise ValueError("invalid exponents or dimension")
    if not (1.0 < r < INF):
        raise ValueError("r must be in (1, inf)")
    q2 = holder_conjugate(p2)
    inv_q2 = 0.0 if math.isinf(q2) else 1.0 / q2
    Q = max(r, 2.0)
    scale = float(d) ** (Q * max(inv_q2 - 1.0 / r, 0.0))
    reg = PsiR(r=r, dim=d, scale=scale)
    reg.convexity_norm = LpBall(q2 if not math.isinf(q2) else INF, d)
    return reg


def lp_regret_bound(p1: float, p2: float, d: int, r: float, n: int) -> float:
    """Closed-form MD regret bound for the l_p pair run with the rescaled
    psi_r: 2 max{2, 1/sqrt(2(r-1))} d^(max{1/q2-1/r,0}+max{1/r-1/p1,0}) / n^(1/max{r,2})."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if p1 < 1 or p2 < 1:
        raise ValueError("exponents must be >= 1")
    if not (1.0 < r < INF):
        raise ValueError("r must be in (1, inf)")
    q2 = holder_conjugate(p2)
    inv_q2 = 0.0 if math.isinf(q2) else 1.0 / q2
    inv_p1 = 0.0 if math.isinf(p1) else 1.0 / p1
    expo = max(inv_q2 - 1.0 / r, 0.0) + max(1.0 / r - inv_p1, 0.0)
    const = 2.0 * max(2.0, 1.0 / math.sqrt(2.0 * (r - 1.0)))
    return const * float(d) ** expo / float(n) ** (1.0 / max(r, 2.0))


def _r_grid(p1, p2, d, points=200, r_max=64.0):
    grid = list(np.logspace(math.log10(1.0 + 1e-3), math.log10(r_max), points))
    for special in (2.0, p1, holder_conjugate(p2)):
        if special is not None and 1.0 + 1e-9 < special <= r_max and math.isfinite(special):
            grid.append(float(special))
    if d >= 3:
        rl = math.log(d) / (math.log(d) - 1.0) if math.log(d) > 1.0 else None
        if rl and 1.0 < rl <= r_max:
            grid.append(rl)
    return sorted(set(grid))


def pick_r(p1: float, p2: float, d: int, n: int, r_max: float | None = None) -> float:
    """Grid-minimize lp_regret_bound over r; ties broken toward r = 2.

    ``r_max=2`` restricts to the 2-uniformly-convex regime used by the
    D_2 table (p = 2 requires a 2-uniformly convex regularizer).
    """
    cap = 64.0 if r_max is None else r_max
    grid = _r_grid(p1, p2, d, r_max=cap)
    vals = [(lp_regret_bound(p1, p2, d, r, n), r) for r in grid]
    best = min(v for v, _ in vals)
    ties = [r for v, r in vals if v <= best * (1.0 + 1e-12)]
    return min(ties, key=lambda r: (abs(r - 2.0), r))


# ---------------------------------------------------------------------------
# Catalog construction: certified rescaling toward the pair's X* gauge
# ---------------------------------------------------------------------------


def _xstar_gauge_ball(x_ball: Ball) -> Ball:
    """Ball whose gauge is the dual norm of the data ball."""
    if isinstance(x_ball, LpBall):
        return LpBall(holder_conjugate(x_ball.p), x_ball.dim, 1.0 / x_ball.radius)
    if isinstance(x_ball, GroupBall):
        return GroupBall(
            holder_conjugate(x_ball.q),
            holder_conjugate(x_ball.r),
            x_ball.k,
            x_ball.d,
            1.0 / x_ball.radius,
        )
    return DualGaugeBall(x_ball)


def scaled_for_pair(reg: Regularizer, pair: GeometryPair, set_sup: bool = True) -> Regularizer:
    """Return a copy of ``reg`` rescaled to be q-uniformly convex w.r.t. the
    X* gauge of the pair, with ``convexity_norm`` and ``sup_over_w`` filled.

    The scale is 1/c^q where c satisfies base_norm >= c * |.|_{X*}; for the
    group kind an extra factor covers the certified strong-convexity modulus
    (q-1)(r-1)/(q+r-2) of the squared group norm.
    """
    x = pair.x_ball
    if not isinstance(x, LpBall) and not isinstance(x, GroupBall):
        raise ValueError(f"no certified rescaling for data ball {type(x).__name__}")
    rho = x.radius
    d = pair.dim

    if isinstance(reg, (PsiR, EuclideanHalfSq)):
        if not isinstance(x, LpBall):
            raise ValueError("psi_r rescaling expects an L_p data ball")
        q2 = holder_conjugate(x.p)
        inv_q2 = 0.0 if math.isinf(q2) else 1.0 / q2
        r = reg.r if isinstance(reg, PsiR) else 2.0
        # l_r >= d^(1/r - 1/q2) l_q2 when r > q2, else >= l_q2 directly
        c0 = float(d) ** (-max(inv_q2 - 1.0 / r, 0.0))
        c = c0 / rho
        extra = 1.0 / c ** reg.q_exponent
        out = replace(reg) if isinstance(reg, PsiR) else EuclideanHalfSq(dim=reg.dim)
        out.scale = reg.scale * extra
    elif isinstance(reg, Entropy):
        if not (isinstance(x, LpBall) and math.isinf(x.p)):
            raise ValueError("entropy catalog pairing expects X = L_inf ball")
        out = Entropy(dim=reg.dim)
        out.scale = reg.scale * rho**2
    elif isinstance(reg, GroupSquared):
        if not (isinstance(x, LpBall) and math.isinf(x.p)):
            raise ValueError("group catalog pairing expects X = elementwise L_inf ball")
        q, r = reg.q, reg.r
        c_rel = float(reg.d) ** (1.0 / r - 1.0) * float(reg.k) ** (1.0 / q - 1.0)
        modulus_fix = (q + r - 2.0) ** 2 / (2.0 * (q - 1.0) * (r - 1.0))
        out = GroupSquared(q=q, r=r, k=reg.k, d=reg.d)
        out.scale = reg.scale * modulus_fix * (rho / c_rel) ** 2
    elif isinstance(reg, VertexHullSquared):
        q = reg.q
        K = len(reg.hull.vertices)
        xs = _xstar_gauge_ball(x)
        m_hat = max(xs.gauge(np.asarray(v)) for v in reg.hull.vertices)
        c = float(K) ** (1.0 / q - 1.0) / m_hat
        out = VertexHullSquared(q=q, hull=reg.hull)
        out.scale = reg.scale / c**2
    else:
        raise ValueError(f"unknown regularizer kind {type(reg).__name__}")

    out.convexity_norm = _xstar_gauge_ball(x)
    if set_sup:
        out.sup_over_w = sup_over_ball(out, pair.w_ball).value
    return out
