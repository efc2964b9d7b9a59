"""The online mirror descent loop with regret accounting.

Fixed step size eta = (sup_W Psi / (n B))^(1/p) with p = q/(q-1) and B = 1
(the adversary contract normalizes (1/n) sum |grad f_t|_X^p <= 1; B is
exposed as an override).  The guarantee checked downstream is the final
average regret against the best fixed comparator:

    regret(n) <= 2 (sup_W Psi / n)^(1/q).
"""

from __future__ import annotations

import csv as _csv
import math
from dataclasses import dataclass, field

import numpy as np

from ._solvers import fw_minimize
from .costs import Adversary, Fixed, Linear
from .geometry import Ball, GeometryPair, SimplexBall, gauge_norm
from .prox import bregman_project_dual
from .regularizers import Regularizer, psi_grad, sup_over_ball

CSV_HEADER_COMMENT = "# mirrorgeo-csv v1"


@dataclass
class MDState:
    w: np.ndarray
    t: int
    eta: float
    reg: Regularizer
    pair: GeometryPair


@dataclass
class RegretTrace:
    """Per-round record plus the hindsight comparator.

    cum_regret at round t is (1/t) sum_{s<=t} cost_s - (1/t) sum_{s<=t}
    f_s(w*) with w* the recorded end-of-run comparator, so every column is
    recomputable from the record.
    """

    t: np.ndarray
    cost: np.ndarray
    grad_gauge: np.ndarray
    cum_regret: np.ndarray
    bound: np.ndarray
    comparator: np.ndarray
    sup_psi: float
    q_exponent: float
    contract_violated: bool = False
    comparator_gap: float = 0.0

    @property
    def n(self):
        return len(self.t)

    @property
    def final_regret(self):
        return float(self.cum_regret[-1])

    @property
    def bound_final(self):
        return float(self.bound[-1])

    def to_csv(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write(CSV_HEADER_COMMENT + "\n")
            writer = _csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "cost", "grad_gauge", "cum_regret", "bound"])
            for i in range(self.n):
                writer.writerow(
                    [
                        int(self.t[i]),
                        "%.17g" % self.cost[i],
                        "%.17g" % self.grad_gauge[i],
                        "%.17g" % self.cum_regret[i],
                        "%.17g" % self.bound[i],
                    ]
                )


def _sup_psi(reg: Regularizer, pair: GeometryPair) -> float:
    sup = reg.sup_over_w
    if sup is None:
        sup = sup_over_ball(reg, pair.w_ball).value
        reg.sup_over_w = sup
    if not math.isfinite(sup):
        raise ValueError("sup of Psi over W is not finite")
    return float(sup)


def step_size(reg: Regularizer, n: int, b_const: float = 1.0) -> float:
    """eta = (sup_W Psi / (n B))^(1/p), p = q/(q-1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    sup = reg.sup_over_w
    if sup is None:
        raise ValueError("regularizer has no sup_over_w; build it via the catalog")
    if sup <= 0:
        raise ValueError("sup of Psi over W is zero: constant Psi is degenerate")
    q = reg.q_exponent
    p = q / (q - 1.0)
    return (sup / (n * b_const)) ** (1.0 / p)


def argmin_psi(reg: Regularizer, w_ball: Ball) -> np.ndarray:
    """w_1 = argmin_W Psi: 0 for symmetric balls (Psi >= 0 = Psi(0)),
    the uniform point on the simplex."""
    if isinstance(w_ball, SimplexBall):
        return np.full(w_ball.dim, w_ball.radius / w_ball.dim)
    return np.zeros(w_ball.dim)


def init(reg: Regularizer, pair: GeometryPair, n: int, b_const: float = 1.0) -> MDState:
    sup = _sup_psi(reg, pair)
    if reg.sup_over_w is None:
        reg.sup_over_w = sup
    eta = step_size(reg, n, b_const)
    return MDState(w=argmin_psi(reg, pair.w_ball), t=1, eta=eta, reg=reg, pair=pair)


def md_step(state: MDState, g, gap_tol: float = 1e-9) -> MDState:
    """One mirror-descent round: dual step fused with the Bregman projection."""
    theta = psi_grad(state.reg, state.w) - state.eta * np.asarray(g, dtype=float)
    proj = bregman_project_dual(
        state.reg, state.pair.w_ball, theta, gap_tol=gap_tol, warm=state.w
    )
    return MDState(w=proj.point, t=state.t + 1, eta=state.eta, reg=state.reg, pair=state.pair)


def _comparator(costs, w_ball: Ball, n: int, fixed=None, gap_tol=None):
    """Best fixed point in hindsight.

    Linear costs admit the exact one-shot answer via the support oracle;
    otherwise Frank-Wolfe runs on the (convex) total cost with the gap
    folded into the regret tolerance.
    """
    if fixed is not None:
        return np.asarray(fixed, dtype=float), 0.0
    if all(isinstance(f, Linear) for f in costs):
        total = np.sum([f.x for f in costs], axis=0)
        wstar = w_ball.support_point(-total)
        return wstar, 0.0

    def grad(w):
        return np.sum([f.subgradient(w) for f in costs], axis=0)

    x0 = argmin_psi_like(w_ball)
    tol = gap_tol if gap_tol is not None else 1e-8 * n
    res = fw_minimize(grad, w_ball.support_point, x0=x0, gap_tol=tol, max_iter=20_000)
    return res.x, res.gap


def argmin_psi_like(w_ball: Ball) -> np.ndarray:
    if isinstance(w_ball, SimplexBall):
        return np.full(w_ball.dim, w_ball.radius / w_ball.dim)
    return np.zeros(w_ball.dim)


def run(
    reg: Regularizer,
    pair: GeometryPair,
    costs,
    n: int,
    b_const: float = 1.0,
    gap_tol: float = 1e-9,
    comparator=None,
    feasibility_tol: float = 1e-8,
) -> RegretTrace:
    """Play MD for n rounds against an adversary or a fixed cost sequence."""
    if isinstance(costs, Adversary):
        adv = costs
        if hasattr(adv, "reset"):
            adv.reset()
    else:
        adv = Fixed(costs)

    state = init(reg, pair, n, b_const)
    sup = float(reg.sup_over_w)
    q = reg.q_exponent

    played = []
    cost_vals = np.zeros(n)
    gauges = np.zeros(n)
    cost_fns = []
    violated = False
    for t in range(1, n + 1):
        f = adv.next_cost(state.w, t)
        cost_fns.append(f)
        w_t = state.w
        if not pair.w_ball.contains(w_t, feasibility_tol):
            raise RuntimeError(f"iterate left the constraint set at round {t}")
        played.append(w_t)
        cost_vals[t - 1] = f.value(w_t)
        g = f.subgradient(w_t)
        gg = gauge_norm(pair.x_ball, g)
        gauges[t - 1] = gg
        if gg > 1.0 + 1e-6:
            violated = True
        if t < n:
            state = md_step(state, g, gap_tol=gap_tol)

    wstar, comp_gap = _comparator(cost_fns, pair.w_ball, n, fixed=comparator)
    comp_vals = np.array([f.value(wstar) for f in cost_fns])

    ts = np.arange(1, n + 1)
    cum_regret = (np.cumsum(cost_vals) - np.cumsum(comp_vals)) / ts
    bound = 2.0 * (sup / ts) ** (1.0 / q)
    return RegretTrace(
        t=ts,
        cost=cost_vals,
        grad_gauge=gauges,
        cum_regret=cum_regret,
        bound=bound,
        comparator=wstar,
        sup_psi=sup,
        q_exponent=q,
        contract_violated=violated,
        comparator_gap=comp_gap,
    )
