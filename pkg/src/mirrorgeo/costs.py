"""Cost-function classes and adversaries generating hard sequences.

Every cost keeps its subgradients inside the data ball X: linear costs are
<x, .> with x in X, the absolute loss |<x, w> - y| has subgradients +-x,
and the hinge max(0, 1 - y<x, w>) has subgradients in {0, -y x}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Ball


@dataclass(frozen=True)
class Linear:
    x: np.ndarray

    def value(self, w) -> float:
        return float(np.dot(self.x, w))

    def subgradient(self, w) -> np.ndarray:
        return np.asarray(self.x, dtype=float)

    kind = "linear"


@dataclass(frozen=True)
class AbsLoss:
    x: np.ndarray
    y: float
    b: float = 1.0

    def __post_init__(self):
        if abs(self.y) > self.b:
            raise ValueError("|y| must be <= b")

    def value(self, w) -> float:
        return abs(float(np.dot(self.x, w)) - self.y)

    def subgradient(self, w) -> np.ndarray:
        resid = float(np.dot(self.x, w)) - self.y
        sgn = 1.0 if resid >= 0 else -1.0  # sign(0) := +1
        return sgn * np.asarray(self.x, dtype=float)

    kind = "abs"


@dataclass(frozen=True)
class Hinge:
    x: np.ndarray
    y: int  # +-1

    def __post_init__(self):
        if self.y not in (-1, 1):
            raise ValueError("hinge label must be +-1")

    def value(self, w) -> float:
        return max(0.0, 1.0 - self.y * float(np.dot(self.x, w)))

    def subgradient(self, w) -> np.ndarray:
        if 1.0 - self.y * float(np.dot(self.x, w)) > 0:
            return -self.y * np.asarray(self.x, dtype=float)
        return np.zeros_like(np.asarray(self.x, dtype=float))

    kind = "hinge"


def subgradient(f, w) -> np.ndarray:
    """A valid subgradient of the cost at w."""
    return f.subgradient(np.asarray(w, dtype=float))


# ---------------------------------------------------------------------------
# Adversaries
# ---------------------------------------------------------------------------


class Adversary:
    kind = "adversary"

    def next_cost(self, w_t, t):
        raise NotImplementedError


class Fixed(Adversary):
    """Replays a predetermined cost sequence."""

    kind = "fixed"

    def __init__(self, costs):
        self.costs = list(costs)

    def next_cost(self, w_t, t):
        if t > len(self.costs):
            raise IndexError(f"fixed adversary exhausted at round {t}")
        return self.costs[t - 1]


class SignGreedy(Adversary):
    """Plays the cost-maximizing linear functional: Linear(argmax <x, w_t>)
    over the extreme points of X.  Ties at w_t = 0 resolve to the ball's
    canonical vertex (all-plus for L_inf, first basis vector otherwise)."""

    kind = "sign_greedy"

    def __init__(self, x_ball: Ball):
        self.x_ball = x_ball

    def next_cost(self, w_t, t):
        w = np.asarray(w_t, dtype=float)
        if not np.any(w):
            w = np.ones(self.x_ball.dim)
            x = self.x_ball.support_point(w)
        else:
            x = self.x_ball.support_point(w)
        return Linear(x)


class RandomVertex(Adversary):
    """Uniform random extreme point of X with a per-run seeded stream."""

    kind = "random_vertex"

    def __init__(self, x_ball: Ball, seed: int):
        self.x_ball = x_ball
        self.seed = int(seed)
        self._rng = np.random.default_rng(self.seed)

    def reset(self):
        self._rng = np.random.default_rng(self.seed)

    def next_cost(self, w_t, t):
        return Linear(self.x_ball.random_extreme(self._rng))


class TreeReplay(Adversary):
    """Emits Linear(x_t(eps_1..eps_{t-1})) from a sign tree.

    Signs come from the seeded stream unless a fixed path is supplied, in
    which case the replay is deterministic (used to enumerate all paths).
    """

    kind = "tree_replay"

    def __init__(self, tree, seed: int | None = None, path=None):
        self.tree = tree
        self.path = None if path is None else list(path)
        self._rng = np.random.default_rng(seed if seed is not None else 0)
        self._eps: list[int] = []

    def reset(self, path=None):
        self._eps = []
        if path is not None:
            self.path = list(path)

    def next_cost(self, w_t, t):
        if t > self.tree.depth:
            raise IndexError("tree adversary exhausted")
        x = self.tree.node(t, self._eps)
        if self.path is not None:
            eps_t = self.path[t - 1]
        else:
            eps_t = 1 if self._rng.integers(2) == 0 else -1
        self._eps.append(int(eps_t))
        return Linear(eps_t * x)


def next_cost(adv: Adversary, w_t, t: int):
    """The adversary's cost for round t given the learner's play."""
    if t < 1:
        raise ValueError("rounds are 1-indexed")
    return adv.next_cost(w_t, t)


def class_value_ordering_check(pair, reg, n: int, seed: int):
    """Run one MD configuration against matched Linear and AbsLoss
    adversaries built from an identical x-sequence; report both regrets and
    whether each obeys the MD bound.

    The equality of game values across cost classes is a statement about
    the game, not about single runs, so only the shared upper bound is
    asserted here.  The abs-loss instances use y = 0 (subgradients +-x stay
    in X; the off-line optimum is exactly 0 at w = 0 by symmetry).
    """
    from .md_engine import run

    rng = np.random.default_rng(seed)
    xs = [pair.x_ball.random_extreme(rng) for _ in range(n)]
    trace_lin = run(reg, pair, Fixed([Linear(x) for x in xs]), n)
    trace_abs = run(reg, pair, Fixed([AbsLoss(x, 0.0, 1.0) for x in xs]), n,
                    comparator=np.zeros(pair.dim))
    report = {
        "n": n,
        "seed": seed,
        "regret_linear": trace_lin.final_regret,
        "regret_abs": trace_abs.final_regret,
        "bound": trace_lin.bound_final,
        "linear_ok": trace_lin.final_regret <= trace_lin.bound_final + 1e-6,
        "abs_ok": trace_abs.final_regret <= trace_abs.bound_final + 1e-6,
    }
    return report
