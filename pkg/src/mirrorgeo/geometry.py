"""Balls, gauge (Minkowski) norms, dual norms and support oracles.

Every ball here is a centrally symmetric convex body (the probability
simplex is the one deliberate exception, used by the entropy regularizer).
The gauge of a ball ``B`` is ``|v|_B = inf{a > 0 : v in a*B}``; for bounded
symmetric ``B`` this is a norm.  The dual norm is the support function of
the ball, ``sup{<x, v> : |v|_B <= 1}``.

Exponents live in ``[1, inf]``; infinity is ``math.inf`` and every formula
branches on it explicitly, so no NaN ever comes out of power arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

INF = math.inf

#: Sentinel gauge value for vectors outside the span of a degenerate ball.
UNBOUNDED_GAUGE = math.inf


def holder_conjugate(p: float) -> float:
    """Return q with 1/p + 1/q = 1.  conjugate(1) = inf, conjugate(inf) = 1."""
    if p < 1:
        raise ValueError(f"exponent must be >= 1, got {p}")
    if p == 1:
        return INF
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def lp_norm(v: np.ndarray, p: float, axis=-1) -> np.ndarray | float:
    """Numerically stable l_p norm, p in [1, inf]."""
    a = np.abs(np.asarray(v, dtype=float))
    if math.isinf(p):
        return a.max(axis=axis)
    if p == 1:
        return a.sum(axis=axis)
    if p == 2:
        return np.sqrt((a * a).sum(axis=axis))
    m = a.max(axis=axis, keepdims=True)
    safe = np.where(m > 0, m, 1.0)
    out = (np.power(a / safe, p).sum(axis=axis)) ** (1.0 / p)
    return out * np.squeeze(safe, axis=axis)


def lp_support_direction(x: np.ndarray, p: float) -> np.ndarray:
    """Unit-l_p vector maximizing <x, .> (x=0 falls back to e_1).

    Ties are broken deterministically: sign(0) is +1 for p = inf, and the
    lexicographically first maximal coordinate wins for p = 1.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    if not np.any(x):
        e = np.zeros(d)
        e[0] = 1.0
        return e
    if math.isinf(p):
        s = np.where(x >= 0, 1.0, -1.0)
        return s
    if p == 1:
        i = int(np.argmax(np.abs(x)))
        e = np.zeros(d)
        e[i] = 1.0 if x[i] >= 0 else -1.0
        return e
    q = holder_conjugate(p)
    u = np.sign(x) * np.power(np.abs(x), q - 1.0)
    return u / lp_norm(u, p)


# ---------------------------------------------------------------------------
# Jacobi SVD (used by Schatten balls; reproducible without LAPACK dispatch)
# ---------------------------------------------------------------------------


def schatten_singular_values(m: np.ndarray) -> np.ndarray:
    """Singular values of ``m`` in nonincreasing order.

    One-sided Jacobi with a fixed sweep order over column pairs; converges
    to relative accuracy well below 1e-10 on the matrix scale.
    """
    a = np.array(m, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if a.ndim != 2:
        raise ValueError("expected a 2-d array")
    if a.shape[0] < a.shape[1]:
        a = a.T
    _, n = a.shape
    if n == 0:
        return np.zeros(0)
    scale = np.abs(a).max()
    if scale == 0.0:
        return np.zeros(n)
    for _ in range(60):
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                ai = a[:, i].copy()
                aj = a[:, j].copy()
                alpha = ai @ ai
                beta = aj @ aj
                gamma = ai @ aj
                denom = math.sqrt(alpha * beta)
                if denom > 0:
                    off = max(off, abs(gamma) / denom)
                if abs(gamma) <= 1e-300 or denom == 0.0:
                    continue
                # rotation angle making the two columns exactly orthogonal
                phi = 0.5 * math.atan2(2.0 * gamma, beta - alpha)
                c = math.cos(phi)
                s = math.sin(phi)
                a[:, i] = c * ai - s * aj
                a[:, j] = s * ai + c * aj
        if off < 1e-15:
            break
    sv = np.sqrt((a * a).sum(axis=0))
    sv.sort()
    return sv[::-1]


# ---------------------------------------------------------------------------
# Ball specs
# ---------------------------------------------------------------------------


class Ball:
    """Base class: a scaled convex body defining a gauge norm on R^dim."""

    dim: int
    radius: float

    # -- interface -----------------------------------------------------
    def gauge(self, v) -> float:
        raise NotImplementedError

    def support_value(self, x) -> float:
        """sup{<x, v> : v in ball}."""
        return float(np.dot(x, self.support_point(x)))

    def support_point(self, x) -> np.ndarray:
        """A maximizer of <x, .> over the ball (deterministic tie rules)."""
        raise NotImplementedError

    def extreme_points(self):
        """Finite generating set of extreme points, or None."""
        return None

    def random_extreme(self, rng) -> np.ndarray:
        """Random extreme point; for smooth balls the support point of a
        random Gaussian direction."""
        pts = self.extreme_points()
        if pts is not None:
            return pts[rng.integers(len(pts))].copy()
        return self.support_point(rng.standard_normal(self.dim))

    def contains(self, v, tol: float = 0.0) -> bool:
        if tol < 0:
            raise ValueError("tol must be >= 0")
        return self.gauge(v) <= 1.0 + tol

    def _check_dim(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.dim:
            raise ValueError(f"dimension mismatch: expected {self.dim}, got {v.shape[-1]}")
        return v


@dataclass(frozen=True)
class LpBall(Ball):
    p: float
    dim: int
    radius: float = 1.0

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be in [1, inf]")
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    def gauge(self, v):
        v = self._check_dim(v)
        return float(lp_norm(v, self.p)) / self.radius

    def gauge_batch(self, v):
        v = self._check_dim(v)
        return lp_norm(v, self.p) / self.radius

    def dual(self, x):
        x = self._check_dim(x)
        return self.radius * float(lp_norm(x, holder_conjugate(self.p)))

    def dual_batch(self, x):
        x = self._check_dim(x)
        return self.radius * lp_norm(x, holder_conjugate(self.p))

    def support_point(self, x):
        x = self._check_dim(x)
        return self.radius * lp_support_direction(x, self.p)

    def extreme_points(self):
        if self.p == 1:
            eye = np.eye(self.dim) * self.radius
            return np.vstack([eye, -eye])
        if math.isinf(self.p) and self.dim <= 16:
            k = self.dim
            signs = np.array(
                [[1.0 if (i >> j) & 1 == 0 else -1.0 for j in range(k)] for i in range(2**k)]
            )
            return signs * self.radius
        return None

    def random_extreme(self, rng):
        if self.p == 1:
            i = int(rng.integers(self.dim))
            e = np.zeros(self.dim)
            e[i] = self.radius * (1.0 if rng.integers(2) == 0 else -1.0)
            return e
        if math.isinf(self.p):
            return self.radius * np.where(rng.integers(2, size=self.dim) == 0, 1.0, -1.0)
        return self.support_point(rng.standard_normal(self.dim))


@dataclass(frozen=True)
class SimplexBall(Ball):
    """Probability simplex {w >= 0, sum w = radius}.

    Not centrally symmetric; exists for the entropy / multiplicative-weights
    pairing where the constraint set of the game is the simplex itself.
    The gauge reported is the corner-simplex Minkowski functional (sum of
    coordinates for nonnegative vectors, unbounded otherwise).
    """

    dim: int
    radius: float = 1.0

    def gauge(self, v):
        v = self._check_dim(v)
        if np.min(v) < -1e-12 * self.radius:
            return UNBOUNDED_GAUGE
        return float(np.sum(np.maximum(v, 0.0))) / self.radius

    def contains(self, v, tol: float = 0.0):
        # probability simplex: nonnegative and total mass = radius
        if tol < 0:
            raise ValueError("tol must be >= 0")
        v = self._check_dim(v)
        return bool(
            np.min(v) >= -tol * self.radius
            and abs(np.sum(v) / self.radius - 1.0) <= tol + 1e-15
        )

    def dual(self, x):
        # support function over the simplex: radius * max_i x_i
        x = self._check_dim(x)
        return self.radius * float(np.max(x))

    def support_point(self, x):
        x = self._check_dim(x)
        i = int(np.argmax(x))
        e = np.zeros(self.dim)
        e[i] = self.radius
        return e

    def extreme_points(self):
        return np.eye(self.dim) * self.radius


@dataclass(frozen=True)
class GroupBall(Ball):
    """Unit ball of the group (q, r) norm on k x d matrices (flattened).

    The (q, r) norm is the l_r norm of the l_q norms of the d columns.
    """

    q: float
    r: float
    k: int
    d: int
    radius: float = 1.0

    def __post_init__(self):
        if self.q < 1 or self.r < 1:
            raise ValueError("group exponents must be in [1, inf]")

    @property
    def dim(self):
        return self.k * self.d

    def _mat(self, v):
        v = self._check_dim(v)
        return v.reshape(v.shape[:-1] + (self.k, self.d))

    def norm(self, v):
        m = self._mat(v)
        cols = lp_norm(m, self.q, axis=-2)
        return lp_norm(cols, self.r, axis=-1)

    def gauge(self, v):
        return float(self.norm(v)) / self.radius

    def gauge_batch(self, v):
        return self.norm(v) / self.radius

    def dual(self, x):
        m = self._mat(x)
        qs = holder_conjugate(self.q)
        rs = holder_conjugate(self.r)
        cols = lp_norm(m, qs, axis=-2)
        return self.radius * float(lp_norm(cols, rs, axis=-1))

    def dual_batch(self, x):
        m = self._mat(x)
        cols = lp_norm(m, holder_conjugate(self.q), axis=-2)
        return self.radius * lp_norm(cols, holder_conjugate(self.r), axis=-1)

    def support_point(self, x):
        m = self._mat(x)
        qs = holder_conjugate(self.q)
        col_duals = lp_norm(m, qs, axis=-2)
        # per-column unit-l_q support directions
        cols = np.zeros_like(m)
        for j in range(self.d):
            if col_duals[j] > 0:
                cols[:, j] = lp_support_direction(m[:, j], self.q)
        weights = lp_support_direction(col_duals, self.r)
        out = cols * weights
        return self.radius * out.reshape(self.dim)


@dataclass(frozen=True)
class SchattenBall(Ball):
    """Unit ball of the Schatten p-norm on d1 x d2 matrices (flattened)."""

    p: float
    d1: int
    d2: int
    radius: float = 1.0

    @property
    def dim(self):
        return self.d1 * self.d2

    def _mat(self, v):
        v = self._check_dim(v)
        return v.reshape(self.d1, self.d2)

    def gauge(self, v):
        sv = schatten_singular_values(self._mat(v))
        return float(lp_norm(sv, self.p)) / self.radius

    def dual(self, x):
        sv = schatten_singular_values(self._mat(x))
        return self.radius * float(lp_norm(sv, holder_conjugate(self.p)))

    def support_point(self, x):
        m = self._mat(x)
        # numpy SVD here is fine: the support map only needs a valid factorization
        u, s, vt = np.linalg.svd(m, full_matrices=False)
        dir_s = lp_support_direction(s, self.p)
        return self.radius * (u @ np.diag(dir_s) @ vt).reshape(self.dim)


@dataclass(frozen=True)
class VertexHullBall(Ball):
    """Absolute convex hull of a vertex set (symmetric closure: +-v_i).

    gauge(v) = min sum |a_i| subject to sum a_i v_i = v, solved as an LP;
    vectors outside the span get the explicit UNBOUNDED_GAUGE value.
    """

    vertices: tuple  # tuple of tuples, each length dim
    radius: float = 1.0

    def __post_init__(self):
        if len(self.vertices) == 0:
            raise ValueError("vertex hull needs at least one vertex")
        # accept any nested sequence / array and canonicalize
        vt = tuple(tuple(float(c) for c in row) for row in np.asarray(self.vertices, dtype=float))
        object.__setattr__(self, "vertices", vt)
        # square vertex matrices with independent vertices admit a unique
        # representation, so the gauge needs no LP
        inv = None
        va = np.asarray(vt, dtype=float).T
        if va.shape[0] == va.shape[1]:
            try:
                inv = np.linalg.inv(va)
            except np.linalg.LinAlgError:
                inv = None
        object.__setattr__(self, "_inv", inv)

    @property
    def dim(self):
        return len(self.vertices[0])

    @property
    def vertex_array(self):
        return np.asarray(self.vertices, dtype=float)

    def gauge(self, v):
        v = self._check_dim(v)
        if self._inv is not None:
            return float(np.sum(np.abs(self._inv @ v))) / self.radius
        from scipy.optimize import linprog

        vt = self.vertex_array.T  # dim x K
        K = vt.shape[1]
        a_eq = np.hstack([vt, -vt])
        res = linprog(np.ones(2 * K), A_eq=a_eq, b_eq=v, bounds=(0, None), method="highs")
        if res.status == 2:
            return UNBOUNDED_GAUGE
        if res.status != 0:
            raise RuntimeError(f"hull gauge LP failed with status {res.status}: {res.message}")
        return float(res.fun) / self.radius

    def dual(self, x):
        x = self._check_dim(x)
        return self.radius * float(np.max(np.abs(self.vertex_array @ x)))

    def dual_batch(self, x):
        x = self._check_dim(x)
        return self.radius * np.max(np.abs(x @ self.vertex_array.T), axis=-1)

    def support_point(self, x):
        x = self._check_dim(x)
        scores = self.vertex_array @ x
        i = int(np.argmax(np.abs(scores)))
        sgn = 1.0 if scores[i] >= 0 else -1.0
        return self.radius * sgn * self.vertex_array[i]

    def extreme_points(self):
        va = self.vertex_array * self.radius
        return np.vstack([va, -va])


def _split_minimize(objective_terms, v, starts, tol=1e-9):
    """min over w1 of f_a(w1) + f_b(v - w1) (or max), via SLSQP on a lifted
    smooth formulation, multi-started; returns (best value, best w1)."""
    from scipy.optimize import minimize

    fa, fb, combine = objective_terms
    d = len(v)

    if combine == "sum":

        def obj(z):
            w1 = z[:d]
            return fa(w1) + fb(v - w1)

    else:  # max

        def obj(z):
            w1 = z[:d]
            return max(fa(w1), fb(v - w1))

    best_val = math.inf
    best_w1 = None
    for s in starts:
        z0 = np.asarray(s, dtype=float)
        res = minimize(obj, z0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
        val = obj(res.x)
        if val < best_val:
            best_val = val
            best_w1 = res.x.copy()
    return best_val, best_w1


@dataclass(frozen=True)
class Interp1Ball(Ball):
    """Unit ball of the sum norm |v|_a + |v|_b."""

    a: Ball
    b: Ball

    def __post_init__(self):
        if self.a.dim != self.b.dim:
            raise ValueError("interpolation components must share the ambient dimension")

    @property
    def dim(self):
        return self.a.dim

    @property
    def radius(self):
        return 1.0

    def gauge(self, v):
        return self.a.gauge(v) + self.b.gauge(v)

    def dual(self, x):
        return float(np.dot(x, self.support_point(x)))

    def support_point(self, x):
        """argmax <x, v> over the ball, found by minimizing the interp gauge
        on the slice <x, v> = 1 and rescaling; seeded with the component
        support points (each feasible after normalization)."""
        from scipy.optimize import minimize

        x = self._check_dim(x)
        if not np.any(x):
            return np.zeros(self.dim)

        cands = []
        for comp in (self.a, self.b):
            pt = comp.support_point(x)
            g = self.gauge(pt)
            if g > 0 and math.isfinite(g):
                cands.append(pt / g)
        best = max(cands, key=lambda v: float(np.dot(x, v)))

        def obj(v):
            return self.gauge(v)

        cons = [{"type": "eq", "fun": lambda v: float(np.dot(x, v)) - 1.0,
                 "jac": lambda v: x}]
        x0 = best / max(float(np.dot(x, best)), 1e-300)
        try:
            res = minimize(obj, x0, method="SLSQP", constraints=cons,
                           options={"maxiter": 300, "ftol": 1e-12})
            if res.success or res.status in (0, 8):
                g = self.gauge(res.x)
                if g > 0 and math.isfinite(g):
                    cand = res.x / g
                    if float(np.dot(x, cand)) > float(np.dot(x, best)):
                        best = cand
        except Exception:
            pass
        return best


@dataclass(frozen=True)
class Interp2Ball(Ball):
    """Unit ball of the infimal-convolution norm
    inf{|w1|_a + |w2|_b : w1 + w2 = v}; equals the gauge of conv(A u B)."""

    a: Ball
    b: Ball

    def __post_init__(self):
        if self.a.dim != self.b.dim:
            raise ValueError("interpolation components must share the ambient dimension")

    @property
    def dim(self):
        return self.a.dim

    @property
    def radius(self):
        return 1.0

    def gauge(self, v):
        v = self._check_dim(v)
        ga, gb = self.a.gauge(v), self.b.gauge(v)
        upper = min(ga, gb)
        if upper == 0.0 or not math.isfinite(upper):
            return upper
        if self.a == self.b:
            return upper
        starts = [np.zeros(self.dim), v.copy(), 0.5 * v]
        val, _ = _split_minimize((self.a.gauge, self.b.gauge, "sum"), v, starts)
        return min(upper, val)

    def dual(self, x):
        # support of a convex hull of a union = max of supports
        return max(self.a.dual(x), self.b.dual(x))

    def support_point(self, x):
        pa = self.a.support_point(x)
        pb = self.b.support_point(x)
        return pa if float(np.dot(x, pa)) >= float(np.dot(x, pb)) else pb

    def extreme_points(self):
        ea = self.a.extreme_points()
        eb = self.b.extreme_points()
        if ea is None or eb is None:
            return None
        return np.vstack([ea, eb])


class DualGaugeBall(Ball):
    """Ball whose gauge is the dual norm of an inner ball.

    Used as the convexity norm of catalog regularizers when the dual ball
    has no dedicated analytic spec.
    """

    def __init__(self, inner: Ball):
        self.inner = inner

    @property
    def dim(self):
        return self.inner.dim

    @property
    def radius(self):
        return 1.0

    def gauge(self, v):
        return dual_norm(self.inner, v)

    def gauge_batch(self, v):
        return dual_norm_batch(self.inner, v)

    def __eq__(self, other):
        return isinstance(other, DualGaugeBall) and self.inner == other.inner


@dataclass(frozen=True)
class GeometryPair:
    """Learner constraint set W and data domain X (same ambient dim)."""

    w_ball: Ball
    x_ball: Ball

    def __post_init__(self):
        if self.w_ball.dim != self.x_ball.dim:
            raise ValueError(
                f"w and x balls disagree on dimension: {self.w_ball.dim} vs {self.x_ball.dim}"
            )

    @property
    def dim(self):
        return self.w_ball.dim


# ---------------------------------------------------------------------------
# Module-level operations (spec surface)
# ---------------------------------------------------------------------------


def gauge_norm(b: Ball, v) -> float:
    """Minkowski functional of the ball at v (UNBOUNDED_GAUGE off-span)."""
    return b.gauge(v)


def dual_norm(b: Ball, x) -> float:
    """Support function of the ball: sup{<x, v> : gauge(v) <= 1}."""
    return b.dual(x)


def dual_norm_batch(b: Ball, xs) -> np.ndarray:
    """Dual norm row-wise over the last axis; loops where no batch rule exists."""
    if hasattr(b, "dual_batch"):
        return np.asarray(b.dual_batch(xs), dtype=float)
    xs = np.asarray(xs, dtype=float)
    flat = xs.reshape(-1, xs.shape[-1])
    out = np.array([b.dual(row) for row in flat])
    return out.reshape(xs.shape[:-1])


def gauge_norm_batch(b: Ball, vs) -> np.ndarray:
    if hasattr(b, "gauge_batch"):
        return np.asarray(b.gauge_batch(vs), dtype=float)
    vs = np.asarray(vs, dtype=float)
    flat = vs.reshape(-1, vs.shape[-1])
    out = np.array([b.gauge(row) for row in flat])
    return out.reshape(vs.shape[:-1])


def contains(b: Ball, v, tol: float = 0.0) -> bool:
    """True iff gauge_norm(b, v) <= 1 + tol."""
    return b.contains(v, tol)
