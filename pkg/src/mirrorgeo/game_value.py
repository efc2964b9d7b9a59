"""Sign-tree payoffs, game-value lower bounds and martingale-type ratios.

A sign tree of depth n assigns a dual vector x_i(eps_1..eps_{i-1}) to every
node of a complete binary tree; uniform random signs eps drive the
Walsh-Paley martingale Z_m = x_0 + sum_{i<=m} eps_i x_i(eps).

* ``tree_payoff``       -- E | (1/n) sum eps_i x_i |_{W*} (exact enumeration
                           up to depth 20, Monte Carlo beyond), or the
                           p-th moment variant with x_0.
* ``value_lower_bound`` -- maximizes the payoff over trees with nodes at
                           extreme points of X (valid since the payoff is
                           convex in each node); exact dynamic program over
                           accumulated sums when X has finitely many
                           extreme points, greedy plus coordinate ascent
                           otherwise.  Certified lower bound on V_n.
* ``mtype_ratio``       -- the M-type constant witnessed by one tree.
* ``estimate_cp``       -- coordinate-ascent search for large ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import Ball, GeometryPair, dual_norm_batch, gauge_norm

EXACT_DEPTH_CAP = 20


@dataclass
class SignTree:
    """levels[i] has shape (2^i, d): the nodes of level i+1 (1-based),
    indexed by the sign prefix read as a binary number (+1 -> 0, -1 -> 1,
    most significant first).  x0 is the optional root offset."""

    levels: list
    x0: np.ndarray | None = None

    def __post_init__(self):
        self.levels = [np.atleast_2d(np.asarray(l, dtype=float)) for l in self.levels]
        for i, l in enumerate(self.levels):
            if l.shape[0] != 2**i:
                raise ValueError(f"level {i + 1} must have {2 ** i} nodes, got {l.shape[0]}")

    @property
    def depth(self):
        return len(self.levels)

    @property
    def dim(self):
        return self.levels[0].shape[1]

    @property
    def node_count(self):
        return sum(2**i for i in range(self.depth))

    def node(self, level: int, eps_prefix) -> np.ndarray:
        """x_level(eps_1..eps_{level-1}); prefix may be any +-1 sequence of
        length >= level-1 (extra entries ignored)."""
        idx = 0
        for e in list(eps_prefix)[: level - 1]:
            idx = 2 * idx + (0 if e > 0 else 1)
        return self.levels[level - 1][idx]

    def validate_in_ball(self, ball: Ball, tol: float = 1e-9) -> bool:
        for l in self.levels:
            for x in l:
                if not ball.contains(x, tol):
                    return False
        return True

    def scaled(self, c: float) -> "SignTree":
        return SignTree(
            [c * l for l in self.levels], None if self.x0 is None else c * self.x0
        )

    @staticmethod
    def constant(x, n: int, x0=None) -> "SignTree":
        x = np.asarray(x, dtype=float)
        return SignTree([np.tile(x, (2**i, 1)) for i in range(n)], x0)


@lru_cache(maxsize=32)
def _sign_matrix(n: int) -> np.ndarray:
    idx = np.arange(2**n)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))) & 1
    return np.where(bits == 0, 1.0, -1.0)


def _path_prefix_sums(tree: SignTree, signs: np.ndarray) -> np.ndarray:
    """(paths, depth+1, d) prefix sums x0 + sum_{i<=m} eps_i x_i along each
    sign path (m = 0..depth)."""
    n = tree.depth
    P = signs.shape[0]
    d = tree.dim
    out = np.zeros((P, n + 1, d))
    if tree.x0 is not None:
        out[:, 0, :] = tree.x0
    path_idx = np.zeros(P, dtype=np.int64)
    for l in range(1, n + 1):
        nodes = tree.levels[l - 1][path_idx]  # (P, d)
        out[:, l, :] = out[:, l - 1, :] + signs[:, l - 1][:, None] * nodes
        path_idx = 2 * path_idx + (signs[:, l - 1] < 0).astype(np.int64)
    return out


def _paths_for(tree: SignTree, exact: bool, mc_paths: int, seed: int):
    if exact:
        return _sign_matrix(tree.depth)
    rng = np.random.default_rng(seed)
    return np.where(rng.integers(2, size=(mc_paths, tree.depth)) == 0, 1.0, -1.0)


def tree_payoff(
    tree: SignTree,
    pair: GeometryPair,
    p: float | None = None,
    exact: bool | None = None,
    mc_paths: int = 100_000,
    seed: int = 0,
) -> float:
    """Expected payoff of the tree in the W*-gauge.

    p None  -> E | (1/n) sum_i eps_i x_i |_{W*}   (value normalization)
    p given -> E | x0 + sum_i eps_i x_i |_{W*}^p  (moment variant)
    """
    n = tree.depth
    if exact is None:
        exact = n <= EXACT_DEPTH_CAP
    if exact and n > EXACT_DEPTH_CAP:
        raise ValueError(f"exact enumeration capped at depth {EXACT_DEPTH_CAP}; pass exact=False")
    if not exact and mc_paths < 100_000:
        raise ValueError("Monte Carlo mode needs at least 1e5 sign paths")
    signs = _paths_for(tree, exact, mc_paths, seed)
    sums = _path_prefix_sums(tree, signs)
    final = sums[:, -1, :]
    if p is None:
        if tree.x0 is not None:
            final = final - tree.x0
        norms = dual_norm_batch(pair.w_ball, final / n)
        return float(np.mean(norms))
    norms = dual_norm_batch(pair.w_ball, final)
    return float(np.mean(norms**p))


def _prefix_moment_sup(tree: SignTree, pair: GeometryPair, p: float, signs) -> float:
    sums = _path_prefix_sums(tree, signs)
    best = 0.0
    for m in range(1, tree.depth + 1):
        norms = dual_norm_batch(pair.w_ball, sums[:, m, :])
        best = max(best, float(np.mean(norms**p)))
    if tree.x0 is not None:
        best = max(best, float(dual_norm_batch(pair.w_ball, tree.x0[None, :])[0] ** p))
    return best


def mtype_ratio(tree: SignTree, pair: GeometryPair, p: float, seed: int = 0) -> float:
    """The M-type constant witnessed by this tree:

    [ sup_m E|x0 + sum_{i<=m} eps_i x_i|_{W*}^p
      / (|x0|_X^p + sum_i E|x_i(eps)|_X^p) ]^(1/p)
    """
    n = tree.depth
    exact = n <= EXACT_DEPTH_CAP
    signs = _paths_for(tree, exact, 100_000, seed)
    num = _prefix_moment_sup(tree, pair, p, signs)
    den = 0.0
    if tree.x0 is not None:
        den += gauge_norm(pair.x_ball, tree.x0) ** p
    for l in tree.levels:
        gnorms = np.array([gauge_norm(pair.x_ball, x) for x in l])
        den += float(np.mean(gnorms**p))
    if den <= 0.0:
        raise ValueError("all-zero tree: M-type ratio undefined")
    return (num / den) ** (1.0 / p)


# ---------------------------------------------------------------------------
# Value lower bound: exact DP over accumulated sums
# ---------------------------------------------------------------------------


def _dp_value(extremes, n, wnorm, budget):
    """max over node assignments of E|sum eps_i x_i|_{W*}/n via dynamic
    programming on the accumulated sum (exact: the continuation payoff
    depends on the prefix only through its signed sum)."""
    memo = {}
    choice = {}

    def rec(level, s):
        if level == n + 1:
            return wnorm(s) / n
        key = (level, s.tobytes())
        if key in memo:
            return memo[key]
        if len(memo) > budget:
            raise MemoryError("state budget exceeded")
        best, best_e = -1.0, None
        for e in extremes:
            val = 0.5 * (rec(level + 1, s + e) + rec(level + 1, s - e))
            if val > best + 1e-15:
                best, best_e = val, e
        memo[key] = best
        choice[key] = best_e
        return best

    d = extremes[0].shape[0]
    val = rec(1, np.zeros(d))

    levels = []
    frontier = [np.zeros(d)]
    for level in range(1, n + 1):
        nodes = []
        nxt = []
        for s in frontier:
            e = choice[(level, s.tobytes())]
            nodes.append(e)
            nxt.extend([s + e, s - e])
        levels.append(np.array(nodes))
        frontier = nxt
    return val, SignTree(levels)


def _ascent_value(pair, n, restarts, seed, wnorm_ignored=None):
    """Greedy level init plus rounds of coordinate ascent over nodes with
    extreme-point alphabets; used when no finite extreme set exists."""
    rng = np.random.default_rng(seed)
    x_ball = pair.x_ball
    signs = _sign_matrix(n)

    def payoff(tree):
        return tree_payoff(tree, pair)

    best_val, best_tree = -1.0, None
    for _ in range(restarts):
        start = x_ball.random_extreme(rng)
        tree = SignTree.constant(start, n)
        val = payoff(tree)
        for _round in range(3):
            for level in range(1, n + 1):
                for idx in range(2**level // 2):
                    cands = [tree.levels[level - 1][idx]]
                    cands.extend(x_ball.random_extreme(rng) for _ in range(6))
                    cur = None
                    for c in cands:
                        tree.levels[level - 1][idx] = c
                        v = payoff(tree)
                        if cur is None or v > cur[0]:
                            cur = (v, np.array(c))
                    tree.levels[level - 1][idx] = cur[1]
                    val = cur[0]
        if val > best_val:
            best_val, best_tree = val, tree
    _ = signs
    return best_val, best_tree


def value_lower_bound(
    pair: GeometryPair,
    n: int,
    budget: int = 2_000_000,
    restarts: int = 32,
    seed: int = 0,
    return_tree: bool = False,
):
    """Certified lower bound on the game value V_n(W, X) (left inequality of
    the value sandwich), obtained by maximizing the Rademacher tree payoff
    over trees with nodes at extreme points of X."""
    if n > EXACT_DEPTH_CAP:
        raise ValueError("value_lower_bound restricted to exact-depth trees")
    extremes = pair.x_ball.extreme_points()
    result = None
    if extremes is not None:
        extremes = [np.asarray(e, dtype=float) for e in extremes]

        def wnorm(s):
            return dual_norm_batch(pair.w_ball, s[None, :])[0]

        try:
            val, tree = _dp_value(extremes, n, wnorm, budget)
            result = (val, tree)
        except MemoryError:
            result = None
    if result is None:
        result = _ascent_value(pair, n, restarts, seed)
    val, tree = result
    if return_tree:
        return val, tree
    return val


def estimate_cp(
    pair: GeometryPair,
    p: float,
    depth_budget: int = 4,
    restarts: int = 32,
    seed: int = 0,
) -> float:
    """Largest witnessed M-type ratio C-hat_p <= C_p over trees with nodes
    in the extreme points of X plus the zero vector (coordinate ascent from
    random starts, exact sign enumeration)."""
    if not (1.0 < p <= 2.0):
        raise ValueError("p must be in (1, 2]")
    rng = np.random.default_rng(seed)
    x_ball = pair.x_ball
    extremes = x_ball.extreme_points()
    if extremes is None:
        alphabet = [x_ball.support_point(rng.standard_normal(x_ball.dim)) for _ in range(8)]
    else:
        alphabet = list(np.asarray(extremes, dtype=float))
    alphabet.append(np.zeros(x_ball.dim))

    best = 0.0
    for depth in range(1, depth_budget + 1):
        for _ in range(max(1, restarts // depth_budget)):
            x0 = alphabet[rng.integers(len(alphabet) - 1)]  # nonzero start
            tree = SignTree.constant(alphabet[rng.integers(len(alphabet))], depth, x0=np.array(x0))
            try:
                val = mtype_ratio(tree, pair, p)
            except ValueError:
                continue
            for _round in range(3):
                for level in range(1, depth + 1):
                    for idx in range(2 ** (level - 1)):
                        cur_best = (val, np.array(tree.levels[level - 1][idx]))
                        for c in alphabet:
                            tree.levels[level - 1][idx] = c
                            try:
                                v = mtype_ratio(tree, pair, p)
                            except ValueError:
                                continue
                            if v > cur_best[0]:
                                cur_best = (v, np.array(c))
                        tree.levels[level - 1][idx] = cur_best[1]
                        val = cur_best[0]
            best = max(best, val)
    return best


def sandwich_report(
    pair: GeometryPair,
    reg,
    n_list,
    budget: int = 2_000_000,
    seed: int = 0,
    tol: float = 1e-6,
):
    """For each n: value lower bound, measured MD upper (adversary suite
    plus the exact replay of the optimal tree), and the D_p route
    2 d_p_upper n^(-1/p).  Asserts lower <= 2 upper_md + tol and
    upper_md <= upper_dp + tol; failures are reported, not raised."""
    from .costs import RandomVertex, SignGreedy, TreeReplay
    from .md_engine import run
    from .regularizers import d_p_upper

    q = reg.q_exponent
    p = q / (q - 1.0)
    rows = []
    for n in n_list:
        lower, tree = value_lower_bound(pair, n, budget=budget, seed=seed, return_tree=True)
        regrets = []
        tr = run(reg, pair, SignGreedy(pair.x_ball), n)
        regrets.append(tr.final_regret)
        for k in range(8):
            tr = run(reg, pair, RandomVertex(pair.x_ball, seed=seed + 1000 + k), n)
            regrets.append(tr.final_regret)
        # exact replay of the optimal tree: the mean regret over all sign
        # paths realizes the lower-bound strategy's expected regret
        signs = _sign_matrix(n)
        replay = []
        for row in signs:
            adv = TreeReplay(tree, path=[int(e) for e in row])
            tr = run(reg, pair, adv, n)
            replay.append(tr.final_regret)
        replay_mean = float(np.mean(replay))
        upper_md = max(max(regrets), replay_mean)
        upper_dp = 2.0 * d_p_upper(reg, pair.w_ball, p) * n ** (-1.0 / p)
        ok_lower = lower <= 2.0 * upper_md + tol
        ok_upper = upper_md <= upper_dp + tol
        rows.append(
            {
                "n": n,
                "lower": lower,
                "upper_md": upper_md,
                "upper_dp": upper_dp,
                "replay_mean": replay_mean,
                "ok_lower": ok_lower,
                "ok_upper": ok_upper,
            }
        )
    return rows


def cp_slack_check(pair: GeometryPair, reg, p: float, p_primes, seed: int = 0):
    """Loose-constant sanity: with the MD-certified rate constant
    D = 2 sqrt(sup Psi) (an upper bound on V_p), every witnessed ratio at
    p' < p must satisfy C-hat_{p'} <= 1104 D / (p - p')^2.  Violations
    indicate a bug, not a theory failure."""
    if reg.sup_over_w is None:
        raise ValueError("regularizer needs sup_over_w")
    d_hat = 2.0 * math.sqrt(reg.sup_over_w)
    out = []
    for pp in p_primes:
        if not pp < p:
            raise ValueError("p' must be < p")
        c_hat = estimate_cp(pair, pp, depth_budget=3, restarts=12, seed=seed)
        bound = 1104.0 * d_hat / (p - pp) ** 2
        out.append({"p_prime": pp, "c_hat": c_hat, "bound": bound, "ok": c_hat <= bound})
    return out
