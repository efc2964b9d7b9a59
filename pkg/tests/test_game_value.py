import itertools
import math

import numpy as np
import pytest

from mirrorgeo.game_value import (
    SignTree,
    cp_slack_check,
    estimate_cp,
    mtype_ratio,
    sandwich_report,
    tree_payoff,
    value_lower_bound,
)
from mirrorgeo.geometry import INF, GeometryPair, LpBall
from mirrorgeo.regularizers import EuclideanHalfSq, scaled_for_pair


def d1_pair():
    return GeometryPair(LpBall(INF, 1), LpBall(INF, 1))


# ---------------------------------------------------------------------------
# SignTree structure
# ---------------------------------------------------------------------------


def test_tree_node_count_and_indexing():
    t = SignTree([np.array([[1.0]]), np.array([[2.0], [3.0]])])
    assert t.depth == 2
    assert t.node_count == 3
    assert np.allclose(t.node(1, []), [1.0])
    assert np.allclose(t.node(2, [1]), [2.0])
    assert np.allclose(t.node(2, [-1]), [3.0])
    with pytest.raises(ValueError):
        SignTree([np.zeros((3, 1))])  # level 1 must have one node


def test_tree_validation_against_ball():
    t = SignTree.constant([1.0, 0.0], 3)
    assert t.validate_in_ball(LpBall(INF, 2), 1e-9)
    assert not t.validate_in_ball(LpBall(1.0, 2, radius=0.5), 1e-9)


# ---------------------------------------------------------------------------
# payoffs
# ---------------------------------------------------------------------------


def test_payoff_depth_one_is_the_norm():
    pair = d1_pair()
    assert tree_payoff(SignTree.constant([0.7], 1), pair) == pytest.approx(0.7)


def test_payoff_n2_enumeration():
    # signs (++, +-, -+, --) give |e1 + e2| = 2, 0, 0, 2 -> mean 1, / n = 0.5
    assert tree_payoff(SignTree.constant([1.0], 2), d1_pair()) == pytest.approx(0.5)


def test_payoff_zero_tree():
    assert tree_payoff(SignTree.constant([0.0], 4), d1_pair()) == pytest.approx(0.0)


def test_payoff_monte_carlo_within_three_standard_errors():
    tree = SignTree.constant([1.0], 10)
    pair = d1_pair()
    exact = tree_payoff(tree, pair)
    mc = tree_payoff(tree, pair, exact=False, mc_paths=100_000, seed=1)
    # per-path payoffs are bounded by 1, so SE <= 1/sqrt(paths)
    assert abs(mc - exact) <= 3.0 / math.sqrt(100_000)


def test_payoff_moment_variant_with_root():
    tree = SignTree.constant([1.0], 2, x0=np.array([1.0]))
    # E|1 + e1 + e2|^2 = (9 + 1 + 1 + 1)/4 = 3
    assert tree_payoff(tree, d1_pair(), p=2.0) == pytest.approx(3.0)


def test_payoff_depth_cap():
    with pytest.raises(ValueError):
        tree_payoff(SignTree.constant([1.0], 21), d1_pair(), exact=True)
    with pytest.raises(ValueError):
        tree_payoff(SignTree.constant([1.0], 3), d1_pair(), exact=False, mc_paths=10)


# ---------------------------------------------------------------------------
# value lower bound
# ---------------------------------------------------------------------------


def test_value_exact_small_cases():
    pair = d1_pair()
    assert value_lower_bound(pair, 1) == pytest.approx(1.0)
    assert value_lower_bound(pair, 2) == pytest.approx(0.5)
    assert value_lower_bound(pair, 4) == pytest.approx(0.375)


def test_value_dp_matches_product_enumeration():
    # brute force over all +-1 assignments of the 3 nodes at depth 2
    pair = d1_pair()
    best = -1.0
    for combo in itertools.product([1.0, -1.0], repeat=3):
        tree = SignTree([np.array([[combo[0]]]), np.array([[combo[1]], [combo[2]]])])
        best = max(best, tree_payoff(tree, pair))
    assert value_lower_bound(pair, 2) == pytest.approx(best)


def test_value_monotone_under_ball_inclusion():
    w = LpBall(INF, 2)
    small = GeometryPair(w, LpBall(1.0, 2))
    big = GeometryPair(w, LpBall(INF, 2))  # B_1 subset B_inf
    for n in (1, 2, 3):
        assert value_lower_bound(big, n) >= value_lower_bound(small, n) - 1e-12


def test_value_returns_feasible_tree():
    pair = GeometryPair(LpBall(INF, 2), LpBall(INF, 2))
    val, tree = value_lower_bound(pair, 3, return_tree=True)
    assert tree.validate_in_ball(pair.x_ball, 1e-9)
    assert tree_payoff(tree, pair) == pytest.approx(val)


def test_value_ascent_path_for_smooth_ball():
    # l_2 data ball has no finite extreme set: greedy/ascent route
    pair = GeometryPair(LpBall(2.0, 2), LpBall(2.0, 2))
    val = value_lower_bound(pair, 2, restarts=4, seed=0)
    # constant tree value: E|e1 x + e2 x|_2 / 2 = 0.5 at any unit x
    assert val >= 0.5 - 1e-9


# ---------------------------------------------------------------------------
# M-type
# ---------------------------------------------------------------------------


def test_mtype_root_only():
    pair = GeometryPair(LpBall(2.0, 3), LpBall(2.0, 3))
    tree = SignTree([np.zeros((1, 3))], x0=np.array([2.0, 0.0, 0.0]))
    assert mtype_ratio(tree, pair, 2.0) == pytest.approx(1.0)


def test_mtype_orthonormal_parallelogram():
    pair = GeometryPair(LpBall(2.0, 3), LpBall(2.0, 3))
    eye = np.eye(3)
    tree = SignTree([eye[0][None, :], np.tile(eye[1], (2, 1)), np.tile(eye[2], (4, 1))])
    assert mtype_ratio(tree, pair, 2.0) == pytest.approx(1.0)


def test_mtype_scale_invariance():
    pair = GeometryPair(LpBall(INF, 2), LpBall(1.0, 2))
    rng = np.random.default_rng(2)
    tree = SignTree(
        [rng.standard_normal((1, 2)), rng.standard_normal((2, 2))], x0=rng.standard_normal(2)
    )
    r1 = mtype_ratio(tree, pair, 1.5)
    r2 = mtype_ratio(tree.scaled(4.2), pair, 1.5)
    assert abs(r1 - r2) <= 1e-12


def test_mtype_rejects_zero_tree():
    pair = d1_pair()
    with pytest.raises(ValueError):
        mtype_ratio(SignTree.constant([0.0], 2), pair, 2.0)


def test_estimate_cp_hilbert_equality():
    pair = GeometryPair(LpBall(2.0, 2), LpBall(2.0, 2))
    assert estimate_cp(pair, 2.0, depth_budget=3, restarts=6) == pytest.approx(1.0, abs=1e-9)


def test_estimate_cp_d1_exhaustive_is_one():
    pair = d1_pair()
    val = estimate_cp(pair, 2.0, depth_budget=4, restarts=16)
    assert val == pytest.approx(1.0, abs=1e-9)


def test_estimate_cp_linf_w_exceeds_one():
    # W = B_inf (W* gauge = l_1) against X = B_inf data: mass adds up in l_1
    pair = GeometryPair(LpBall(INF, 2), LpBall(INF, 2))
    val = estimate_cp(pair, 2.0, depth_budget=3, restarts=8)
    assert val >= 1.0
    with pytest.raises(ValueError):
        estimate_cp(pair, 1.0)


# ---------------------------------------------------------------------------
# sandwich + slack checks
# ---------------------------------------------------------------------------


def test_sandwich_report_d1():
    pair = d1_pair()
    reg = scaled_for_pair(EuclideanHalfSq(dim=1), pair)
    rows = sandwich_report(pair, reg, [1, 2, 4], seed=0)
    for row in rows:
        assert row["ok_lower"] and row["ok_upper"]
    assert rows[1]["lower"] == pytest.approx(0.5)
    assert rows[2]["lower"] == pytest.approx(0.375)
    # the replay mean realizes the lower-bound strategy's expected regret
    for row in rows:
        assert row["replay_mean"] >= row["lower"] - 1e-8


def test_cp_slack_1104():
    pair = GeometryPair(LpBall(2.0, 2), LpBall(2.0, 2))
    reg = scaled_for_pair(EuclideanHalfSq(dim=2), pair)
    out = cp_slack_check(pair, reg, 2.0, [1.5, 1.9], seed=0)
    assert all(row["ok"] for row in out)
