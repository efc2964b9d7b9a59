import math

import numpy as np
import pytest

from mirrorgeo.geometry import (
    INF,
    GeometryPair,
    GroupBall,
    LpBall,
    SimplexBall,
    VertexHullBall,
    gauge_norm_batch,
)
from mirrorgeo.regularizers import (
    Entropy,
    EuclideanHalfSq,
    GroupSquared,
    PsiR,
    VertexHullSquared,
    d_p_upper,
    lp_regret_bound,
    pick_r,
    psi_conj_grad,
    psi_eval,
    psi_grad,
    scaled_for_pair,
    scaled_psi_for_lp_pair,
    sup_over_ball,
)

RNG = np.random.default_rng(31)


def fd_grad(reg, w, h=1e-6):
    w = np.asarray(w, dtype=float)
    g = np.zeros_like(w)
    for i in range(len(w)):
        e = np.zeros_like(w)
        e[i] = h
        g[i] = (psi_eval(reg, w + e) - psi_eval(reg, w - e)) / (2.0 * h)
    return g


# ---------------------------------------------------------------------------
# psi_eval examples
# ---------------------------------------------------------------------------


def test_psi_r2_value():
    assert psi_eval(PsiR(r=2.0, dim=2), [3.0, 4.0]) == pytest.approx(12.5)


def test_psi_r3_clarkson_value():
    assert psi_eval(PsiR(r=3.0, dim=2), [1.0, 0.0]) == pytest.approx(8.0 / 3.0)


@pytest.mark.parametrize(
    "reg",
    [
        PsiR(r=1.5, dim=3),
        PsiR(r=2.0, dim=3),
        PsiR(r=3.0, dim=3),
        PsiR(r=1.5, dim=3, scale=4.0),
        EuclideanHalfSq(dim=3),
        GroupSquared(q=2.0, r=1.5, k=3, d=1),
        VertexHullSquared(q=2.0, hull=VertexHullBall(np.eye(3))),
    ],
)
def test_psi_zero_is_zero_and_nonnegative(reg):
    assert psi_eval(reg, np.zeros(3)) == pytest.approx(0.0, abs=1e-15)
    for _ in range(50):
        assert psi_eval(reg, RNG.standard_normal(3)) >= 0.0


def test_vertex_hull_squared_signed_basis_value():
    # signed-basis hull with q = 2 reduces to the euclidean norm
    reg = VertexHullSquared(q=2.0, hull=VertexHullBall([[1.0, 0.0], [0.0, 1.0]]))
    assert psi_eval(reg, [1.0, 1.0]) == pytest.approx(1.0)


def test_entropy_rejects_negative_coordinates():
    with pytest.raises(ValueError):
        psi_eval(Entropy(dim=2), [-0.1, 1.1])


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------


def test_psi_grad_r2_identity():
    assert np.allclose(psi_grad(PsiR(r=2.0, dim=2), [3.0, 4.0]), [3.0, 4.0])


def test_entropy_grad_symmetry():
    g = psi_grad(Entropy(dim=2), [0.5, 0.5])
    assert g[0] == pytest.approx(g[1])


def test_grad_zero_at_origin():
    for reg in (PsiR(r=1.5, dim=3), PsiR(r=3.0, dim=3), GroupSquared(q=2.0, r=1.5, k=3, d=1)):
        assert np.allclose(psi_grad(reg, np.zeros(3)), 0.0)


ALL_KINDS = [
    PsiR(r=1.5, dim=4),
    PsiR(r=2.0, dim=4),
    PsiR(r=3.0, dim=4),
    PsiR(r=1.5, dim=4, scale=7.0),  # the scaled kind
    EuclideanHalfSq(dim=4),
    GroupSquared(q=2.0, r=1.5, k=2, d=2),
    VertexHullSquared(q=1.5, hull=VertexHullBall(np.random.default_rng(1).standard_normal((4, 4)))),
]


@pytest.mark.parametrize("reg", ALL_KINDS, ids=lambda r: r.kind + str(getattr(r, "r", "")))
def test_finite_difference_gradients(reg):
    rng = np.random.default_rng(17)
    for _ in range(40):
        w = rng.standard_normal(4)
        fd = fd_grad(reg, w)
        g = psi_grad(reg, w)
        assert np.linalg.norm(g - fd) / (1.0 + np.linalg.norm(fd)) <= 1e-5


def test_entropy_fd_gradient_positive_orthant():
    reg = Entropy(dim=4)
    rng = np.random.default_rng(23)
    for _ in range(40):
        w = rng.dirichlet(np.ones(4)) * 0.9 + 0.025
        fd = fd_grad(reg, w)
        g = psi_grad(reg, w)
        assert np.linalg.norm(g - fd) / (1.0 + np.linalg.norm(fd)) <= 1e-5


def test_redundant_hull_gradient_kkt_route():
    # K > dim: minimal representation found numerically; gradient recovered
    # from the KKT system is checked at the solver-limited tolerance
    verts = np.vstack([np.eye(3), [[0.5, 0.5, 0.0]]])
    reg = VertexHullSquared(q=1.5, hull=VertexHullBall(verts))
    rng = np.random.default_rng(4)
    for _ in range(5):
        w = rng.standard_normal(3)
        fd = fd_grad(reg, w, h=1e-5)
        g = psi_grad(reg, w)
        assert np.linalg.norm(g - fd) / (1.0 + np.linalg.norm(fd)) <= 1e-4


# ---------------------------------------------------------------------------
# conjugate gradient map
# ---------------------------------------------------------------------------


def test_conj_examples():
    assert np.allclose(psi_conj_grad(EuclideanHalfSq(dim=2), [3.0, 4.0]), [3.0, 4.0])
    assert np.allclose(psi_conj_grad(Entropy(dim=2), [0.0, 0.0]), [0.5, 0.5])


@pytest.mark.parametrize("reg", ALL_KINDS, ids=lambda r: r.kind + str(getattr(r, "r", "")))
def test_conjugate_inversion(reg):
    rng = np.random.default_rng(29)
    for _ in range(40):
        w = rng.standard_normal(4)
        w2 = psi_conj_grad(reg, psi_grad(reg, w))
        assert np.allclose(w2, w, atol=1e-6, rtol=1e-6)


def test_entropy_inversion_on_simplex():
    reg = Entropy(dim=5)
    rng = np.random.default_rng(41)
    for _ in range(40):
        w = rng.dirichlet(np.ones(5)) + 1e-6
        w = w / w.sum()
        w2 = psi_conj_grad(reg, psi_grad(reg, w))
        assert np.allclose(w2, w, atol=1e-6)


# ---------------------------------------------------------------------------
# sup over ball / d_p_upper
# ---------------------------------------------------------------------------


def test_sup_psi_r2_unit_l2():
    assert sup_over_ball(PsiR(r=2.0, dim=3), LpBall(2.0, 3)).value == pytest.approx(0.5)


def test_sup_entropy_simplex():
    est = sup_over_ball(Entropy(dim=4), SimplexBall(4))
    assert est.value == pytest.approx(math.log(4.0))
    assert est.certified


def test_sup_psi_r2_unit_l1_vertex():
    # max of |w|_2^2/2 over B_1 sits at a signed basis vector
    est = sup_over_ball(PsiR(r=2.0, dim=5), LpBall(1.0, 5))
    assert est.value == pytest.approx(0.5)


def test_sup_ascent_agrees_with_analytic():
    # force the generic ascent path via an interp ball wrapping B_1 twice
    from mirrorgeo.geometry import Interp2Ball

    ball = Interp2Ball(LpBall(1.0, 4), LpBall(1.0, 4))  # == B_1
    reg = PsiR(r=2.0, dim=4)
    est = sup_over_ball(reg, ball, restarts=16)
    assert est.value == pytest.approx(0.5, abs=1e-8)


def test_d_p_upper_examples():
    assert d_p_upper(PsiR(r=2.0, dim=3), LpBall(2.0, 3), 2.0) == pytest.approx(math.sqrt(0.5))
    assert d_p_upper(Entropy(dim=4), SimplexBall(4), 2.0) == pytest.approx(math.sqrt(math.log(4.0)))
    with pytest.raises(ValueError):
        d_p_upper(PsiR(r=2.0, dim=3), LpBall(2.0, 3), 2.5)


def test_group_d2_matches_paper_rate():
    # W = B_(2,1), X = B_inf, k=4, d=16: the certified-scaled group
    # regularizer lands within [0.1, 16] of k^(1-1/q) sqrt(log d)
    k, d = 4, 16
    r = math.log(d) / (math.log(d) - 1.0)
    pair = GeometryPair(GroupBall(2.0, 1.0, k, d), LpBall(INF, k * d))
    reg = scaled_for_pair(GroupSquared(q=2.0, r=r, k=k, d=d), pair)
    val = d_p_upper(reg, pair.w_ball, 2.0)
    target = k ** 0.5 * math.sqrt(math.log(d))
    assert 0.1 * target <= val <= 16.0 * target
    # the raw (unscaled) variant also sits inside the bracket
    raw = GroupSquared(q=2.0, r=r, k=k, d=d)
    raw.sup_over_w = sup_over_ball(raw, pair.w_ball).value
    val_raw = d_p_upper(raw, pair.w_ball, 2.0)
    assert 0.1 * target <= val_raw * 16.0 and val_raw <= 16.0 * target


# ---------------------------------------------------------------------------
# scaled psi / regret bound / pick_r
# ---------------------------------------------------------------------------


def test_scaled_psi_scale_examples():
    assert scaled_psi_for_lp_pair(2.0, 2.0, 10, 2.0).scale == pytest.approx(1.0)
    assert scaled_psi_for_lp_pair(2.0, 1.0, 10, 1.5).scale == pytest.approx(1.0)
    assert scaled_psi_for_lp_pair(2.0, 2.0, 16, 4.0).scale == pytest.approx(16.0)


def test_lp_regret_bound_examples():
    assert lp_regret_bound(2.0, 2.0, 5, 2.0, 100) == pytest.approx(0.4)
    assert lp_regret_bound(1.0, 1.0, 8, 2.0, 100) == pytest.approx(0.4)
    assert lp_regret_bound(4.0, 2.0, 16, 2.0, 10**4) == pytest.approx(0.08)
    with pytest.raises(ValueError):
        lp_regret_bound(2.0, 2.0, 5, 2.0, 0)


def test_pick_r_dual_pair_prefers_two():
    assert pick_r(2.0, 2.0, 10, 1000) == pytest.approx(2.0)
    assert pick_r(2.0, 2.0, 1, 1000) == pytest.approx(2.0)  # d = 1 trivial


def test_pick_r_minimizes_the_pinned_bound():
    # grid minimization of the closed-form bound; for (1, 1) the bound is
    # dimension-free and flat over [9/8, 2], so the tie rule lands on 2
    r = pick_r(1.0, 1.0, 10**6, 1000)
    assert r == pytest.approx(2.0)
    for cand in np.linspace(1.01, 4.0, 80):
        assert lp_regret_bound(1.0, 1.0, 10**6, r, 1000) <= lp_regret_bound(
            1.0, 1.0, 10**6, float(cand), 1000
        ) + 1e-12


def test_pick_r_r_max_restricts_to_two_uc_regime():
    assert pick_r(3.0, 1.5, 8, 10**4, r_max=2.0) <= 2.0


def test_pick_r_matched_cases():
    # (1.5, 3) is the dual pair: the d-exponent |1/q2 - 1/r| vanishes only
    # at r = p1 = 1.5
    assert pick_r(1.5, 3.0, 8, 1000) == pytest.approx(1.5)
    # (1.5, 2.5) is non-dual: flat optimum band [p1, q2] = [1.5, 5/3],
    # tie broken toward 2 -> q2
    assert pick_r(1.5, 2.5, 8, 1000) == pytest.approx(5.0 / 3.0)


# ---------------------------------------------------------------------------
# uniform convexity and Bregman lower-bound certificates (module-sized)
# ---------------------------------------------------------------------------


def _sample_ball(ball, rng, m):
    if isinstance(ball, SimplexBall):
        return rng.dirichlet(np.ones(ball.dim), size=m) * ball.radius
    pts = np.empty((m, ball.dim))
    for i in range(m):
        s = ball.support_point(rng.standard_normal(ball.dim))
        pts[i] = rng.uniform(0.0, 1.0) ** 0.7 * s
    return pts


def test_uc_certificate_catalog_sample():
    from mirrorgeo.harness import catalog_pairs

    rng = np.random.default_rng(99)
    for pair, reg, label in catalog_pairs(n_hint=256):
        w1 = _sample_ball(pair.w_ball, rng, 400)
        w2 = _sample_ball(pair.w_ball, rng, 400)
        al = rng.uniform(0, 1, size=400)
        q = reg.q_exponent
        mid = al[:, None] * w1 + (1 - al[:, None]) * w2
        f_mid = np.asarray(reg.value(mid), dtype=float)
        f1 = np.asarray(reg.value(w1), dtype=float)
        f2 = np.asarray(reg.value(w2), dtype=float)
        dn = gauge_norm_batch(reg.convexity_norm, w1 - w2)
        viol = f_mid - (al * f1 + (1 - al) * f2 - al * (1 - al) / q * dn**q)
        assert np.max(viol) <= 1e-9, label


def test_bregman_lower_bound_catalog_sample():
    from mirrorgeo.harness import catalog_pairs
    from mirrorgeo.prox import bregman_divergence

    rng = np.random.default_rng(7)
    for pair, reg, label in catalog_pairs(n_hint=256):
        q = reg.q_exponent
        for _ in range(60):
            w = _sample_ball(pair.w_ball, rng, 1)[0]
            wp = _sample_ball(pair.w_ball, rng, 1)[0]
            breg = bregman_divergence(reg, wp, w)
            nrm = reg.convexity_norm.gauge(wp - w)
            assert breg >= nrm**q / q - 1e-9, label
