"""Experiment runner: catalog pairings, the D_2 table, rate fits, the
max-norm experiment, config parsing and CSV output.

Config files are INI-style with sections [geometry] [regularizer]
[adversary] [run] [output]; unknown keys are errors.  Every CSV starts with
the schema comment line ``# mirrorgeo-csv v1`` and is byte-reproducible
from (config, seed).
"""

from __future__ import annotations

import configparser
import csv as _csv
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .costs import Adversary, Linear, RandomVertex, SignGreedy
from .geometry import (
    INF,
    Ball,
    GeometryPair,
    GroupBall,
    LpBall,
    SimplexBall,
    VertexHullBall,
    holder_conjugate,
)
from .md_engine import CSV_HEADER_COMMENT, run
from .regularizers import (
    Entropy,
    EuclideanHalfSq,
    GroupSquared,
    PsiR,
    VertexHullSquared,
    d_p_upper,
    pick_r,
    scaled_for_pair,
    scaled_psi_for_lp_pair,
    sup_over_ball,
)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    geometry: dict
    regularizer: dict
    adversary: dict
    n_list: list
    dims: list
    seed: int
    output_path: str | None
    raw_text: str = ""

    @property
    def digest(self) -> str:
        # semantic fields only: the output location must not change results
        canon = repr(
            (
                self.kind,
                sorted(self.geometry.items()),
                sorted(self.regularizer.items()),
                sorted(self.adversary.items()),
                self.n_list,
                self.dims,
                self.seed,
            )
        )
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


@dataclass
class ResultRecord:
    label: str = ""
    config_digest: str = ""
    n: int | None = None
    d: int | None = None
    measured_regret: float | None = None
    bound: float | None = None
    d2_hat: float | None = None
    ratio: float | None = None
    fitted_exponent: float | None = None
    value_lower: float | None = None
    c_p_hat: float | None = None
    sup_psi: float | None = None
    extra: dict = field(default_factory=dict)


RECORD_COLUMNS = [
    "label",
    "config_digest",
    "n",
    "d",
    "measured_regret",
    "bound",
    "d2_hat",
    "ratio",
    "fitted_exponent",
    "value_lower",
    "c_p_hat",
    "sup_psi",
]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def write_records_csv(records, path, columns=None):
    cols = columns or RECORD_COLUMNS
    with open(path, "w", newline="\n") as fh:
        fh.write(CSV_HEADER_COMMENT + "\n")
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for r in records:
            writer.writerow([_fmt(getattr(r, c, None)) for c in cols])


# ---------------------------------------------------------------------------
# Rate fitting
# ---------------------------------------------------------------------------


def fit_rate_exponent(points) -> float:
    """Least-squares slope of log(regret) against log(n)."""
    pts = [(float(n), float(r)) for n, r in points]
    if len(pts) < 4:
        raise ValueError("need at least 4 points to fit a rate")
    if any(r <= 0 for _, r in pts):
        raise ValueError("regret values must be positive for a log-log fit")
    ln = np.log([n for n, _ in pts])
    lr = np.log([r for _, r in pts])
    return float(np.polyfit(ln, lr, 1)[0])


# ---------------------------------------------------------------------------
# Adversary suite
# ---------------------------------------------------------------------------

SUITE_RANDOM_SEEDS = tuple(range(8))


def adversary_suite(x_ball: Ball, seed: int):
    advs = [("sign_greedy", SignGreedy(x_ball))]
    for k in SUITE_RANDOM_SEEDS:
        advs.append((f"random_vertex_{k}", RandomVertex(x_ball, seed=seed * 131 + k)))
    return advs


def worst_regret(reg, pair: GeometryPair, n: int, seed: int = 0):
    """Max measured regret over {SignGreedy, RandomVertex x 8} -- a lower
    estimate of the true worst case, recorded as the MD_p witness."""
    worst = -math.inf
    bound = None
    for _, adv in adversary_suite(pair.x_ball, seed):
        tr = run(reg, pair, adv, n)
        worst = max(worst, tr.final_regret)
        bound = tr.bound_final
    return worst, bound


# ---------------------------------------------------------------------------
# Catalog pairings (the regret-bound acceptance suite)
# ---------------------------------------------------------------------------


def _hull_vertices(dim: int, seed: int = 5):
    """A well-conditioned invertible vertex set for the hull pairing."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((dim, dim))
    q, _ = np.linalg.qr(a)
    return q.T + 0.1 * rng.standard_normal((dim, dim))


def catalog_pairs(n_hint: int = 1024):
    """The (pair, regularizer, label) catalog used by the regret acceptance
    run: every entry is rescaled so its uniform convexity is certified
    w.r.t. the pair's X* gauge, making the MD bound applicable."""
    out = []

    d = 8
    pair = GeometryPair(LpBall(2.0, d), LpBall(2.0, d))
    out.append((pair, scaled_for_pair(EuclideanHalfSq(dim=d), pair), "l2_l2_euclidean"))

    pair = GeometryPair(SimplexBall(d), LpBall(INF, d))
    out.append((pair, scaled_for_pair(Entropy(dim=d), pair), "simplex_linf_entropy"))

    # non-dual l_p pair; r = p1 sits in the flat-optimum band [p1, q2] of the
    # regret bound and keeps the Bregman projection radial (matched norm)
    p1, p2 = 1.5, 2.5
    pair = GeometryPair(LpBall(p1, d), LpBall(p2, d))
    out.append((pair, scaled_for_pair(PsiR(r=p1, dim=d), pair), "lp_nondual_psi_r"))

    r = pick_r(1.0, INF, d, n_hint)
    pair = GeometryPair(LpBall(1.0, d), LpBall(INF, d))
    out.append((pair, scaled_for_pair(PsiR(r=r, dim=d), pair), "l1_linf_scaled_psi_r"))

    pair = GeometryPair(LpBall(3.0, d), LpBall(1.5, d))
    out.append((pair, scaled_for_pair(PsiR(r=3.0, dim=d), pair), "l3_dual_clarkson"))

    k, dd = 4, 16
    r_g = math.log(dd) / (math.log(dd) - 1.0)
    pair = GeometryPair(GroupBall(2.0, 1.0, k, dd), LpBall(INF, k * dd))
    out.append(
        (pair, scaled_for_pair(GroupSquared(q=2.0, r=r_g, k=k, d=dd), pair), "group21_linf")
    )

    dh = 6
    hull = VertexHullBall(_hull_vertices(dh))
    pair = GeometryPair(hull, LpBall(INF, dh))
    out.append(
        (pair, scaled_for_pair(VertexHullSquared(q=2.0, hull=hull), pair), "vertex_hull_linf")
    )

    pair = GeometryPair(LpBall(2.0, d), LpBall(1.0, d))
    out.append((pair, scaled_for_pair(EuclideanHalfSq(dim=d), pair), "l2_l1_euclidean"))

    return out


# ---------------------------------------------------------------------------
# D_2 table experiment
# ---------------------------------------------------------------------------


def table_formula(p1: float, p2: float, d: int) -> float:
    """The six-row D_2 table; the log factor uses max(d, 2) so that d = 1
    collapses to a constant instead of zero."""
    q2 = holder_conjugate(p2)
    logd = math.log(max(d, 2))
    if p1 <= 2.0 and math.isinf(q2):
        return math.sqrt(logd)
    if p1 <= 2.0 and q2 > 2.0:
        return 1.0
    if p1 <= 2.0 and p1 <= q2 <= 2.0:
        return math.sqrt(p2 - 1.0)
    if p1 <= 2.0 and 1.0 <= q2 < p1:
        return float(d) ** (1.0 / q2 - 1.0 / p1) * math.sqrt(p2 - 1.0)
    if p1 > 2.0 and q2 > 2.0:
        return float(d) ** (0.5 - 1.0 / p1)
    if p1 > 2.0:
        inv_q2 = 0.0 if math.isinf(q2) else 1.0 / q2
        return float(d) ** (inv_q2 - 1.0 / p1)
    raise ValueError(f"no table row for p1={p1}, p2={p2}")


#: Row-representative (p1, p2) choices covering all six table rows.
TABLE_ROWS = [
    ("row1_q2_gt2", 2.0, 4.0 / 3.0),
    ("row2_dualish", 1.5, 3.0),
    ("row3_small_q2", 2.0, 5.0),
    ("row4_p1_gt2_q2_gt2", 4.0, 1.5),
    ("row5_p1_gt2", 3.0, 4.0),
    ("row6_q2_inf", 1.0, 1.0),
]


def table_d2_experiment(p1: float, p2: float, dims, n: int, seed: int = 0, label: str = ""):
    """For each dimension: pick r (restricted to the 2-uniformly-convex
    regime the D_2 table is about), build the rescaled psi_r, record the
    D_2 estimate, the measured MD regret at n, and the ratio to the table
    formula."""
    records = []
    for d in dims:
        d = int(d)
        r = pick_r(p1, p2, d, n, r_max=2.0)
        pair = GeometryPair(LpBall(p1, d), LpBall(p2, d))
        reg = scaled_psi_for_lp_pair(p1, p2, d, r)
        reg.sup_over_w = sup_over_ball(reg, pair.w_ball).value
        d2 = d_p_upper(reg, pair.w_ball, 2.0)
        tr = run(reg, pair, SignGreedy(pair.x_ball), n)
        records.append(
            ResultRecord(
                label=label or f"table_p1={p1}_p2={p2}",
                n=n,
                d=d,
                measured_regret=tr.final_regret,
                bound=tr.bound_final,
                d2_hat=d2,
                ratio=d2 / table_formula(p1, p2, d),
                sup_psi=reg.sup_over_w,
                extra={"r": r},
            )
        )
    return records


# ---------------------------------------------------------------------------
# Interpolation-norm D_2 experiment (elastic net)
# ---------------------------------------------------------------------------


def interp_d2_experiment(d: int = 32, n: int = 1024, seed: int = 0):
    """Elastic-net interpolation pair: W1 = B_1, W2 = B_2, X = B_inf.

    Component D_2 estimates come from the rescaled psi_r catalog; the
    type-1 ball reuses the better component's regularizer (its sup over
    the smaller interpolated ball is found by multi-start ascent, a
    certified lower bound, so the reported d2_hat is itself a lower
    estimate); the type-2 ball, being conv(B_1 u B_2) = B_2, is evaluated
    with the B_2 component's regularizer.
    """
    from .geometry import Interp1Ball, Interp2Ball

    x = LpBall(INF, d)
    comp = {}
    for p1 in (1.0, 2.0):
        r = pick_r(p1, INF, d, n, r_max=2.0)
        reg = scaled_psi_for_lp_pair(p1, INF, d, r)
        ball = LpBall(p1, d)
        reg.sup_over_w = sup_over_ball(reg, ball).value
        comp[p1] = (reg, d_p_upper(reg, ball, 2.0))

    d2_1, d2_2 = comp[1.0][1], comp[2.0][1]
    best_reg = comp[1.0][0] if d2_1 <= d2_2 else comp[2.0][0]
    worst_reg = comp[2.0][0] if d2_2 >= d2_1 else comp[1.0][0]

    i1 = Interp1Ball(LpBall(1.0, d), LpBall(2.0, d))
    sup_i1 = sup_over_ball(best_reg, i1, seed=seed, restarts=16)
    d2_i1 = sup_i1.value ** 0.5

    i2 = Interp2Ball(LpBall(1.0, d), LpBall(2.0, d))
    sup_i2 = sup_over_ball(worst_reg, i2, seed=seed, restarts=16)
    d2_i2 = sup_i2.value ** 0.5

    return {
        "d": d,
        "d2_component_l1": d2_1,
        "d2_component_l2": d2_2,
        "d2_interp1": d2_i1,
        "d2_interp2": d2_i2,
        "interp1_certified": sup_i1.certified,
        "bound_interp1": 2.0 * min(d2_1, d2_2),
        "bound_interp2": 0.5 * max(d2_1, d2_2),
    }


# ---------------------------------------------------------------------------
# Max-norm experiment
# ---------------------------------------------------------------------------


def rank_one_sign_matrices(m: int, n_cols: int) -> np.ndarray:
    """All rank-one sign matrices u v^T (u[0] fixed to +1; the symmetric
    closure supplies the sign flips), flattened rows; K = 2^(m+n-1)."""
    us = []
    for bits in range(2 ** (m - 1)):
        u = np.ones(m)
        for j in range(m - 1):
            if (bits >> j) & 1:
                u[j + 1] = -1.0
        us.append(u)
    vs = []
    for bits in range(2**n_cols):
        v = np.ones(n_cols)
        for j in range(n_cols):
            if (bits >> j) & 1:
                v[j] = -1.0
        vs.append(v)
    return np.array([np.outer(u, v).reshape(m * n_cols) for u in us for v in vs])


class _PullbackAdversary(Adversary):
    """Adapts a matrix-side adversary to the hull-coefficient space."""

    kind = "pullback"

    def __init__(self, base: Adversary, V: np.ndarray):
        self.base = base
        self.V = V

    def reset(self):
        if hasattr(self.base, "reset"):
            self.base.reset()

    def next_cost(self, alpha_t, t):
        w = self.V @ np.asarray(alpha_t, dtype=float)
        f = self.base.next_cost(w, t)
        return Linear(self.V.T @ f.x)


def maxnorm_q(K: int) -> float:
    """q = log K / (log K - 1), clamped to 2 where the formula leaves
    (1, 2] (log K <= 2, i.e. K <= e^2)."""
    lk = math.log(K)
    if lk <= 2.0:
        return 2.0
    return lk / (lk - 1.0)


def maxnorm_experiment(M: int, N: int, n: int, seed: int = 0, n_list=None):
    """W = hull of rank-one sign matrices, X = elementwise l_1 ball,
    Psi = the (W, q)-norm squared with q = logK/(logK-1), rescaled by
    K^(2-2/q) so it is 2-uniformly convex w.r.t. the elementwise sup norm.

    MD runs in the hull-coefficient space: pulled-back costs V^T x live in
    the K-dimensional sup-norm ball and regret/comparator values coincide
    with the matrix-side game, while sup Psi over the coefficient l_1 ball
    equals the scale/(2(q-1)) reported here (the LP-based sup over W is
    recorded alongside).
    """
    if M > 6 or N > 6:
        raise ValueError("max-norm experiment capped at 6 x 6 matrices")
    verts = rank_one_sign_matrices(M, N)
    K = len(verts)
    q = maxnorm_q(K)
    scale = float(K) ** (2.0 - 2.0 / q)
    sup_coeff = scale / (2.0 * (q - 1.0))

    hull = VertexHullBall(verts)
    vhs = VertexHullSquared(q=q, hull=hull, scale=scale)
    # all rank-one sign matrices are equivalent under signed permutations,
    # so one coefficient-norm solve gives the LP-based sup over W
    sup_lp = scale / (2.0 * (q - 1.0)) * vhs.coeff_norm(verts[0]) ** 2

    V = hull.vertex_array.T  # (M N) x K
    pair_alpha = GeometryPair(LpBall(1.0, K), LpBall(INF, K))
    reg_alpha = PsiR(r=q, dim=K, scale=scale)
    reg_alpha.sup_over_w = sup_coeff

    x_matrix_ball = LpBall(1.0, M * N)  # single-entry costs, symmetrized

    def one_run(rounds, adv_seed):
        advs = [("sign_greedy", _PullbackAdversary(SignGreedy(x_matrix_ball), V))]
        for k in SUITE_RANDOM_SEEDS:
            advs.append(
                (
                    f"random_vertex_{k}",
                    _PullbackAdversary(RandomVertex(x_matrix_ball, seed=adv_seed + k), V),
                )
            )
        worst = -math.inf
        bound = None
        for _, adv in advs:
            tr = run(reg_alpha, pair_alpha, adv, rounds)
            worst = max(worst, tr.final_regret)
            bound = tr.bound_final
        return worst, bound

    regret, bound = one_run(n, seed * 977 + 11)
    rec = ResultRecord(
        label=f"maxnorm_{M}x{N}",
        n=n,
        d=M * N,
        measured_regret=regret,
        bound=bound,
        sup_psi=sup_coeff,
        extra={
            "K": K,
            "q": q,
            "log_K": math.log(K),
            "sup_psi_lp": sup_lp,
            "sqrt_MN_rate": math.sqrt((M + N) / n),
        },
    )
    if n_list:
        pts = []
        for m_rounds in n_list:
            reg_m = PsiR(r=q, dim=K, scale=scale)
            reg_m.sup_over_w = sup_coeff
            worst, _ = one_run(int(m_rounds), seed * 977 + 11)
            pts.append((int(m_rounds), worst))
        rec.fitted_exponent = fit_rate_exponent(pts)
        rec.extra["rate_points"] = pts
    return rec


# ---------------------------------------------------------------------------
# Config parsing and dispatch
# ---------------------------------------------------------------------------

_ALLOWED_KEYS = {
    "geometry": {
        "w_kind", "x_kind", "dim", "w_p", "x_p", "w_radius", "x_radius",
        "w_q", "w_r", "rows", "cols",
    },
    "regularizer": {"kind", "r", "scale"},
    "adversary": {"kind", "seed"},
    "run": {"kind", "n_list", "dims", "seed"},
    "output": {"path"},
}
_REQUIRED_SECTIONS = ["geometry", "regularizer", "adversary", "run"]


def _parse_float(section, key, raw):
    if raw.strip().lower() in ("inf", "infinity"):
        return INF
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not a number: {raw!r}")


def parse_config(path: str) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    with open(path) as fh:
        text = fh.read()
    cp.read_string(text)
    for section in cp.sections():
        if section not in _ALLOWED_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        for key in cp[section]:
            if key not in _ALLOWED_KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
    for section in _REQUIRED_SECTIONS:
        if section not in cp:
            raise ConfigError(f"missing section [{section}]")

    geo = dict(cp["geometry"])
    regc = dict(cp["regularizer"])
    advc = dict(cp["adversary"])
    runc = dict(cp["run"])
    out = dict(cp["output"]) if "output" in cp else {}

    if "n_list" not in runc:
        raise ConfigError("[run] n_list is required")
    try:
        n_list = [int(x) for x in runc["n_list"].split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"[run] n_list: expected comma-separated ints, got {runc['n_list']!r}")
    if not n_list:
        raise ConfigError("[run] n_list must be nonempty")
    dims = []
    if "dims" in runc:
        dims = [int(x) for x in runc["dims"].split(",") if x.strip()]
    seed = int(runc.get("seed", "0"))
    kind = runc.get("kind", "regret")
    if kind not in ("regret", "table_d2", "value_sandwich", "maxnorm"):
        raise ConfigError(f"[run] kind: unknown experiment kind {kind!r}")

    return ExperimentConfig(
        kind=kind,
        geometry=geo,
        regularizer=regc,
        adversary=advc,
        n_list=n_list,
        dims=dims,
        seed=seed,
        output_path=out.get("path"),
        raw_text=text,
    )


def _build_ball(prefix: str, geo: dict) -> Ball:
    kind = geo.get(f"{prefix}_kind", "lp")
    dim = int(geo.get("dim", "0"))
    radius = _parse_float("geometry", f"{prefix}_radius", geo.get(f"{prefix}_radius", "1.0"))
    if kind == "lp":
        p = _parse_float("geometry", f"{prefix}_p", geo.get(f"{prefix}_p", "2"))
        if dim < 1:
            raise ConfigError("[geometry] dim is required and must be >= 1")
        return LpBall(p, dim, radius)
    if kind == "simplex":
        return SimplexBall(dim, radius)
    if kind == "group":
        q = _parse_float("geometry", "w_q", geo.get("w_q", "2"))
        r = _parse_float("geometry", "w_r", geo.get("w_r", "1"))
        return GroupBall(q, r, int(geo["rows"]), int(geo["cols"]), radius)
    raise ConfigError(f"[geometry] unknown ball kind {kind!r}")


def _build_regularizer(regc: dict, pair: GeometryPair, n_hint: int):
    kind = regc.get("kind", "auto")
    w, x = pair.w_ball, pair.x_ball
    if kind == "auto":
        if isinstance(w, SimplexBall):
            return scaled_for_pair(Entropy(dim=w.dim), pair)
        if isinstance(w, LpBall) and isinstance(x, LpBall):
            r = pick_r(w.p, x.p, w.dim, n_hint)
            return scaled_for_pair(PsiR(r=r, dim=w.dim), pair)
        raise ConfigError("[regularizer] kind=auto supports lp/lp and simplex geometries")
    if kind == "euclidean":
        return scaled_for_pair(EuclideanHalfSq(dim=pair.dim), pair)
    if kind == "entropy":
        return scaled_for_pair(Entropy(dim=pair.dim), pair)
    if kind == "psi_r":
        if "r" not in regc:
            raise ConfigError("[regularizer] kind=psi_r requires r")
        reg = PsiR(r=_parse_float("regularizer", "r", regc["r"]), dim=pair.dim,
                   scale=_parse_float("regularizer", "scale", regc.get("scale", "1")))
        return scaled_for_pair(reg, pair)
    raise ConfigError(f"[regularizer] unknown kind {kind!r}")


def _build_adversary(advc: dict, x_ball: Ball, seed: int) -> Adversary:
    kind = advc.get("kind", "sign_greedy")
    if kind == "sign_greedy":
        return SignGreedy(x_ball)
    if kind == "random_vertex":
        return RandomVertex(x_ball, seed=int(advc.get("seed", seed)))
    raise ConfigError(f"[adversary] unknown kind {kind!r}")


def run_experiment(cfg: ExperimentConfig):
    """Dispatch an experiment config; returns records and writes the CSV
    when an output path is configured.  Deterministic given the config."""
    records = []
    if cfg.kind == "regret":
        pair = GeometryPair(_build_ball("w", cfg.geometry), _build_ball("x", cfg.geometry))
        reg = _build_regularizer(cfg.regularizer, pair, max(cfg.n_list))
        for n in cfg.n_list:
            adv = _build_adversary(cfg.adversary, pair.x_ball, cfg.seed)
            tr = run(reg, pair, adv, n)
            records.append(
                ResultRecord(
                    label="regret",
                    config_digest=cfg.digest,
                    n=n,
                    d=pair.dim,
                    measured_regret=tr.final_regret,
                    bound=tr.bound_final,
                    sup_psi=tr.sup_psi,
                )
            )
    elif cfg.kind == "table_d2":
        p1 = _parse_float("geometry", "w_p", cfg.geometry.get("w_p", "2"))
        p2 = _parse_float("geometry", "x_p", cfg.geometry.get("x_p", "2"))
        dims = cfg.dims or [int(cfg.geometry.get("dim", "4"))]
        records = table_d2_experiment(p1, p2, dims, cfg.n_list[0], cfg.seed)
        for r in records:
            r.config_digest = cfg.digest
    elif cfg.kind == "value_sandwich":
        from .game_value import sandwich_report

        pair = GeometryPair(_build_ball("w", cfg.geometry), _build_ball("x", cfg.geometry))
        reg = _build_regularizer(cfg.regularizer, pair, max(cfg.n_list))
        rows = sandwich_report(pair, reg, cfg.n_list, seed=cfg.seed)
        for row in rows:
            records.append(
                ResultRecord(
                    label="value_sandwich",
                    config_digest=cfg.digest,
                    n=row["n"],
                    d=pair.dim,
                    measured_regret=row["upper_md"],
                    bound=row["upper_dp"],
                    value_lower=row["lower"],
                )
            )
    elif cfg.kind == "maxnorm":
        m = int(cfg.geometry.get("rows", "2"))
        ncols = int(cfg.geometry.get("cols", "2"))
        rec = maxnorm_experiment(m, ncols, cfg.n_list[-1], cfg.seed,
                                 n_list=cfg.n_list if len(cfg.n_list) >= 4 else None)
        rec.config_digest = cfg.digest
        records = [rec]
    else:  # pragma: no cover - guarded by parse_config
        raise ConfigError(f"unknown experiment kind {cfg.kind!r}")

    if cfg.output_path:
        write_records_csv(records, cfg.output_path)
    return records
