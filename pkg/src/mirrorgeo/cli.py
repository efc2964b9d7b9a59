"""Command-line interface.

Subcommands: run, rate-fit, table-d2, value-bound, maxnorm, check.
Exit codes: 0 success, 1 assertion/check failure, 2 config error.
"""

from __future__ import annotations

import argparse
import csv as _csv
import math
import sys

import numpy as np

from .geometry import INF, GeometryPair, LpBall, SimplexBall
from .harness import (
    ConfigError,
    TABLE_ROWS,
    fit_rate_exponent,
    maxnorm_experiment,
    parse_config,
    run_experiment,
    table_d2_experiment,
    write_records_csv,
)


def _parse_ball(spec: str, dim: int):
    spec = spec.strip().lower()
    if spec == "simplex":
        return SimplexBall(dim)
    if spec.startswith("lp:"):
        raw = spec.split(":", 1)[1]
        p = INF if raw in ("inf", "infinity") else float(raw)
        return LpBall(p, dim)
    raise ConfigError(f"unknown ball spec {spec!r} (use lp:<p> or simplex)")


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    records = run_experiment(cfg)
    for r in records:
        print(
            f"{r.label} n={r.n} d={r.d} regret={r.measured_regret} bound={r.bound}"
            + (f" value_lower={r.value_lower}" if r.value_lower is not None else "")
        )
    if cfg.output_path:
        print(f"wrote {cfg.output_path}")
    ok = all(
        r.measured_regret is None or r.bound is None or r.measured_regret <= r.bound + 1e-6
        for r in records
    )
    return 0 if ok else 1


def cmd_rate_fit(args) -> int:
    with open(args.csv) as fh:
        rows = [row for row in _csv.reader(fh) if row and not row[0].startswith("#")]
    header = rows[0]
    try:
        n_col = header.index(args.n_col)
    except ValueError:
        raise ConfigError(f"column {args.n_col!r} not in {header}")
    reg_col = None
    for cand in (args.regret_col, "measured_regret", "regret"):
        if cand in header:
            reg_col = header.index(cand)
            break
    if reg_col is None:
        raise ConfigError(f"no regret column among {header}")
    pts = []
    for row in rows[1:]:
        if row[n_col] and row[reg_col]:
            pts.append((float(row[n_col]), float(row[reg_col])))
    slope = fit_rate_exponent(pts)
    print(f"fitted exponent: {slope:.6f} over {len(pts)} points")
    return 0


def cmd_table_d2(args) -> int:
    dims = [int(x) for x in args.dims.split(",")]
    p1 = INF if args.p1 == "inf" else float(args.p1)
    p2 = INF if args.p2 == "inf" else float(args.p2)
    records = table_d2_experiment(p1, p2, dims, args.n, seed=args.seed)
    bad = 0
    for r in records:
        flag = "" if 1.0 / 16 <= r.ratio <= 16.0 else "  <-- outside [1/16, 16]"
        print(f"d={r.d:5d}  d2_hat={r.d2_hat:10.4f}  ratio={r.ratio:8.4f}{flag}")
        bad += 0 if not flag else 1
    if args.out:
        write_records_csv(records, args.out)
        print(f"wrote {args.out}")
    return 1 if bad else 0


def cmd_value_bound(args) -> int:
    from .game_value import value_lower_bound

    w = _parse_ball(args.wball, args.dim)
    x = _parse_ball(args.xball, args.dim)
    pair = GeometryPair(w, x)
    val = value_lower_bound(pair, args.n, budget=args.budget)
    print(f"V_{args.n} lower bound: {val:.10f}")
    return 0


def cmd_maxnorm(args) -> int:
    rec = maxnorm_experiment(args.m, args.n_cols, args.rounds, seed=args.seed)
    ok = rec.measured_regret <= rec.bound + 1e-6
    print(
        f"maxnorm {args.m}x{args.n_cols}: K={rec.extra['K']} q={rec.extra['q']:.4f} "
        f"sup_psi={rec.sup_psi:.4f} (<= 8 log K = {8 * rec.extra['log_K']:.4f})"
    )
    print(
        f"regret={rec.measured_regret:.6f} bound={rec.bound:.6f} "
        f"sqrt((M+N)/n)={rec.extra['sqrt_MN_rate']:.6f}  {'OK' if ok else 'VIOLATION'}"
    )
    return 0 if ok else 1


def _check_lines():
    """Fast end-to-end invariant sweep used by ``mirrorgeo check``."""
    from .costs import class_value_ordering_check
    from .game_value import estimate_cp, value_lower_bound
    from .harness import catalog_pairs, worst_regret
    from .md_engine import run as md_run
    from .prox import bregman_divergence, bregman_project
    from .regularizers import EuclideanHalfSq, psi_conj_grad, psi_grad

    lines = []

    def check(name, ok, detail=""):
        lines.append((name, bool(ok), detail))

    rng = np.random.default_rng(0)

    # geometry sanity
    b = LpBall(2.0, 4)
    v = rng.standard_normal(4)
    check("gauge_homogeneity", abs(b.gauge(3.0 * v) - 3.0 * b.gauge(v)) < 1e-9)
    u = rng.standard_normal(4)
    check("triangle_inequality", b.gauge(u + v) <= b.gauge(u) + b.gauge(v) + 1e-9)

    # regret bound over the catalog at a small horizon
    for pair, reg, label in catalog_pairs(n_hint=256):
        worst, bound = worst_regret(reg, pair, 256, seed=1)
        check(f"md_bound[{label}]", worst <= bound + 1e-6, f"regret={worst:.4f} bound={bound:.4f}")

    # gradient / conjugate consistency on the euclidean kind
    reg = EuclideanHalfSq(dim=5)
    w = rng.standard_normal(5)
    check("conjugate_inversion", np.allclose(psi_conj_grad(reg, psi_grad(reg, w)), w, atol=1e-9))

    # projection pythagoras
    ball = LpBall(2.0, 5)
    y = 3.0 * rng.standard_normal(5)
    proj = bregman_project(reg, ball, y)
    wstar = ball.support_point(rng.standard_normal(5)) * 0.5
    lhs = bregman_divergence(reg, wstar, proj.point)
    rhs = bregman_divergence(reg, wstar, y)
    check("generalized_pythagoras", lhs <= rhs + 1e-9)

    # class ordering + value bound oracles
    pair = GeometryPair(LpBall(2.0, 4), LpBall(2.0, 4))
    reg = EuclideanHalfSq(dim=4)
    reg.sup_over_w = 0.5
    rep = class_value_ordering_check(pair, reg, 64, seed=3)
    check("class_value_ordering", rep["linear_ok"] and rep["abs_ok"])

    d1 = GeometryPair(LpBall(INF, 1), LpBall(INF, 1))
    check("value_n2_exact", abs(value_lower_bound(d1, 2) - 0.5) < 1e-12)
    check("value_n4_exact", abs(value_lower_bound(d1, 4) - 0.375) < 1e-12)

    hil = GeometryPair(LpBall(2.0, 3), LpBall(2.0, 3))
    check("hilbert_mtype", abs(estimate_cp(hil, 2.0, depth_budget=2, restarts=4) - 1.0) < 1e-9)

    # determinism
    tr1 = md_run(reg, pair, __import__("mirrorgeo.costs", fromlist=["RandomVertex"]).RandomVertex(pair.x_ball, 9), 64)
    tr2 = md_run(reg, pair, __import__("mirrorgeo.costs", fromlist=["RandomVertex"]).RandomVertex(pair.x_ball, 9), 64)
    check("determinism", np.array_equal(tr1.cum_regret, tr2.cum_regret))

    return lines


def cmd_check(_args) -> int:
    lines = _check_lines()
    bad = 0
    for name, ok, detail in lines:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f"  {detail}" if detail else ""))
        bad += 0 if ok else 1
    print(f"{len(lines) - bad}/{len(lines)} checks passed")
    return 1 if bad else 0


def build_parser():
    p = argparse.ArgumentParser(prog="mirrorgeo", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", help="run an experiment config (INI)")
    s.add_argument("config")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("rate-fit", help="fit the log-log rate exponent of a results CSV")
    s.add_argument("csv")
    s.add_argument("--n-col", default="n")
    s.add_argument("--regret-col", default="measured_regret")
    s.set_defaults(func=cmd_rate_fit)

    s = sub.add_parser("table-d2", help="D_2 table experiment for an l_p pair")
    s.add_argument("--p1", required=True)
    s.add_argument("--p2", required=True)
    s.add_argument("--dims", default="4,16,64")
    s.add_argument("--n", type=int, default=1024)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_table_d2)

    s = sub.add_parser("value-bound", help="game-value lower bound via sign trees")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--wball", default="lp:inf")
    s.add_argument("--xball", default="lp:inf")
    s.add_argument("--budget", type=int, default=2_000_000)
    s.set_defaults(func=cmd_value_bound)

    s = sub.add_parser("maxnorm", help="max-norm matrix experiment")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--n-cols", type=int, required=True)
    s.add_argument("--rounds", type=int, default=1024)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_maxnorm)

    s = sub.add_parser("check", help="run the fast invariant suite")
    s.set_defaults(func=cmd_check)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
