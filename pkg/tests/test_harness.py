import math
import os

import numpy as np
import pytest

from mirrorgeo.cli import main as cli_main
from mirrorgeo.harness import (
    ConfigError,
    ExperimentConfig,
    ResultRecord,
    TABLE_ROWS,
    catalog_pairs,
    fit_rate_exponent,
    interp_d2_experiment,
    maxnorm_experiment,
    maxnorm_q,
    parse_config,
    rank_one_sign_matrices,
    run_experiment,
    table_d2_experiment,
    table_formula,
    write_records_csv,
    worst_regret,
)
from mirrorgeo.geometry import INF, holder_conjugate


# ---------------------------------------------------------------------------
# rate fitting
# ---------------------------------------------------------------------------


def test_fit_exact_power_law():
    pts = [(n, 3.0 * n ** -0.5) for n in (100, 1000, 10_000, 100_000)]
    assert fit_rate_exponent(pts) == pytest.approx(-0.5, abs=1e-9)


def test_fit_constant_series():
    pts = [(n, 2.0) for n in (10, 100, 1000, 10_000)]
    assert fit_rate_exponent(pts) == pytest.approx(0.0, abs=1e-12)


def test_fit_perturbed_power_law():
    pts = [(n, n ** -0.25 * (1.0 + 0.01 * math.sin(math.log(n)))) for n in
           (128, 256, 512, 1024, 2048, 4096)]
    assert fit_rate_exponent(pts) == pytest.approx(-0.25, abs=0.02)


def test_fit_rejects_bad_input():
    with pytest.raises(ValueError):
        fit_rate_exponent([(10, 1.0), (100, 0.5)])
    with pytest.raises(ValueError):
        fit_rate_exponent([(10, 1.0), (100, -0.5), (1000, 0.1), (10_000, 0.01)])


# ---------------------------------------------------------------------------
# D2 table
# ---------------------------------------------------------------------------


def test_table_formula_rows():
    assert table_formula(2.0, 4.0 / 3.0, 64) == pytest.approx(1.0)  # q2 = 4 > 2
    assert table_formula(1.5, 3.0, 64) == pytest.approx(math.sqrt(2.0))
    assert table_formula(2.0, 5.0, 64) == pytest.approx(64 ** (0.8 - 0.5) * 2.0)
    assert table_formula(4.0, 1.5, 64) == pytest.approx(64 ** 0.25)
    assert table_formula(3.0, 4.0, 64) == pytest.approx(64 ** (3.0 / 4.0 - 1.0 / 3.0))
    assert table_formula(1.0, 1.0, 64) == pytest.approx(math.sqrt(math.log(64)))
    # d = 1 collapses to finite constants in every row
    for _, p1, p2 in TABLE_ROWS:
        assert 0.0 < table_formula(p1, p2, 1) < math.inf


def test_table_experiment_single_row():
    recs = table_d2_experiment(2.0, 4.0 / 3.0, [4, 16], 256, seed=0)
    for r in recs:
        assert 1.0 / 16 <= r.ratio <= 16.0
        assert r.measured_regret <= r.bound + 1e-6


# ---------------------------------------------------------------------------
# max-norm experiment
# ---------------------------------------------------------------------------


def test_rank_one_sign_matrix_count():
    for m, n in ((1, 1), (2, 2), (2, 3)):
        verts = rank_one_sign_matrices(m, n)
        assert len(verts) == 2 ** (m + n - 1)
        assert set(np.unique(verts)) <= {-1.0, 1.0}


def test_maxnorm_q_formula():
    assert maxnorm_q(int(round(math.e ** 2))) == pytest.approx(2.0, abs=0.05)
    assert maxnorm_q(2) == 2.0  # clamped where log K <= 2
    K = 128
    assert maxnorm_q(K) == pytest.approx(math.log(K) / (math.log(K) - 1.0))


def test_maxnorm_scalar_case():
    rec = maxnorm_experiment(1, 1, 64, seed=0)
    assert rec.extra["K"] == 2
    assert rec.measured_regret <= rec.bound + 1e-6
    assert rec.bound == pytest.approx(2.0 * math.sqrt(rec.sup_psi / 64))


def test_maxnorm_2x2():
    rec = maxnorm_experiment(2, 2, 256, seed=0)
    assert rec.measured_regret <= rec.bound + 1e-6
    assert rec.sup_psi <= 8.0 * rec.extra["log_K"]
    assert rec.extra["sup_psi_lp"] <= rec.sup_psi + 1e-9
    with pytest.raises(ValueError):
        maxnorm_experiment(7, 7, 16)


# ---------------------------------------------------------------------------
# interpolation experiment
# ---------------------------------------------------------------------------


def test_interp_d2_type1_bound():
    rep = interp_d2_experiment(d=16, n=256, seed=0)
    assert rep["d2_interp1"] <= rep["bound_interp1"] + 1e-6
    # type-2 ball contains both components, so its d2 can never drop below
    # the larger component (the paper's half-max bound is unattainable)
    assert rep["d2_interp2"] >= max(rep["d2_component_l1"], rep["d2_component_l2"]) - 1e-6


# ---------------------------------------------------------------------------
# config parsing / dispatch
# ---------------------------------------------------------------------------

GOOD_CONFIG = """
[geometry]
w_kind = lp
w_p = 2
x_kind = lp
x_p = 2
dim = 4

[regularizer]
kind = euclidean

[adversary]
kind = sign_greedy

[run]
kind = regret
n_list = 64,128
seed = 3

[output]
path = {path}
"""


def test_parse_and_run_minimal_config(tmp_path):
    out = tmp_path / "res.csv"
    cfg_path = tmp_path / "exp.ini"
    cfg_path.write_text(GOOD_CONFIG.format(path=out))
    cfg = parse_config(str(cfg_path))
    assert cfg.n_list == [64, 128]
    records = run_experiment(cfg)
    assert len(records) == 2
    for r in records:
        assert r.measured_regret <= r.bound + 1e-6
    text = out.read_text()
    assert text.startswith("# mirrorgeo-csv v1\n")


def test_minimal_l2_config_bound_value(tmp_path):
    cfg_path = tmp_path / "exp.ini"
    cfg_path.write_text(
        GOOD_CONFIG.format(path=tmp_path / "o.csv").replace("n_list = 64,128", "n_list = 256")
    )
    records = run_experiment(parse_config(str(cfg_path)))
    assert records[0].measured_regret <= 2.0 * math.sqrt(0.5 / 256) + 1e-9


def test_config_rejects_unknown_key(tmp_path):
    bad = GOOD_CONFIG.format(path="x.csv").replace("w_p = 2", "w_p = 2\nbogus = 1")
    p = tmp_path / "bad.ini"
    p.write_text(bad)
    with pytest.raises(ConfigError):
        parse_config(str(p))


def test_config_rejects_empty_n_list(tmp_path):
    bad = GOOD_CONFIG.format(path="x.csv").replace("n_list = 64,128", "n_list = ")
    p = tmp_path / "bad.ini"
    p.write_text(bad)
    with pytest.raises(ConfigError):
        parse_config(str(p))


def test_csv_byte_determinism(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (out1, out2):
        cfg_path = tmp_path / "exp.ini"
        cfg_path.write_text(
            GOOD_CONFIG.format(path=out).replace("sign_greedy", "random_vertex")
        )
        run_experiment(parse_config(str(cfg_path)))
    assert out1.read_bytes() == out2.read_bytes()


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def test_cli_run_and_rate_fit(tmp_path, capsys):
    out = tmp_path / "res.csv"
    cfg_path = tmp_path / "exp.ini"
    cfg_path.write_text(
        GOOD_CONFIG.format(path=out).replace("n_list = 64,128", "n_list = 64,128,256,512")
    )
    assert cli_main(["run", str(cfg_path)]) == 0
    assert cli_main(["rate-fit", str(out)]) == 0
    captured = capsys.readouterr().out
    assert "fitted exponent" in captured


def test_cli_config_error_exit_code(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[geometry]\nnope = 1\n")
    assert cli_main(["run", str(p)]) == 2
    assert cli_main(["run", str(tmp_path / "missing.ini")]) == 2


def test_cli_table_and_value_and_maxnorm(capsys):
    assert cli_main(["table-d2", "--p1", "2", "--p2", "1.3333333333", "--dims", "4,16", "--n", "128"]) == 0
    assert cli_main(["value-bound", "--n", "4", "--dim", "1"]) == 0
    out = capsys.readouterr().out
    assert "0.375" in out
    assert cli_main(["maxnorm", "--m", "2", "--n-cols", "2", "--rounds", "128"]) == 0
