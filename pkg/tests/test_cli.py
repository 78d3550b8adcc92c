import csv
import json

import jsonschema
import numpy as np
import pytest
import yaml

from asgl_qr import config
from asgl_qr.cli import main
from asgl_qr.data import load_csv
from asgl_qr.genomics import pca_cluster


def _csv(path, X, y):
    names = [f"x{j}" for j in range(X.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["y"])
        for row, v in zip(X, y):
            w.writerow([repr(float(a)) for a in row] + [repr(float(v))])


@pytest.fixture
def data_dir(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((60, 6))
    y = 2 * X[:, 0] - X[:, 3] + rng.standard_normal(60)
    _csv(tmp_path / "d.csv", X, y)
    (tmp_path / "g.csv").write_text("feature,group\nx0,1\nx1,1\nx2,2\nx3,2\nx4,3\nx5,3\n")
    return tmp_path


def _config(path, cfg):
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


def _check_schema(out, name):
    jsonschema.validate(json.loads((out / name).read_text()), config.OUTPUT_SCHEMAS[name])


def test_fit_minimal(data_dir):
    cfg = _config(data_dir / "c.yaml", {"data": {"path": str(data_dir / "d.csv"),
                                                 "groups": str(data_dir / "g.csv")},
                                        "penalty": {"lambda": 0.05, "alpha": 0.5}})
    out = data_dir / "out"
    assert main(["fit", "--config", cfg, "--out", str(out)]) == 0
    res = json.loads((out / "fit.json").read_text())
    assert res["converged"] is True and res["kkt_residual"] <= 1e-5
    _check_schema(out, "fit.json")
    rows = list(csv.reader((out / "coefficients.csv").open()))
    assert rows[0] == ["feature", "coefficient"] and len(rows) == 7


def test_fit_weighted_lambda_ratio_and_intercept(data_dir):
    cfg = _config(data_dir / "c.yaml", {"data": {"path": str(data_dir / "d.csv"), "group_sizes": [3, 3]},
                                        "intercept": True,
                                        "penalty": {"lambda_ratio": 0.1, "alpha": 0.7,
                                                    "weights": {"scheme": "pls_d", "gamma1": 1}}})
    out = data_dir / "out"
    assert main(["fit", "--config", cfg, "--out", str(out)]) == 0
    _check_schema(out, "fit.json")
    assert "(intercept)" in (out / "coefficients.csv").read_text()


def test_missing_data_file(data_dir, capsys):
    cfg = _config(data_dir / "c.yaml", {"data": {"path": str(data_dir / "missing.csv")},
                                        "penalty": {"lambda": 0.1}})
    out = data_dir / "out"
    assert main(["fit", "--config", cfg, "--out", str(out)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["path"].endswith("missing.csv") and err["exit_code"] == 2
    _check_schema(out, "error.json")


def test_schema_violation_names_field(data_dir, capsys):
    cfg = _config(data_dir / "c.yaml", {"data": {"path": str(data_dir / "d.csv")},
                                        "penalty": {"lambda": 0.1, "alpha": 1.5}})
    assert main(["fit", "--config", cfg, "--out", str(data_dir / "o")]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["field"] == "penalty.alpha" and err["kind"] == "validation"


def test_unknown_key_rejected(data_dir, capsys):
    cfg = _config(data_dir / "c.yaml", {"data": {"path": str(data_dir / "d.csv")}, "bogus": 1})
    assert main(["fit", "--config", cfg, "--out", str(data_dir / "o")]) == 2
    assert "bogus" in json.loads(capsys.readouterr().err)["message"]


def test_set_and_env_overrides(monkeypatch):
    monkeypatch.setenv("ASGLQR_SOLVER__TOL_KKT", "1e-6")
    monkeypatch.setenv("ASGLQR_TAU", "0.3")
    cfg = config.build(None, ["tau=0.7", "grid.alphas=[0.5, 1.0]"])
    assert cfg["tau"] == 0.7
    assert cfg["solver"]["tol_kkt"] == 1e-6
    assert cfg["grid"]["alphas"] == [0.5, 1.0]
    with pytest.raises(config.ConfigError):
        config.build(None, ["novalue"])


def test_runtime_failure_exit_3(data_dir, capsys):
    cfg = _config(data_dir / "c.yaml", {
        "data": {"path": str(data_dir / "d.csv")},
        "split": {"n_train": 30, "n_val": 20, "n_test": 10},
        "solver": {"max_iter": 1, "tol_kkt": 1e-14, "check_every": 1},
        "grid": {"alphas": [0.5], "lambdas": [0.01]}})
    out = data_dir / "o"
    assert main(["grid-search", "--config", cfg, "--out", str(out)]) == 3
    _check_schema(out, "error.json")
    assert json.loads((out / "error.json").read_text())["kind"] == "runtime"


def test_grid_search_single_combo(data_dir):
    cfg = _config(data_dir / "c.yaml", {
        "data": {"path": str(data_dir / "d.csv"), "groups": str(data_dir / "g.csv")},
        "split": {"n_train": 30, "n_val": 20, "n_test": 10},
        "grid": {"alphas": [0.4], "schemes": ["pca_d"], "gamma1s": [1.5], "gamma2s": [0.5],
                 "lambdas": [0.03]}})
    out = data_dir / "o"
    assert main(["grid-search", "--config", cfg, "--out", str(out), "--seed", "4"]) == 0
    best = json.loads((out / "best.json").read_text())
    assert (best["scheme"], best["gamma1"], best["gamma2"], best["alpha"], best["lambda"]) == (
        "pca_d", 1.5, 0.5, 0.4, 0.03)
    _check_schema(out, "best.json")
    assert len((out / "grid.csv").read_text().splitlines()) == 2


def test_simulate_summary_and_determinism(tmp_path):
    base = {"simulate": {"scenario": "sim1_p225", "repetitions": 2, "models": ["LASSO", "ASGL-pls_d"],
                         "sizes": {"n_train": 60, "n_val": 40, "n_test": 200}},
            "grid": {"alphas": [0.5, 1.0], "gamma1s": [1.0], "gamma2s": [1.0], "n_lambda": 4}}
    cfg = _config(tmp_path / "c.yaml", base)
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert main(["simulate", "--config", cfg, "--out", str(out), "--seed", "11"]) == 0
        outs.append(out)
    for f in ("repetitions.csv", "summary.csv", "boxplot_Et.svg"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
    rows = list(csv.DictReader((outs[0] / "summary.csv").open()))
    assert [r["model"] for r in rows] == ["LASSO", "ASGL-pls_d"]
    for k in ("dist", "Et", "csr", "tpr", "tnr"):
        assert f"{k}_mean" in rows[0] and f"{k}_sd" in rows[0]


def test_simulate_zero_reps(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path / "o"), "--set", "simulate.scenario=sim1_p225",
                 "--set", "simulate.repetitions=0"]) == 2
    assert json.loads(capsys.readouterr().err)["field"] == "simulate.repetitions"


def test_cluster_passthrough(tmp_path):
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal(40), rng.standard_normal(40)
    X = np.column_stack([a, a, a, 3 * b, 3 * b])
    _csv(tmp_path / "d.csv", X, rng.standard_normal(40))
    cfg = _config(tmp_path / "c.yaml", {"data": {"path": str(tmp_path / "d.csv")}})
    out = tmp_path / "o"
    assert main(["cluster", "--config", cfg, "--out", str(out)]) == 0
    rows = list(csv.reader((out / "groups.csv").open()))[1:]
    expected = pca_cluster(load_csv(tmp_path / "d.csv").X).group_of + 1
    assert [int(r[1]) for r in rows] == expected.tolist()
    _check_schema(out, "cluster.json")


def test_preprocess_and_stability(tmp_path):
    rng = np.random.default_rng(2)
    y = rng.standard_normal(60)
    Z = rng.standard_normal((60, 20))
    Z[:, :5] = 0.8 * y[:, None] + 0.6 * Z[:, :5]
    _csv(tmp_path / "d.csv", 8 + 2 * Z, y)
    cfg = _config(tmp_path / "c.yaml", {
        "data": {"path": str(tmp_path / "d.csv")},
        "preprocess": {"abs_correlation_min": 0.5}})
    out = tmp_path / "o"
    assert main(["preprocess", "--config", cfg, "--out", str(out)]) == 0
    _check_schema(out, "preprocess.json")
    kept = [int(r[0]) for r in list(csv.reader((out / "kept.csv").open()))[1:]]
    assert kept == [0, 1, 2, 3, 4]
    cfg2 = _config(tmp_path / "s.yaml", {
        "data": {"path": str(out / "processed.csv"), "response_column": "response"},
        "grid": {"n_lambda": 3},
        "stability": {"taus": [0.5], "models": ["LASSO"], "repetitions": 1, "cluster": True,
                      "split": {"n_train": 30, "n_val": 20, "n_test": 10}}})
    out2 = tmp_path / "s"
    assert main(["stability", "--config", cfg2, "--out", str(out2)]) == 0
    rows = list(csv.reader((out2 / "probabilities_tau0.5.csv").open()))[1:]
    assert {float(x) for x in rows[0][1:]} <= {0.0, 1.0}
    _check_schema(out2, "stability.json")
    assert (out2 / "threshold_table.csv").exists()


def test_config_file_errors(tmp_path):
    with pytest.raises(config.ConfigError):
        config.load_file(tmp_path / "none.yaml")
    (tmp_path / "bad.yaml").write_text("a: [1,\n")
    with pytest.raises(config.ConfigError):
        config.load_file(tmp_path / "bad.yaml")
    (tmp_path / "list.json").write_text("[1, 2]")
    with pytest.raises(config.ConfigError):
        config.load_file(tmp_path / "list.json")
