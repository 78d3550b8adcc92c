"""Command line front end.

Every subcommand reads one YAML/JSON config (``--config``), applies
environment (``ASGLQR_<SECTION>__<KEY>``) and ``--set key=value``
overrides, validates the result against the published schema and writes
its artifacts under ``--out``.  Exit status is 0 on success, 2 for invalid
input and 3 for failures during computation; on error a JSON description
is printed to stderr and written to ``error.json``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError
from .data import DataError, Dataset, GroupStructure, SplitSpec, load_csv, load_groups, split, \
    standardize, write_groups
from .genomics import (PreprocessSpec, pca_cluster, preprocess, stability_analysis,
                       write_probabilities_csv, write_threshold_table_csv)
from .model_select import Grid, GridSearchError, grid_search
from .parallel import default_workers
from .qr_core import PenaltySpec
from .simulation import (custom_scenario, model_preset, run_experiment, scenario, write_boxplot,
                         write_rows_csv, write_summary_csv)
from .solver import SolverOptions, fit, lambda_max
from .weights import WeightScheme, compute_weights

logger = logging.getLogger("asgl_qr")

COMMANDS = ("fit", "grid-search", "simulate", "preprocess", "cluster", "stability")
DEFAULT_MODELS = ["LASSO", "SGL", "ASGL-pca_d", "ASGL-pls_d"]


class RunError(RuntimeError):
    """Failure during computation (exit status 3)."""


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _solver_opts(cfg) -> SolverOptions:
    return SolverOptions(**cfg.get("solver", {}))


def _grid(cfg) -> Grid:
    g = dict(cfg.get("grid", {}))
    for k in ("alphas", "gamma1s", "gamma2s", "schemes", "lambdas"):
        if k in g:
            g[k] = tuple(g[k])
    return Grid(**g)


def _model_grid_kw(cfg) -> dict:
    g = dict(cfg.get("grid", {}))
    g.pop("schemes", None)
    for k in ("alphas", "gamma1s", "gamma2s", "lambdas"):
        if k in g:
            g[k] = tuple(g[k])
    return g


def _load_data(cfg) -> tuple[Dataset, GroupStructure]:
    dc = cfg.get("data")
    if dc is None:
        raise ConfigError("this command needs a 'data' section", field="data")
    path = Path(dc["path"])
    if not path.is_file():
        raise ConfigError(f"data file not found: {path}", field="data.path", path=str(path))
    d = load_csv(path, dc.get("has_header", True), dc.get("response_column", -1))
    if dc.get("standardize", False):
        d, _ = standardize(d)
    if "groups" in dc:
        gpath = Path(dc["groups"])
        if not gpath.is_file():
            raise ConfigError(f"group file not found: {gpath}", field="data.groups", path=str(gpath))
        groups = load_groups(gpath, d)
    elif "group_sizes" in dc:
        if sum(dc["group_sizes"]) != d.p:
            raise ConfigError(f"group_sizes sum to {sum(dc['group_sizes'])}, data has p={d.p}",
                              field="data.group_sizes")
        groups = GroupStructure.contiguous(dc["group_sizes"])
    else:
        groups = GroupStructure(np.arange(d.p))
    return d, groups


def cmd_fit(cfg, out: Path, workers: int) -> None:
    d, groups = _load_data(cfg)
    tau = cfg.get("tau", 0.5)
    pc = cfg.get("penalty", {})
    alpha = pc.get("alpha", 1.0)
    opts = _solver_opts(cfg)
    w, v = np.ones(d.p), np.ones(groups.K)
    wc = pc.get("weights")
    if wc and wc.get("scheme", "none") != "none":
        scheme = WeightScheme(wc["scheme"], wc.get("gamma1", 1.0), wc.get("gamma2", 1.0),
                              wc.get("variance_threshold_pct", 80.0), wc.get("weight_cap", 1e8))
        w, v = compute_weights(d, tau, groups, scheme, opts)
    if "lambda" in pc:
        lam = pc["lambda"]
    elif "lambda_ratio" in pc:
        lam = pc["lambda_ratio"] * lambda_max(d, tau, groups, alpha, w, v)
    else:
        raise ConfigError("penalty needs 'lambda' or 'lambda_ratio'", field="penalty")
    res = fit(d, tau, PenaltySpec(lam, alpha, w, v, groups), opts, cfg.get("intercept", False))
    names = d.names()
    _dump(out / "fit.json", {
        "beta_hat": (res.beta_hat + 0.0).tolist(), "intercept": res.intercept,
        "objective": res.objective, "kkt_residual": res.kkt_residual,
        "iterations": res.iterations, "converged": res.converged,
        "tau": tau, "lambda": float(lam), "alpha": float(alpha), "feature_names": names,
    })
    with (out / "coefficients.csv").open("w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["feature", "coefficient"])
        if cfg.get("intercept", False):
            wr.writerow(["(intercept)", repr(res.intercept)])
        for nm, b in zip(names, res.beta_hat + 0.0):
            wr.writerow([nm, repr(float(b))])


def cmd_grid_search(cfg, out: Path, workers: int) -> None:
    d, groups = _load_data(cfg)
    tau = cfg.get("tau", 0.5)
    sc = cfg.get("split")
    if sc is None:
        raise ConfigError("grid-search needs a 'split' section", field="split")
    seed = cfg.get("seed", 0)
    train, val, test = split(d, SplitSpec(sc["n_train"], sc["n_val"], sc["n_test"], seed))
    grid = _grid(cfg)
    try:
        res = grid_search(train, val, tau, groups, grid, _solver_opts(cfg),
                          test=test if test.n else None, intercept=cfg.get("intercept", False),
                          workers=workers)
    except GridSearchError as e:
        _dump(out / "diagnostics.json", {"failures": e.diagnostics})
        raise RunError(str(e)) from None
    best = dict(res.best_spec)
    best.update(val_error=res.best_val_error, test_error=res.test_error,
                beta_hat=(res.beta_hat + 0.0).tolist(), intercept=res.intercept, n_fits=len(res.table),
                n_failed=len(res.failures), feature_names=d.names())
    _dump(out / "best.json", best)
    fields = ["scheme", "gamma1", "gamma2", "alpha", "lam", "val_error", "converged",
              "kkt_residual", "iterations", "nonzeros"]
    with (out / "grid.csv").open("w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(fields)
        for pt in res.table:
            wr.writerow([repr(getattr(pt, f)) if isinstance(getattr(pt, f), float) else getattr(pt, f)
                         for f in fields])


def cmd_simulate(cfg, out: Path, workers: int) -> None:
    sc = cfg.get("simulate")
    if sc is None:
        raise ConfigError("simulate needs a 'simulate' section", field="simulate")
    over = {}
    if "rho_within" in sc:
        over["rho_within"] = sc["rho_within"]
    if "df" in sc:
        over["df"] = sc["df"]
    if "sizes" in sc:
        s = sc["sizes"]
        over["sizes"] = SplitSpec(s["n_train"], s["n_val"], s["n_test"])
    if sc["scenario"] == "custom":
        missing = [k for k in ("K", "group_size", "beta_true") if k not in sc]
        if missing:
            raise ConfigError(f"custom scenario needs {missing}", field="simulate")
        try:
            s = custom_scenario(sc["K"], sc["group_size"], sc["beta_true"], **over)
        except ValueError as e:
            raise ConfigError(str(e), field="simulate") from None
    else:
        s = scenario(sc["scenario"], **over)
    gkw = _model_grid_kw(cfg)
    models = [model_preset(m, **dict(gkw)) for m in sc.get("models", DEFAULT_MODELS)]
    res = run_experiment(s, models, sc["repetitions"], cfg.get("seed", 0), cfg.get("tau", 0.5),
                         _solver_opts(cfg), workers, sc.get("zero_tol", 1e-6))
    write_rows_csv(out / "repetitions.csv", res)
    write_summary_csv(out / "summary.csv", res)
    if sc.get("boxplot", True):
        write_boxplot(out / "boxplot_Et.svg", res)
    if res.failures and all(res.failures.get(m.name, 0) == sc["repetitions"] for m in models):
        raise RunError("every repetition failed for every model")


def cmd_preprocess(cfg, out: Path, workers: int) -> None:
    d, _ = _load_data(cfg)
    pc = dict(cfg.get("preprocess", {}))
    ridx = pc.pop("response_index", None)
    res = preprocess(d, ridx, PreprocessSpec(**pc))
    names = res.data.names()
    with (out / "processed.csv").open("w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow([*names, "response"])
        for row, yv in zip(res.data.X, res.data.y):
            wr.writerow([*(repr(float(x)) for x in row), repr(float(yv))])
    with (out / "kept.csv").open("w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["index", "feature"])
        for j, nm in zip(res.kept, names):
            wr.writerow([int(j), nm])
    _dump(out / "preprocess.json", {"counts": res.counts})


def cmd_cluster(cfg, out: Path, workers: int) -> None:
    d, _ = _load_data(cfg)
    groups = pca_cluster(d.X)
    write_groups(out / "groups.csv", groups, d.names())
    _dump(out / "cluster.json", {"n_groups": groups.K, "sizes": groups.sizes.tolist()})


def cmd_stability(cfg, out: Path, workers: int) -> None:
    d, groups = _load_data(cfg)
    sc = cfg["stability"] if "stability" in cfg else None
    if sc is None:
        raise ConfigError("stability needs a 'stability' section", field="stability")
    if sc.get("cluster", False):
        groups = pca_cluster(d.X)
    s = sc["split"]
    gkw = _model_grid_kw(cfg)
    models = [model_preset(m, **dict(gkw)) for m in sc.get("models", DEFAULT_MODELS)]
    taus = sc.get("taus", [cfg.get("tau", 0.5)])
    rep = stability_analysis(d, groups, taus, models, sc["repetitions"],
                             SplitSpec(s["n_train"], s["n_val"], s["n_test"]), cfg.get("seed", 0),
                             _solver_opts(cfg), workers, sc.get("zero_tol", 1e-6),
                             sc.get("threshold", 0.5))
    for t in rep.taus:
        write_probabilities_csv(out / f"probabilities_tau{t:g}.csv", rep, t)
    write_threshold_table_csv(out / "threshold_table.csv", rep)
    summary = {"failures": rep.failures, "test_error_mean": {}, "n_selected_mean": {}}
    for (t, m), v in rep.test_errors.items():
        summary["test_error_mean"][f"{m}@tau={t:g}"] = float(np.mean(v)) if v else None
    for (t, m), v in rep.n_selected.items():
        summary["n_selected_mean"][f"{m}@tau={t:g}"] = float(np.mean(v)) if v else None
    _dump(out / "stability.json", summary)


HANDLERS = {"fit": cmd_fit, "grid-search": cmd_grid_search, "simulate": cmd_simulate,
            "preprocess": cmd_preprocess, "cluster": cmd_cluster, "stability": cmd_stability}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="asgl-qr", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="YAML or JSON configuration file")
    ap.add_argument("--out", help="output directory (overrides config 'out')")
    ap.add_argument("--seed", type=int, help="master seed (overrides config 'seed')")
    ap.add_argument("--threads", type=int, help="worker processes (default: available cores)")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config entry by dotted key; repeatable")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _error(out: Path | None, code: int, msg: str, field=None, path=None) -> int:
    err = {"status": "error", "exit_code": code, "kind": "validation" if code == 2 else "runtime",
           "message": msg, "field": field, "path": path}
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            _dump(out / "error.json", err)
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out) if args.out else None
    try:
        sets = list(args.set)
        if args.seed is not None:
            sets.append(f"seed={args.seed}")
        if args.threads is not None:
            sets.append(f"threads={args.threads}")
        if args.out is not None:
            sets.append(f"out={json.dumps(args.out)}")
        cfg = cfgmod.build(args.config, sets)
        out = Path(cfg.get("out", "results"))
        cfgmod.validate(cfg)
        out.mkdir(parents=True, exist_ok=True)
        workers = cfg.get("threads") or default_workers()
        HANDLERS[args.command](cfg, out, workers)
    except ConfigError as e:
        return _error(out, 2, str(e), e.field, e.path)
    except FileNotFoundError as e:
        return _error(out, 2, str(e), None, getattr(e, "filename", None) or str(e).split(": ")[-1])
    except (DataError, ValueError) as e:
        return _error(out, 2, str(e))
    except (RunError, RuntimeError, ArithmeticError, np.linalg.LinAlgError, OSError) as e:
        return _error(out, 3, f"{type(e).__name__}: {e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
