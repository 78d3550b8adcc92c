"""Synthetic grouped regression benchmarks with heavy-tailed noise.

Covariates are standard Gaussian with correlation ``rho_within`` inside a
group and independence across groups; the response is ``X beta + eps``
with Student-t noise.  :func:`run_experiment` repeats data generation,
grid search and scoring for a list of models, each repetition on its own
seed so every model sees identical data.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import Dataset, GroupStructure, SplitSpec, split
from .model_select import (Grid, GridSearchError, asgl_grid, grid_search, lasso_grid,
                           sgl_grid)
from .parallel import parallel_map
from .solver import SolverOptions

logger = logging.getLogger(__name__)

METRICS = ("dist", "Et", "csr", "tpr", "tnr")


@dataclass(frozen=True)
class Scenario:
    name: str
    K: int
    group_size: int
    beta_true: np.ndarray
    rho_within: float = 0.5
    df: float = 3.0
    sizes: SplitSpec = SplitSpec(100, 100, 5000)

    def __post_init__(self):
        b = np.array(self.beta_true, dtype=float).ravel()
        if self.K < 1 or self.group_size < 1:
            raise ValueError("K and group_size must be >= 1")
        if b.size != self.K * self.group_size:
            raise ValueError(f"beta_true has length {b.size}, expected {self.K * self.group_size}")
        if not 0 <= self.rho_within < 1:
            raise ValueError("rho_within must lie in [0, 1)")
        if not self.df > 0:
            raise ValueError("noise degrees of freedom must be positive")
        b.setflags(write=False)
        object.__setattr__(self, "beta_true", b)

    @property
    def p(self) -> int:
        return self.K * self.group_size

    @property
    def groups(self) -> GroupStructure:
        return GroupStructure.contiguous([self.group_size] * self.K)


def _planted(K, gs, n_active, active_len):
    beta = np.zeros((K, gs))
    beta[:n_active, :active_len] = np.arange(1, active_len + 1)
    return beta.ravel()


PRESETS = {
    "sim1_p225": dict(K=15, group_size=15, n_active=7, active_len=8),
    "sim1_p625": dict(K=25, group_size=25, n_active=7, active_len=8),
    "sim2_p225": dict(K=15, group_size=15, n_active=3, active_len=15),
    "sim2_p625": dict(K=25, group_size=25, n_active=3, active_len=25),
    "sim3_sparse": dict(K=10, group_size=10, n_active=5, active_len=6, sizes=(200, 200, 5000)),
    "sim3_dense": dict(K=10, group_size=10, n_active=3, active_len=10, sizes=(200, 200, 5000)),
}


def scenario(name: str, **overrides) -> Scenario:
    """One of the preset scenarios, optionally with fields overridden."""
    if name not in PRESETS:
        raise ValueError(f"unknown scenario {name!r}; expected one of {sorted(PRESETS)} or 'custom'")
    cfg = dict(PRESETS[name])
    sizes = SplitSpec(*cfg.pop("sizes", (100, 100, 5000)))
    beta = _planted(cfg["K"], cfg["group_size"], cfg.pop("n_active"), cfg.pop("active_len"))
    kw = dict(name=name, beta_true=beta, sizes=sizes, **cfg)
    kw.update(overrides)
    return Scenario(**kw)


def custom_scenario(K: int, group_size: int, beta_true, **kw) -> Scenario:
    return Scenario("custom", K, group_size, beta_true, **kw)


def generate(s: Scenario, seed: int) -> tuple[Dataset, np.ndarray]:
    """Draw ``s.sizes.total`` rows; identical seeds give identical data."""
    rng = np.random.default_rng(seed)
    n = s.sizes.total
    C = np.full((s.group_size, s.group_size), s.rho_within)
    np.fill_diagonal(C, 1.0)
    L = np.linalg.cholesky(C)
    X = (rng.standard_normal((n, s.K, s.group_size)) @ L.T).reshape(n, s.p)
    # Student-t as a Gaussian over an independent scaled chi-square
    eps = rng.standard_normal(n) / np.sqrt(rng.chisquare(s.df, n) / s.df)
    y = X @ s.beta_true + eps
    return Dataset(X, y), s.beta_true.copy()


@dataclass(frozen=True)
class MetricsReport:
    dist: float
    Et: float
    csr: float
    tpr: float
    tnr: float

    def as_dict(self) -> dict:
        return {m: getattr(self, m) for m in METRICS}


def metrics(beta_hat, beta_true, Et: float, zero_tol: float = 1e-6) -> MetricsReport:
    """Estimation error and support recovery rates.

    CSR is the fraction of coordinates whose zero/nonzero status is
    recovered.  A rate whose conditioning set is empty is reported as 1.
    """
    bh = np.asarray(beta_hat, dtype=float).ravel()
    bt = np.asarray(beta_true, dtype=float).ravel()
    if bh.shape != bt.shape:
        raise ValueError(f"beta_hat has length {bh.size} but beta_true has {bt.size}")
    sel = np.abs(bh) > zero_tol
    act = bt != 0
    tpr = float(sel[act].mean()) if act.any() else 1.0
    tnr = float((~sel[~act]).mean()) if (~act).any() else 1.0
    csr = float(np.mean(sel == act))
    return MetricsReport(float(np.linalg.norm(bh - bt)), float(Et), csr, tpr, tnr)


@dataclass(frozen=True)
class ModelConfig:
    name: str
    grid: Grid


def model_preset(name: str, **grid_kw) -> ModelConfig:
    """Named model: LASSO, SGL, ASGL-<scheme> or AL-SGL-<scheme> (``v = 1``)."""
    if name == "LASSO":
        grid_kw.pop("alphas", None)
        grid_kw.pop("gamma1s", None)
        grid_kw.pop("gamma2s", None)
        return ModelConfig(name, lasso_grid(**grid_kw))
    if name == "SGL":
        grid_kw.pop("gamma1s", None)
        grid_kw.pop("gamma2s", None)
        return ModelConfig(name, sgl_grid(**grid_kw))
    for prefix, adaptive_groups in (("ASGL-", True), ("AL-SGL-", False)):
        if name.startswith(prefix):
            return ModelConfig(name, asgl_grid(name[len(prefix):], adaptive_groups, **grid_kw))
    raise ValueError(f"unknown model {name!r}")


@dataclass
class ExperimentResult:
    scenario: str
    models: list[str]
    rows: list[dict]
    failures: dict = field(default_factory=dict)

    def summary(self) -> list[dict]:
        """Mean and sd (ddof 1; 0 for a single repetition) per model and metric."""
        out = []
        for m in self.models:
            ok = [r for r in self.rows if r["model"] == m and r["status"] == "ok"]
            row = {"model": m, "n_ok": len(ok), "n_failed": self.failures.get(m, 0)}
            for k in METRICS:
                vals = np.array([r[k] for r in ok], dtype=float)
                row[f"{k}_mean"] = float(np.mean(vals)) if vals.size else math.nan
                row[f"{k}_sd"] = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
            out.append(row)
        return out

    def values(self, model: str, metric: str) -> np.ndarray:
        return np.array([r[metric] for r in self.rows
                         if r["model"] == model and r["status"] == "ok"], dtype=float)


def _one_repetition(job):
    s, models, seed, tau, opts, zero_tol = job
    d, beta_true = generate(s, seed)
    train, val, test = split(d, SplitSpec(s.sizes.n_train, s.sizes.n_val, s.sizes.n_test, seed))
    groups = s.groups
    cache: dict = {}
    rows = []
    for m in models:
        row = {"rep_seed": seed, "model": m.name}
        try:
            res = grid_search(train, val, tau, groups, m.grid, opts, test=test, weight_cache=cache)
        except (GridSearchError, ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
            row.update(status="failed", error=str(e).splitlines()[0])
            row.update({k: math.nan for k in METRICS})
            rows.append(row)
            continue
        rep = metrics(res.beta_hat, beta_true, res.test_error, zero_tol)
        row.update(status="ok", error="", **rep.as_dict())
        row.update({f"best_{k}": v for k, v in res.best_spec.items()})
        row["val_error"] = res.best_val_error
        rows.append(row)
    return rows


def run_experiment(s: Scenario, models: Sequence[ModelConfig], repetitions: int,
                   base_seed: int = 0, tau: float = 0.5, opts: SolverOptions | None = None,
                   workers: int = 1, zero_tol: float = 1e-6) -> ExperimentResult:
    """Repeat generate / grid search / score; repetition ``r`` uses seed ``base_seed + r``."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if not models:
        raise ValueError("no models given")
    names = [m.name for m in models]
    if len(set(names)) != len(names):
        raise ValueError("model names must be unique")
    jobs = [(s, tuple(models), base_seed + r, tau, opts, zero_tol) for r in range(repetitions)]
    rows = []
    for r, rep_rows in enumerate(parallel_map(_one_repetition, jobs, workers)):
        for row in rep_rows:
            row["rep"] = r
            rows.append(row)
    failures = {}
    for row in rows:
        if row["status"] != "ok":
            failures[row["model"]] = failures.get(row["model"], 0) + 1
            logger.warning("repetition %d, model %s failed: %s", row["rep"], row["model"], row["error"])
    return ExperimentResult(s.name, names, rows, failures)


ROW_FIELDS = ["rep", "rep_seed", "model", "status", *METRICS, "val_error", "best_scheme",
              "best_gamma1", "best_gamma2", "best_alpha", "best_lambda", "error"]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_rows_csv(path, result: ExperimentResult) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=ROW_FIELDS, extrasaction="ignore")
        w.writeheader()
        for row in result.rows:
            w.writerow({k: _fmt(row.get(k, "")) for k in ROW_FIELDS})


def write_summary_csv(path, result: ExperimentResult) -> None:
    summary = result.summary()
    fields = ["model", "n_ok", "n_failed"] + [f"{k}_{s}" for k in METRICS for s in ("mean", "sd")]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for row in summary:
            w.writerow({k: _fmt(row[k]) for k in fields})


def boxplot_svg(data: dict, title: str = "", ylabel: str = "E_t") -> str:
    """Standalone SVG box plot, one box per key; the data sit in a leading comment."""
    names = list(data)
    vals = [np.asarray(data[k], dtype=float) for k in names]
    vals = [v[np.isfinite(v)] for v in vals]
    allv = np.concatenate([v for v in vals if v.size] or [np.zeros(1)])
    lo, hi = float(allv.min()), float(allv.max())
    if hi <= lo:
        hi = lo + 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    W, H, left, top, bottom = 80 + 90 * max(len(names), 1), 360, 60, 40, 60
    ph = H - top - bottom

    def ypos(v):
        return top + ph * (hi - v) / (hi - lo)

    lines = ["<!-- data"]
    for k, v in zip(names, vals):
        lines.append(f"{k}: " + ",".join(repr(float(x)) for x in v))
    lines.append("-->")
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">', *lines,
           f'<text x="{W / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
           f'<text x="15" y="{top + ph / 2:.1f}" font-size="12" transform="rotate(-90 15 {top + ph / 2:.1f})">{ylabel}</text>',
           f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>']
    for t in np.linspace(lo, hi, 5):
        out.append(f'<text x="{left - 5}" y="{ypos(t) + 4:.1f}" text-anchor="end" font-size="10">{t:.3g}</text>')
    for i, (k, v) in enumerate(zip(names, vals)):
        cx = left + 45 + 90 * i
        out.append(f'<text x="{cx}" y="{H - bottom + 20}" text-anchor="middle" font-size="10">{k}</text>')
        if not v.size:
            continue
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        iqr = q3 - q1
        wlo = float(v[v >= q1 - 1.5 * iqr].min())
        whi = float(v[v <= q3 + 1.5 * iqr].max())
        out.append(f'<line x1="{cx}" y1="{ypos(whi):.1f}" x2="{cx}" y2="{ypos(wlo):.1f}" stroke="black"/>')
        out.append(f'<rect x="{cx - 20}" y="{ypos(q3):.1f}" width="40" height="{max(ypos(q1) - ypos(q3), 0.5):.1f}" '
                   'fill="#cfe0f3" stroke="black"/>')
        out.append(f'<line x1="{cx - 20}" y1="{ypos(med):.1f}" x2="{cx + 20}" y2="{ypos(med):.1f}" stroke="black" stroke-width="2"/>')
        for x in v[(v < wlo) | (v > whi)]:
            out.append(f'<circle cx="{cx}" cy="{ypos(x):.1f}" r="2.5" fill="none" stroke="black"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_boxplot(path, result: ExperimentResult, metric: str = "Et") -> None:
    data = {m: result.values(m, metric) for m in result.models}
    Path(path).write_text(boxplot_svg(data, f"{result.scenario}: {metric}", metric), encoding="utf-8")
