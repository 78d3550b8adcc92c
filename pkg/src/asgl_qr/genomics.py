"""Expression-matrix workflow: probe filtering, PCA variable clustering and
selection stability over repeated splits and quantile levels."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import DataError, Dataset, GroupStructure, SplitSpec, split, standardize
from .model_select import GridSearchError, grid_search
from .parallel import parallel_map
from .reduction import pca
from .simulation import ModelConfig
from .solver import SolverOptions

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PreprocessSpec:
    """Filter thresholds.

    With ``log_base`` set the values are taken to be logarithms in that base
    and an ``f``-fold variation means ``max - min >= log_base(f)``; with
    ``log_base=None`` they are raw positive values and it means
    ``max / min >= f``.
    """

    expression_percentile: float = 25.0
    fold_variation_min: float = 2.0
    abs_correlation_min: float = 0.5
    log_base: float | None = 2.0

    def __post_init__(self):
        if not 0 < self.expression_percentile < 100:
            raise ValueError("expression_percentile must lie in (0, 100)")
        if not self.fold_variation_min >= 1:
            raise ValueError("fold_variation_min must be >= 1")
        if not 0 <= self.abs_correlation_min < 1:
            raise ValueError("abs_correlation_min must lie in [0, 1)")
        if self.log_base is not None and not (self.log_base > 0 and self.log_base != 1):
            raise ValueError("log_base must be positive and different from 1")


@dataclass
class PreprocessResult:
    data: Dataset
    kept: np.ndarray
    counts: dict


def _expressed(X, pct):
    cut = np.percentile(X, pct)
    return X.max(axis=0) > cut


def _variable(X, spec: PreprocessSpec):
    hi, lo = X.max(axis=0), X.min(axis=0)
    if spec.log_base is not None:
        return hi - lo >= math.log(spec.fold_variation_min) / math.log(spec.log_base) - 1e-12
    if np.any(lo <= 0):
        j = int(np.flatnonzero(lo <= 0)[0])
        raise DataError(f"raw-scale fold filter needs positive values; column {j} has min {lo[j]}")
    return hi / lo >= spec.fold_variation_min


def abs_correlations(X, y) -> np.ndarray:
    """Absolute Pearson correlation of each column with ``y``; 0 for constant columns."""
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    num = Xc.T @ yc
    den = np.sqrt(np.sum(Xc * Xc, axis=0) * float(yc @ yc))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(den > 0, num / den, 0.0)
    return np.abs(r)


def preprocess(d: Dataset, response_index: int | None = None,
               spec: PreprocessSpec | None = None) -> PreprocessResult:
    """Keep probes that are expressed, variable and correlated with the response.

    ``response_index`` names a column of ``d.X`` holding the response probe;
    it is removed from the covariates.  With ``None``, ``d.y`` is used.
    The expression cut-off is the percentile of every value in the matrix.
    Survivors are standardized (columns to mean 0 / sd 1, response
    centered).  ``kept`` holds original column indices.
    """
    spec = spec or PreprocessSpec()
    X = d.X
    names = d.names()
    if response_index is not None:
        j = int(response_index)
        if not -d.p <= j < d.p:
            raise DataError(f"response column {j} out of range for p={d.p}")
        j %= d.p
        y = X[:, j]
        cols = np.array([k for k in range(d.p) if k != j], dtype=int)
    else:
        y = d.y
        cols = np.arange(d.p)
    keep = _expressed(X, spec.expression_percentile)[cols]
    counts = {"input": int(cols.size), "expressed": int(keep.sum())}
    keep &= _variable(X, spec)[cols]
    counts["variable"] = int(keep.sum())
    cols = cols[keep]
    corr = abs_correlations(X[:, cols], y)
    cols = cols[corr > spec.abs_correlation_min]
    counts["correlated"] = int(cols.size)
    if cols.size == 0:
        raise DataError(f"no variables survive preprocessing (counts: {counts})")
    sub = Dataset(X[:, cols], y, tuple(names[k] for k in cols))
    out, _ = standardize(sub, center_y=True)
    return PreprocessResult(out, cols, counts)


def pca_cluster(X) -> GroupStructure:
    """Group each variable with the principal direction where its loading is largest.

    Candidate groups are the principal directions of the centered matrix
    (its numerical rank, at most ``min(n - 1, p)``); directions that attract
    no variable are dropped and the rest renumbered in component order.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("pca_cluster needs a 2-d matrix with at least 2 rows")
    Q = pca(X).Q
    return GroupStructure.from_labels(np.argmax(np.abs(Q), axis=1))


@dataclass
class StabilityReport:
    models: list[str]
    taus: list[float]
    feature_names: list[str]
    counts: dict            # tau -> (models x p) selection counts
    n_ok: dict              # tau -> per-model successful repetitions
    test_errors: dict       # (tau, model) -> list of E_t
    n_selected: dict        # (tau, model) -> list of support sizes
    failures: list = field(default_factory=list)
    threshold: float = 0.5

    def probabilities(self, tau: float) -> np.ndarray:
        """Selection frequency per model and variable (count / successful repetitions)."""
        c = self.counts[tau]
        n = np.asarray(self.n_ok[tau], dtype=float)[:, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(n > 0, c / np.maximum(n, 1), 0.0)

    def above(self, tau: float, model: str) -> set:
        i = self.models.index(model)
        return set(np.flatnonzero(self.probabilities(tau)[i] > self.threshold).tolist())

    def common(self, model: str) -> set:
        sets = [self.above(t, model) for t in self.taus]
        return set.intersection(*sets) if sets else set()

    def table(self) -> list[dict]:
        rows = []
        for m in self.models:
            row = {"model": m}
            for t in self.taus:
                row[f"tau={t:g}"] = len(self.above(t, m))
            row["all_taus"] = len(self.common(m))
            rows.append(row)
        return rows


def _stability_rep(job):
    d, groups, taus, models, split_spec, seed, opts, zero_tol = job
    train, val, test = split(d, SplitSpec(split_spec.n_train, split_spec.n_val,
                                          split_spec.n_test, seed))
    out = []
    for tau in taus:
        cache: dict = {}
        for m in models:
            try:
                res = grid_search(train, val, tau, groups, m.grid, opts,
                                  test=test if test.n else None, weight_cache=cache)
            except (GridSearchError, ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
                out.append((tau, m.name, None, math.nan, str(e).splitlines()[0]))
                continue
            sel = np.abs(res.beta_hat) > zero_tol
            et = res.test_error if res.test_error is not None else math.nan
            out.append((tau, m.name, sel, et, ""))
    return out


def stability_analysis(d: Dataset, groups: GroupStructure, taus: Sequence[float],
                       models: Sequence[ModelConfig], repetitions: int, split_spec: SplitSpec,
                       base_seed: int = 0, opts: SolverOptions | None = None,
                       workers: int = 1, zero_tol: float = 1e-6,
                       threshold: float = 0.5) -> StabilityReport:
    """Selection frequencies over ``repetitions`` random splits, per quantile level.

    Each repetition draws a split with seed ``base_seed + r`` and runs the
    full grid search of every model at every ``tau``.  Failed searches are
    excluded from that model's denominator and listed in ``failures``.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if groups.p != d.p:
        raise ValueError(f"groups cover {groups.p} variables but data has {d.p}")
    taus = [float(t) for t in taus]
    names = [m.name for m in models]
    counts = {t: np.zeros((len(models), d.p), dtype=int) for t in taus}
    n_ok = {t: [0] * len(models) for t in taus}
    errs = {(t, m): [] for t in taus for m in names}
    nsel = {(t, m): [] for t in taus for m in names}
    failures = []
    jobs = [(d, groups, taus, tuple(models), split_spec, base_seed + r, opts, zero_tol)
            for r in range(repetitions)]
    for r, rows in enumerate(parallel_map(_stability_rep, jobs, workers)):
        for tau, name, sel, et, err in rows:
            if sel is None:
                failures.append({"rep": r, "tau": tau, "model": name, "error": err})
                logger.warning("repetition %d, tau=%g, model %s failed: %s", r, tau, name, err)
                continue
            i = names.index(name)
            counts[tau][i] += sel
            n_ok[tau][i] += 1
            errs[(tau, name)].append(et)
            nsel[(tau, name)].append(int(sel.sum()))
    return StabilityReport(names, taus, d.names(), counts, n_ok, errs, nsel, failures, threshold)


def write_probabilities_csv(path, report: StabilityReport, tau: float) -> None:
    P = report.probabilities(tau)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["model", *report.feature_names])
        for m, row in zip(report.models, P):
            w.writerow([m, *(repr(float(x)) for x in row)])


def write_threshold_table_csv(path, report: StabilityReport) -> None:
    rows = report.table()
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
