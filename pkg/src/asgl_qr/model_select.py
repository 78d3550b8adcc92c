"""Validation-set grid search over (scheme, gamma1, gamma2, alpha, lambda)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .data import Dataset, GroupStructure
from .parallel import parallel_map
from .qr_core import PenaltySpec, check_loss, check_tau
from .solver import FitResult, SolverOptions, fit, lambda_max
from .weights import KINDS, WeightModel

logger = logging.getLogger(__name__)

DEFAULT_ALPHAS = tuple(round(0.05 + 0.1 * k, 2) for k in range(10))
DEFAULT_GAMMAS = (0.0, 0.5, 1.0, 1.5, 2.0)
NO_WEIGHTS = "none"


class GridSearchError(RuntimeError):
    """Every fit in the grid failed; ``diagnostics`` holds one entry per fit."""

    def __init__(self, msg, diagnostics):
        super().__init__(msg)
        self.diagnostics = diagnostics


def quantile_error(beta, d: Dataset, tau: float, intercept: float = 0.0) -> float:
    """Mean check loss of ``y - X beta - intercept`` over ``d``."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (d.p,):
        raise ValueError(f"beta has shape {beta.shape}, expected ({d.p},)")
    return float(np.mean(check_loss(d.y - d.X @ beta - intercept, tau)))


@dataclass(frozen=True)
class Grid:
    """Hyperparameter grid.

    ``schemes`` lists weight schemes; ``"none"`` means unit weights (LASSO /
    SGL), for which the gammas are irrelevant and collapse to one point.
    With ``lambdas=None`` each (weights, alpha) pair gets ``n_lambda``
    log-spaced values from its own ``lambda_max`` down to
    ``lambda_min_ratio * lambda_max``.
    """

    alphas: tuple = DEFAULT_ALPHAS
    gamma1s: tuple = DEFAULT_GAMMAS
    gamma2s: tuple = DEFAULT_GAMMAS
    schemes: tuple = (NO_WEIGHTS,)
    lambdas: tuple | None = None
    n_lambda: int = 20
    lambda_min_ratio: float = 1e-3
    variance_threshold_pct: float = 80.0
    weight_cap: float = 1e8

    def __post_init__(self):
        for name in ("alphas", "gamma1s", "gamma2s", "schemes"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise ValueError(f"grid {name} must be nonempty")
            object.__setattr__(self, name, vals)
        if any(not 0 <= a <= 1 for a in self.alphas):
            raise ValueError("alphas must lie in [0, 1]")
        if any(g < 0 for g in self.gamma1s + self.gamma2s):
            raise ValueError("gammas must be >= 0")
        for s in self.schemes:
            if s != NO_WEIGHTS and s not in KINDS:
                raise ValueError(f"unknown weight scheme {s!r}")
        if self.lambdas is not None:
            lams = tuple(sorted((float(x) for x in self.lambdas), reverse=True))
            if not lams or lams[-1] <= 0:
                raise ValueError("lambdas must be a nonempty list of positive values")
            object.__setattr__(self, "lambdas", lams)
        if self.n_lambda < 1:
            raise ValueError("n_lambda must be >= 1")
        if not 0 < self.lambda_min_ratio <= 1:
            raise ValueError("lambda_min_ratio must lie in (0, 1]")

    def weight_points(self):
        """(scheme, gamma1, gamma2) triples in evaluation order."""
        out = []
        for s in self.schemes:
            if s == NO_WEIGHTS:
                out.append((s, 0.0, 0.0))
            else:
                out.extend((s, float(a), float(b)) for a in self.gamma1s for b in self.gamma2s)
        return out

    def size(self) -> int:
        nl = len(self.lambdas) if self.lambdas is not None else self.n_lambda
        return len(self.weight_points()) * len(self.alphas) * nl


def lasso_grid(**kw) -> Grid:
    return Grid(alphas=(1.0,), schemes=(NO_WEIGHTS,), **kw)


def sgl_grid(**kw) -> Grid:
    return Grid(schemes=(NO_WEIGHTS,), **kw)


def asgl_grid(scheme: str, adaptive_groups: bool = True, **kw) -> Grid:
    """ASGL grid; ``adaptive_groups=False`` fixes ``v = 1`` (the AL-SGL variant)."""
    if not adaptive_groups:
        kw["gamma2s"] = (0.0,)
    return Grid(schemes=(scheme,), **kw)


@dataclass(frozen=True)
class GridPoint:
    scheme: str
    gamma1: float
    gamma2: float
    alpha: float
    lam: float
    val_error: float
    converged: bool
    kkt_residual: float
    iterations: int
    nonzeros: int

    def key(self):
        """Sort key realizing the tie rule: lower error, then larger lambda,
        larger alpha, smaller gamma1, smaller gamma2, then scheme name."""
        return (self.val_error, -self.lam, -self.alpha, self.gamma1, self.gamma2, self.scheme)


@dataclass
class GridSearchResult:
    best: GridPoint
    best_val_error: float
    beta_hat: np.ndarray
    intercept: float
    table: list[GridPoint]
    failures: list[str] = field(default_factory=list)
    test_error: float | None = None

    @property
    def best_spec(self) -> dict:
        b = self.best
        return {"scheme": b.scheme, "gamma1": b.gamma1, "gamma2": b.gamma2,
                "alpha": b.alpha, "lambda": b.lam}


def _lambdas_for(train, tau, groups, grid: Grid, alpha, w, v):
    if grid.lambdas is not None:
        return grid.lambdas
    lm = lambda_max(train, tau, groups, alpha, w, v)
    if not np.isfinite(lm):
        raise ValueError("lambda_max is infinite (a zero weight on an active coordinate); "
                         "give explicit lambdas")
    if lm <= 0:
        lm = 1.0
    return tuple(lm * np.logspace(0.0, np.log10(grid.lambda_min_ratio), grid.n_lambda))


def _run_path(job):
    """Fit one decreasing lambda path and score every point on the validation set."""
    train, val, tau, groups, grid, opts, intercept, scheme, g1, g2, alpha, w, v = job
    lams = _lambdas_for(train, tau, groups, grid, alpha, w, v)
    points, fits = [], []
    warm = opts.beta0
    for lam in lams:
        spec = PenaltySpec(lam, alpha, w, v, groups)
        res = fit(train, tau, spec, replace(opts, beta0=warm), intercept)
        warm = res.beta_hat if not intercept else np.concatenate([[res.intercept], res.beta_hat])
        ev = quantile_error(res.beta_hat, val, tau, res.intercept)
        points.append(GridPoint(scheme, g1, g2, float(alpha), float(lam), ev, res.converged,
                                res.kkt_residual, res.iterations, int(np.count_nonzero(res.beta_hat))))
        fits.append(res)
    return points, fits


def grid_search(train: Dataset, val: Dataset, tau: float, groups: GroupStructure, grid: Grid,
                opts: SolverOptions | None = None, test: Dataset | None = None,
                intercept: bool = False, workers: int = 1,
                weight_cache: dict | None = None) -> GridSearchResult:
    """Select hyperparameters by validation quantile error.

    Weights are estimated on ``train`` once per scheme.  Each
    (scheme, gamma1, gamma2, alpha) path is fitted on ``train`` along
    decreasing lambda with warm starts.  Only converged fits compete.
    When ``test`` is given the selected model's test error is reported.

    ``weight_cache`` may be shared between calls on the same training set
    (keyed by scheme) to avoid recomputing base estimates.
    """
    tau = check_tau(tau)
    opts = opts or SolverOptions()
    if groups.p != train.p or val.p != train.p:
        raise ValueError("train, validation and groups must have the same p")
    if val.n < 1:
        raise ValueError("validation set is empty")
    cache = weight_cache if weight_cache is not None else {}
    failures = []
    jobs = []
    for scheme, g1, g2 in grid.weight_points():
        if scheme == NO_WEIGHTS or (g1 == 0 and g2 == 0):
            w, v = np.ones(train.p), np.ones(groups.K)
        else:
            if scheme not in cache:
                try:
                    cache[scheme] = WeightModel(train, tau, groups, scheme,
                                                grid.variance_threshold_pct, grid.weight_cap, opts)
                except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as e:
                    cache[scheme] = e
            model = cache[scheme]
            if isinstance(model, Exception):
                failures.append(f"{scheme} gamma1={g1} gamma2={g2}: weights failed: {model}")
                continue
            w, v = model.weights(g1, g2)
        for alpha in grid.alphas:
            jobs.append((train, val, tau, groups, grid, opts, intercept, scheme, g1, g2,
                         float(alpha), w, v))

    table, best = [], None
    for points, fits in parallel_map(_run_path, jobs, workers):
        for pt, res in zip(points, fits):
            table.append(pt)
            if not pt.converged:
                failures.append(f"{pt.scheme} gamma1={pt.gamma1} gamma2={pt.gamma2} "
                                f"alpha={pt.alpha} lambda={pt.lam:.6g}: "
                                f"not converged (KKT {pt.kkt_residual:.3g})")
                continue
            if best is None or pt.key() < best[0].key():
                best = (pt, res)
    if best is None:
        raise GridSearchError(f"none of the {len(table) or len(failures)} grid fits converged",
                              failures)
    pt, res = best
    out = GridSearchResult(pt, pt.val_error, res.beta_hat, res.intercept, table, failures)
    if test is not None:
        out.test_error = quantile_error(res.beta_hat, test, tau, res.intercept)
    logger.debug("grid search: best %s with E_v=%.6g", out.best_spec, out.best_val_error)
    return out


def refit_best(train: Dataset, tau: float, groups: GroupStructure, grid: Grid,
               result: GridSearchResult, opts: SolverOptions | None = None,
               intercept: bool = False, weight_cache: dict | None = None) -> FitResult:
    """Recompute the selected model by replaying its lambda path from scratch."""
    opts = opts or SolverOptions()
    b = result.best
    if b.scheme == NO_WEIGHTS or (b.gamma1 == 0 and b.gamma2 == 0):
        w, v = np.ones(train.p), np.ones(groups.K)
    else:
        cache = weight_cache if weight_cache is not None else {}
        model = cache.get(b.scheme)
        if model is None:
            model = WeightModel(train, tau, groups, b.scheme, grid.variance_threshold_pct,
                                grid.weight_cap, opts)
        w, v = model.weights(b.gamma1, b.gamma2)
    warm = opts.beta0
    for lam in _lambdas_for(train, tau, groups, grid, b.alpha, w, v):
        res = fit(train, tau, PenaltySpec(lam, b.alpha, w, v, groups), replace(opts, beta0=warm),
                  intercept)
        warm = res.beta_hat if not intercept else np.concatenate([[res.intercept], res.beta_hat])
        if lam == b.lam:
            return res
    raise ValueError(f"lambda {b.lam} is not on the grid")


def combine(results: Sequence[GridSearchResult]) -> GridSearchResult:
    """Best of several searches on the same data, under the same tie rule."""
    if not results:
        raise ValueError("nothing to combine")
    best = min(results, key=lambda r: r.best.key())
    table = [p for r in results for p in r.table]
    failures = [f for r in results for f in r.failures]
    return GridSearchResult(best.best, best.best_val_error, best.beta_hat, best.intercept,
                            table, failures, best.test_error)
