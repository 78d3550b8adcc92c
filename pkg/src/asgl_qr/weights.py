"""Adaptive penalty weights from low-dimensional projections or an unpenalized fit.

Every scheme first produces one coefficient-like vector ``b`` of length
``p`` (a back-projected quantile fit or a first loading vector) and then
turns it into weights ``w_j = 1/|b_j|^g1`` and ``v_l = 1/||b^l||^g2``.
The base vector does not depend on the exponents, so a :class:`WeightModel`
computes it once and serves any number of ``(g1, g2)`` pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, GroupStructure
from .qr_core import PenaltySpec, check_tau
from .reduction import choose_components, pca, pls1
from .solver import SolverOptions, fit

KINDS = ("pca_d", "pca_1", "pls_d", "pls_1", "unpenalized")


class ConvergenceError(RuntimeError):
    """An inner quantile fit did not reach the requested KKT tolerance."""


@dataclass(frozen=True)
class WeightScheme:
    kind: str
    gamma1: float = 1.0
    gamma2: float = 1.0
    variance_threshold_pct: float = 80.0
    weight_cap: float = 1e8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown weight scheme {self.kind!r}; expected one of {KINDS}")
        if not (self.gamma1 >= 0 and self.gamma2 >= 0):
            raise ValueError("gamma1 and gamma2 must be >= 0")
        if not 0 < self.variance_threshold_pct <= 100:
            raise ValueError("variance_threshold_pct must lie in (0, 100]")
        if not self.weight_cap > 0:
            raise ValueError("weight_cap must be positive")


def reciprocal_weights(b, groups: GroupStructure, gamma1: float, gamma2: float,
                       cap: float = 1e8) -> tuple[np.ndarray, np.ndarray]:
    """``1/|b_j|^gamma1`` and ``1/||b^l||^gamma2``, each capped at ``cap``.

    A zero exponent gives exact ones, including for zero entries.
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (groups.p,):
        raise ValueError(f"estimate has length {b.size}, expected {groups.p}")
    return _recip(np.abs(b), gamma1, cap), _recip(groups.group_norms(b), gamma2, cap)


def _recip(a, gamma, cap):
    if gamma == 0:
        return np.ones_like(a)
    with np.errstate(divide="ignore", over="ignore"):
        out = 1.0 / a ** gamma
    return np.minimum(out, cap)


def _unpenalized_qr(X, y, tau, opts: SolverOptions | None):
    d = Dataset(X, y)
    spec = PenaltySpec(0.0, 1.0, np.zeros(d.p), np.zeros(1), GroupStructure.single(d.p))
    res = fit(d, tau, spec, opts)
    if not res.converged:
        raise ConvergenceError(
            f"unpenalized quantile fit (p={d.p}) stopped at KKT residual {res.kkt_residual:.3g}"
        )
    return res.beta_hat


def base_estimate(d: Dataset, tau: float, kind: str, threshold_pct: float = 80.0,
                  opts: SolverOptions | None = None) -> np.ndarray:
    """Coefficient-like vector whose reciprocal powers give the weights.

    ``pca_d`` / ``pls_d`` fit an unpenalized quantile regression on the
    first ``d`` component scores ``X @ Q_d`` (``d`` reaching the variance
    threshold) and map the fit back as ``Q_d @ b``.  ``pca_1`` / ``pls_1``
    return the first loading vector.  ``unpenalized`` fits on all of ``X``
    and needs ``n > p``.
    """
    tau = check_tau(tau)
    if kind not in KINDS:
        raise ValueError(f"unknown weight scheme {kind!r}; expected one of {KINDS}")
    if kind == "unpenalized":
        if d.n <= d.p:
            raise ValueError(
                f"unpenalized weights need n > p, got n={d.n} and p={d.p}"
            )
        return _unpenalized_qr(d.X, d.y, tau, opts)
    if kind.startswith("pca"):
        model = pca(d.X)
        basis, explained = model.Q, model.explained
    else:
        model = pls1(d.X, d.y)
        basis, explained = model.T, model.explained_x_variance
    if kind.endswith("_1"):
        return basis[:, 0].copy()
    k = choose_components(explained, threshold_pct)
    Qd = basis[:, :k]
    coef = _unpenalized_qr(d.X @ Qd, d.y, tau, opts)
    return Qd @ coef


class WeightModel:
    """Base estimate for one scheme on one training set, reused across exponents."""

    def __init__(self, d: Dataset, tau: float, groups: GroupStructure, kind: str,
                 threshold_pct: float = 80.0, cap: float = 1e8,
                 opts: SolverOptions | None = None, estimate=None):
        if groups.p != d.p:
            raise ValueError(f"groups cover {groups.p} variables but data has {d.p}")
        self.kind = kind
        self.groups = groups
        self.cap = cap
        if estimate is None:
            estimate = base_estimate(d, tau, kind, threshold_pct, opts)
        self.estimate = np.asarray(estimate, dtype=float)

    def weights(self, gamma1: float, gamma2: float) -> tuple[np.ndarray, np.ndarray]:
        return reciprocal_weights(self.estimate, self.groups, gamma1, gamma2, self.cap)


def compute_weights(d: Dataset, tau: float, groups: GroupStructure, scheme: WeightScheme,
                    opts: SolverOptions | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Weights ``(w, v)`` for any scheme, computed on the training data ``d``."""
    if scheme.kind == "unpenalized" and d.n <= d.p:
        raise ValueError(f"unpenalized weights need n > p, got n={d.n} and p={d.p}")
    if scheme.gamma1 == 0 and scheme.gamma2 == 0:
        return np.ones(d.p), np.ones(groups.K)
    model = WeightModel(d, tau, groups, scheme.kind, scheme.variance_threshold_pct,
                        scheme.weight_cap, opts)
    return model.weights(scheme.gamma1, scheme.gamma2)


def weights_pca_d(d, tau, groups, scheme: WeightScheme, opts=None):
    return compute_weights(d, tau, groups, _as(scheme, "pca_d"), opts)


def weights_pca_1(d, groups, scheme: WeightScheme):
    return compute_weights(d, 0.5, groups, _as(scheme, "pca_1"))


def weights_pls_d(d, tau, groups, scheme: WeightScheme, opts=None):
    return compute_weights(d, tau, groups, _as(scheme, "pls_d"), opts)


def weights_pls_1(d, groups, scheme: WeightScheme):
    return compute_weights(d, 0.5, groups, _as(scheme, "pls_1"))


def weights_unpenalized(d, tau, groups, scheme: WeightScheme, opts=None):
    return compute_weights(d, tau, groups, _as(scheme, "unpenalized"), opts)


def _as(scheme: WeightScheme, kind: str) -> WeightScheme:
    if scheme.kind != kind:
        raise ValueError(f"scheme kind is {scheme.kind!r}, expected {kind!r}")
    return scheme
