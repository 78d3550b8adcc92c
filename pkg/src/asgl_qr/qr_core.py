"""Check loss, quantile risk, the adaptive sparse group penalty and their proxes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, GroupStructure


def check_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {tau}")
    return tau


def check_loss(u, tau: float):
    """Quantile check function ``u * (tau - I(u < 0))``, elementwise."""
    u = np.asarray(u, dtype=float)
    out = np.where(u < 0, (tau - 1.0) * u, tau * u)
    return out if out.ndim else float(out)


def qr_risk(beta, d: Dataset, tau: float) -> float:
    """Mean check loss of the residuals ``y - X beta``."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (d.p,):
        raise ValueError(f"beta has shape {beta.shape}, expected ({d.p},)")
    return float(np.mean(check_loss(d.y - d.X @ beta, tau)))


@dataclass(frozen=True)
class PenaltySpec:
    """Parameters of ``alpha*lam*sum w_j|b_j| + (1-alpha)*lam*sum sqrt(p_l) v_l ||b^l||``.

    Special cases: LASSO is ``alpha=1, w=1``; group LASSO ``alpha=0, v=1``;
    SGL ``w=1, v=1``; AL-SGL ``v=1``; unpenalized ``lam=0``.
    """

    lam: float
    alpha: float
    w: np.ndarray
    v: np.ndarray
    groups: GroupStructure

    def __post_init__(self):
        lam, alpha = float(self.lam), float(self.alpha)
        if not (np.isfinite(lam) and lam >= 0):
            raise ValueError(f"lambda must be finite and >= 0, got {lam}")
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
        w = np.array(self.w, dtype=float).ravel()
        v = np.array(self.v, dtype=float).ravel()
        if w.shape != (self.groups.p,):
            raise ValueError(f"w has length {w.size}, expected {self.groups.p}")
        if v.shape != (self.groups.K,):
            raise ValueError(f"v has length {v.size}, expected {self.groups.K}")
        for name, a in (("w", w), ("v", v)):
            if not np.all(np.isfinite(a)) or np.any(a < 0):
                raise ValueError(f"weights {name} must be finite and nonnegative")
        w.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "v", v)

    @classmethod
    def sgl(cls, lam, alpha, groups: GroupStructure) -> "PenaltySpec":
        return cls(lam, alpha, np.ones(groups.p), np.ones(groups.K), groups)

    @classmethod
    def lasso(cls, lam, groups: GroupStructure) -> "PenaltySpec":
        return cls.sgl(lam, 1.0, groups)

    @classmethod
    def group_lasso(cls, lam, groups: GroupStructure) -> "PenaltySpec":
        return cls.sgl(lam, 0.0, groups)

    @property
    def p(self) -> int:
        return self.groups.p

    def with_lambda(self, lam: float) -> "PenaltySpec":
        return PenaltySpec(lam, self.alpha, self.w, self.v, self.groups)

    def l1_thresholds(self) -> np.ndarray:
        return self.alpha * self.lam * self.w

    def group_thresholds(self) -> np.ndarray:
        return (1.0 - self.alpha) * self.lam * np.sqrt(self.groups.sizes) * self.v


def penalty_value(beta, spec: PenaltySpec) -> float:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (spec.p,):
        raise ValueError(f"beta has shape {beta.shape}, expected ({spec.p},)")
    l1 = float(np.sum(spec.l1_thresholds() * np.abs(beta)))
    grp = float(np.sum(spec.group_thresholds() * spec.groups.group_norms(beta)))
    return l1 + grp


def objective(beta, d: Dataset, tau: float, spec: PenaltySpec) -> float:
    return qr_risk(beta, d, tau) + penalty_value(beta, spec)


def prox_check(v, sigma: float, tau: float):
    """Proximal map of ``sigma * check_loss(., tau)``, elementwise.

    >>> prox_check(2.0, 1.0, 0.5)
    1.5
    """
    v = np.asarray(v, dtype=float)
    hi = sigma * tau
    lo = -sigma * (1.0 - tau)
    out = np.where(v > hi, v - hi, np.where(v < lo, v - lo, 0.0))
    return out if out.ndim else float(out)


def soft_threshold(v, thresh):
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


def prox_asgl(v, spec: PenaltySpec, step: float) -> np.ndarray:
    """Proximal map of ``step * penalty``.

    Elementwise soft-thresholding by ``step*alpha*lam*w_j`` followed by block
    shrinkage of each group by ``step*(1-alpha)*lam*sqrt(p_l)*v_l``.
    """
    v = np.asarray(v, dtype=float)
    if spec.lam == 0.0:
        return v.copy()
    u = soft_threshold(v, step * spec.l1_thresholds())
    g = spec.groups
    norms = g.group_norms(u)
    thr = step * spec.group_thresholds()
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norms > thr, 1.0 - thr / norms, 0.0)
    return u * scale[g.group_of]
