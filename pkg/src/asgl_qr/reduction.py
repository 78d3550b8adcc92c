"""PCA and PLS1 decompositions used for adaptive weights and variable clustering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RANK_TOL = 1e-10


def _sign_fix(M: np.ndarray) -> np.ndarray:
    """Sign per column making the largest-magnitude entry positive."""
    if M.size == 0:
        return np.ones(M.shape[1])
    idx = np.argmax(np.abs(M), axis=0)
    s = np.sign(M[idx, np.arange(M.shape[1])])
    s[s == 0] = 1.0
    return s


@dataclass(frozen=True)
class PcaModel:
    """Principal directions ``Q`` (p x r, orthonormal columns) and their variances."""

    Q: np.ndarray
    eigenvalues: np.ndarray
    mean: np.ndarray

    @property
    def r(self) -> int:
        return self.Q.shape[1]

    @property
    def explained(self) -> np.ndarray:
        """Fraction of total variance carried by each component."""
        total = self.eigenvalues.sum()
        if total == 0:
            return np.zeros_like(self.eigenvalues)
        return self.eigenvalues / total

    def scores(self, X, center: bool = True) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return (X - self.mean if center else X) @ self.Q


def pca(X) -> PcaModel:
    """PCA of the column-centered matrix through its thin SVD.

    Component variances are ``s**2 / (n - 1)``; singular values below
    ``1e-10`` times the largest are dropped, so ``r`` is the numerical rank.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if n < 2:
        raise ValueError("PCA needs at least 2 observations")
    mean = X.mean(axis=0)
    Xc = X - mean
    _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    keep = s > RANK_TOL * s[0] if s.size and s[0] > 0 else np.zeros(s.size, bool)
    if not np.any(keep):
        # zero-variance data: keep one arbitrary direction so downstream code has a basis
        keep[:1] = True
    Q = Vt[keep].T
    Q = Q * _sign_fix(Q)
    ev = s[keep] ** 2 / (n - 1)
    return PcaModel(Q, ev, mean)


@dataclass(frozen=True)
class PlsModel:
    """PLS1 model: ``T`` maps centered X to scores (``U = Xc @ T``).

    ``weights`` are the NIPALS weight vectors of the deflated matrices; the
    first column of ``T`` equals the first weight vector, proportional to
    ``Xc^T yc``.
    """

    T: np.ndarray
    weights: np.ndarray
    loadings: np.ndarray
    explained_x_variance: np.ndarray
    x_mean: np.ndarray
    y_mean: float

    @property
    def s(self) -> int:
        return self.T.shape[1]

    def scores(self, X, center: bool = True) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return (X - self.x_mean if center else X) @ self.T


def pls1(X, y, max_components: int | None = None) -> PlsModel:
    """Univariate-response PLS by NIPALS with deflation of ``X``.

    Extraction stops once the remaining covariance ``||X_k^T y||`` drops to
    ``1e-10`` of its initial value, or after ``max_components``
    (default ``min(n - 1, p)``).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, p = X.shape
    if y.shape[0] != n:
        raise ValueError(f"X has {n} rows but y has length {y.shape[0]}")
    limit = min(max(n - 1, 1), p)
    if max_components is None:
        max_components = limit
    if max_components < 1:
        raise ValueError("max_components must be >= 1")
    max_components = min(max_components, limit)
    x_mean, y_mean = X.mean(axis=0), float(y.mean())
    Xk = X - x_mean
    yc = y - y_mean
    total = float(np.sum(Xk * Xk))
    c0 = np.linalg.norm(Xk.T @ yc)
    if not c0 > 0:
        raise ValueError("response has zero covariance with every column of X")
    W, P, frac = [], [], []
    for _ in range(max_components):
        w = Xk.T @ yc
        nw = np.linalg.norm(w)
        if nw <= RANK_TOL * c0:
            break
        w /= nw
        if w[np.argmax(np.abs(w))] < 0:
            w = -w
        t = Xk @ w
        tt = float(t @ t)
        if tt <= 0:
            break
        pl = Xk.T @ t / tt
        Xk = Xk - np.outer(t, pl)
        W.append(w)
        P.append(pl)
        frac.append(min(1.0, tt * float(pl @ pl) / total) if total > 0 else 0.0)
    W = np.array(W).T
    P = np.array(P).T
    T = W @ np.linalg.inv(P.T @ W)
    return PlsModel(T, W, P, np.array(frac), x_mean, y_mean)


def choose_components(explained, threshold_pct: float) -> int:
    """Smallest ``d`` whose cumulative explained percentage reaches the threshold.

    Falls back to all components when their total stays below it.
    """
    e = np.asarray(explained, dtype=float).ravel()
    if e.size == 0:
        raise ValueError("no components to choose from")
    if np.any(e < 0):
        raise ValueError("explained fractions must be nonnegative")
    if not 0 < threshold_pct <= 100:
        raise ValueError(f"threshold must lie in (0, 100], got {threshold_pct}")
    cum = 100.0 * np.cumsum(e)
    hit = np.flatnonzero(cum >= threshold_pct - 1e-9)
    return int(hit[0]) + 1 if hit.size else int(e.size)
