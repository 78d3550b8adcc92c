"""Datasets, group structures, standardization and train/validate/test splits."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Invalid input data (parse failures, non-finite cells, bad shapes)."""


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Dataset:
    """Covariates ``X`` (n x p), response ``y`` (n) and optional feature names.

    Arrays are copied and made read-only so a dataset can be shared between
    workers.  ``n`` may be 0 (an empty part of a split).
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2:
            raise DataError(f"X must be 2-dimensional, got shape {X.shape}")
        if y.ndim != 1:
            raise DataError(f"y must be 1-dimensional, got shape {y.shape}")
        n, p = X.shape
        if p < 1:
            raise DataError(f"need at least one covariate, got p={p}")
        if y.shape[0] != n:
            raise DataError(f"X has {n} rows but y has length {y.shape[0]}")
        if not np.all(np.isfinite(X)):
            i, j = np.argwhere(~np.isfinite(X))[0]
            raise DataError(f"non-finite value in X at row {i}, column {j}")
        if not np.all(np.isfinite(y)):
            i = int(np.flatnonzero(~np.isfinite(y))[0])
            raise DataError(f"non-finite value in y at row {i}")
        names = self.feature_names
        if names is not None:
            names = tuple(str(s) for s in names)
            if len(names) != p:
                raise DataError(f"{len(names)} feature names for {p} columns")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def names(self) -> list[str]:
        if self.feature_names is not None:
            return list(self.feature_names)
        return [f"x{j}" for j in range(self.p)]

    def subset_rows(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.X[idx], self.y[idx], self.feature_names)

    def subset_columns(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        names = None
        if self.feature_names is not None:
            names = tuple(self.feature_names[j] for j in idx)
        return Dataset(self.X[:, idx], self.y, names)


@dataclass(frozen=True)
class GroupStructure:
    """Partition of the ``p`` variables into ``K`` groups.

    ``group_of[j]`` is the 0-based group index of variable ``j``; groups do
    not need to be contiguous in column order.
    """

    group_of: np.ndarray
    members: tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        g = np.asarray(self.group_of)
        if g.ndim != 1 or g.size == 0:
            raise DataError("group_of must be a nonempty 1-d vector")
        if not np.issubdtype(g.dtype, np.integer):
            if not np.all(np.equal(np.mod(g, 1), 0)):
                raise DataError("group indices must be integers")
        g = g.astype(int)
        K = int(g.max()) + 1 if g.min() >= 0 else -1
        if g.min() < 0 or np.unique(g).size != K:
            raise DataError("group indices must cover 0..K-1 with no empty group")
        object.__setattr__(self, "group_of", _frozen(g, dtype=int))
        members = tuple(_frozen(np.flatnonzero(g == k), dtype=int) for k in range(K))
        object.__setattr__(self, "members", members)

    @classmethod
    def from_labels(cls, labels: Sequence) -> "GroupStructure":
        """Build from arbitrary hashable labels; groups are ordered by sorted label."""
        uniq, inv = np.unique(np.asarray(labels), return_inverse=True)
        return cls(inv.ravel())

    @classmethod
    def contiguous(cls, sizes: Sequence[int]) -> "GroupStructure":
        return cls(np.repeat(np.arange(len(sizes)), sizes))

    @classmethod
    def single(cls, p: int) -> "GroupStructure":
        return cls(np.zeros(p, dtype=int))

    @property
    def K(self) -> int:
        return len(self.members)

    @property
    def p(self) -> int:
        return self.group_of.shape[0]

    @property
    def sizes(self) -> np.ndarray:
        return np.array([m.size for m in self.members])

    def group_norms(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return np.sqrt(np.bincount(self.group_of, weights=v * v, minlength=self.K))


@dataclass(frozen=True)
class SplitSpec:
    n_train: int
    n_val: int
    n_test: int
    seed: int = 0

    def __post_init__(self):
        if min(self.n_train, self.n_val, self.n_test) < 0:
            raise DataError("split sizes must be nonnegative")
        if self.n_train < 1:
            raise DataError("n_train must be at least 1")

    @property
    def total(self) -> int:
        return self.n_train + self.n_val + self.n_test


@dataclass(frozen=True)
class Standardizer:
    """Column centering/scaling estimated on one dataset, reusable on others."""

    x_mean: np.ndarray
    x_scale: np.ndarray
    y_center: float = 0.0

    def apply(self, d: Dataset) -> Dataset:
        X = (d.X - self.x_mean) / self.x_scale
        return Dataset(X, d.y - self.y_center, d.feature_names)


def standardize(d: Dataset, center_y: bool = False) -> tuple[Dataset, Standardizer]:
    """Scale every column of ``X`` to sample mean 0 and sample sd 1 (ddof=1).

    Raises
    ------
    DataError
        If a column is constant, or n < 2.
    """
    if d.n < 2:
        raise DataError("standardization needs at least 2 rows")
    mean = d.X.mean(axis=0)
    sd = d.X.std(axis=0, ddof=1)
    bad = np.flatnonzero(~(sd > 0))
    if bad.size:
        j = int(bad[0])
        raise DataError(f"column {d.names()[j]!r} (index {j}) is constant")
    params = Standardizer(_frozen(mean), _frozen(sd), float(np.mean(d.y)) if center_y else 0.0)
    return params.apply(d), params


def split(d: Dataset, s: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Disjoint train/validate/test subsets drawn from one seeded permutation."""
    if s.total > d.n:
        raise DataError(
            f"split sizes {s.n_train}+{s.n_val}+{s.n_test}={s.total} exceed n={d.n}"
        )
    idx = split_indices(d.n, s)
    return tuple(d.subset_rows(i) for i in idx)  # type: ignore[return-value]


def split_indices(n: int, s: SplitSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if s.total > n:
        raise DataError(f"split sizes total {s.total} exceed n={n}")
    perm = np.random.default_rng(s.seed).permutation(n)
    a, b = s.n_train, s.n_train + s.n_val
    return perm[:a], perm[a:b], perm[b : s.total]


def _parse_float(cell: str, row: int, col: int) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise DataError(f"cannot parse {cell!r} at row {row}, column {col}") from None
    if not np.isfinite(v):
        raise DataError(f"non-finite value {cell!r} at row {row}, column {col}")
    return v


def load_csv(path, has_header: bool = True, response_column: str | int = -1) -> Dataset:
    """Read a comma-separated file into a :class:`Dataset`.

    ``response_column`` is a header name or a 0-based column index (negative
    indices count from the end). Row numbers in error messages are 1-based
    file lines.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"data file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path} is empty")
    header = None
    first_line = 1
    if has_header:
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        first_line = 2
    if not rows:
        raise DataError(f"{path} has no data rows")
    width = len(header) if header else len(rows[0])
    if isinstance(response_column, str) and not response_column.lstrip("-").isdigit():
        if header is None or response_column not in header:
            raise DataError(f"response column {response_column!r} not found")
        ycol = header.index(response_column)
    else:
        ycol = int(response_column)
        if not -width <= ycol < width:
            raise DataError(f"response column index {ycol} out of range")
        ycol %= width
    if width < 2:
        raise DataError("no covariate columns left after removing the response (p=0)")
    values = np.empty((len(rows), width))
    for i, r in enumerate(rows):
        if len(r) != width:
            raise DataError(f"row {i + first_line} has {len(r)} fields, expected {width}")
        for j, c in enumerate(r):
            values[i, j] = _parse_float(c.strip(), i + first_line, j + 1)
    xcols = [j for j in range(width) if j != ycol]
    names = tuple(header[j] for j in xcols) if header else None
    return Dataset(values[:, xcols], values[:, ycol], names)


def load_groups(path, d: Dataset) -> GroupStructure:
    """Read a two-column ``feature,group`` CSV; features by name or 0-based index."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"group file not found: {path}")
    names = d.names()
    lookup = {nm: j for j, nm in enumerate(names)}
    labels: list = [None] * d.p
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, r in enumerate(csv.reader(fh), start=1):
            if not r or not any(c.strip() for c in r):
                continue
            if len(r) != 2:
                raise DataError(f"group file line {lineno}: expected 2 fields")
            feat, grp = r[0].strip(), r[1].strip()
            if feat in lookup:
                j = lookup[feat]
            elif feat.isdigit() and int(feat) < d.p:
                j = int(feat)
            elif lineno == 1:
                continue  # header row
            else:
                raise DataError(f"group file line {lineno}: unknown feature {feat!r}")
            try:
                labels[j] = int(grp)
            except ValueError:
                raise DataError(f"group file line {lineno}: bad group index {grp!r}") from None
    missing = [names[j] for j, g in enumerate(labels) if g is None]
    if missing:
        raise DataError(f"no group assigned to feature(s): {', '.join(missing[:5])}")
    return GroupStructure.from_labels(labels)


def write_groups(path, groups: GroupStructure, names: Sequence[str]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["feature", "group"])
        for nm, g in zip(names, groups.group_of):
            w.writerow([nm, int(g) + 1])
