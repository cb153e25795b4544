"""Datasets, file loaders, stratified splitting and standardisation."""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import make_rng, sym_eig


class DataError(ValueError):
    """Malformed or unusable input data."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix plus binary labels (1 = minority / positive class)."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple = ()
    name: str = ""

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.features, dtype=float))
        y = np.asarray(self.labels).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise DataError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        if y.size and not np.all((y == 0) | (y == 1)):
            raise DataError("labels must be 0 or 1")
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DataError(f"{len(names)} feature names for {X.shape[1]} columns")
        X.setflags(write=False)
        y = y.astype(np.int64)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def m(self):
        return self.features.shape[1]

    @property
    def n_pos(self):
        return int(self.labels.sum())

    @property
    def n_neg(self):
        return self.n - self.n_pos

    @property
    def imbalance_ratio(self):
        return self.n_neg / self.n_pos if self.n_pos else float("inf")

    def subset(self, idx, name=None):
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.feature_names,
                       self.name if name is None else name)

    def with_features(self, X, feature_names=None):
        return Dataset(X, self.labels, feature_names or (), self.name)

    def require_both_classes(self):
        if self.n < 2 or self.n_pos == 0 or self.n_neg == 0:
            raise DataError(f"dataset {self.name!r} needs both classes "
                            f"(pos={self.n_pos}, neg={self.n_neg})")

    def to_json(self):
        return {"name": self.name, "feature_names": list(self.feature_names),
                "features": self.features.tolist(),
                "labels": self.labels.tolist()}

    @classmethod
    def from_json(cls, obj):
        X = np.asarray(obj["features"], dtype=float).reshape(len(obj["labels"]), -1)
        return cls(X, np.asarray(obj["labels"], dtype=np.int64),
                   tuple(obj["feature_names"]), obj.get("name", ""))

    def __repr__(self):
        return (f"Dataset(name={self.name!r}, n={self.n}, m={self.m}, "
                f"pos={self.n_pos}, neg={self.n_neg})")


def save_dataset(d, path):
    Path(path).write_text(json.dumps(d.to_json()))


def load_dataset_json(path):
    return Dataset.from_json(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# loaders

def _to_float(cell, row, col):
    try:
        v = float(cell)
    except ValueError:
        raise DataError(f"non-numeric value {cell!r} at row {row}, column {col!r}") from None
    if not np.isfinite(v):
        raise DataError(f"non-finite value {cell!r} at row {row}, column {col!r}")
    return v


def load_csv(path, label_column=-1, positive_label=None, name=None):
    """Read a header-first CSV file.

    Parameters
    ----------
    path : str or Path
    label_column : str or int
        Column name, or integer position (negative counts from the end).
    positive_label : str, optional
        Raw label value mapped to 1 (compared case-insensitively).  By default
        the less frequent value is positive.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if label_column not in header:
            raise DataError(f"{path}: no column named {label_column!r}")
        li = header.index(label_column)
    else:
        li = int(label_column)
        if not -len(header) <= li < len(header):
            raise DataError(f"{path}: label column {li} out of range")
        li %= len(header)
    feat_cols = [j for j in range(len(header)) if j != li]
    X, raw = [], []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: row {r} has {len(row)} cells, header has {len(header)}")
        X.append([_to_float(row[j].strip(), r, header[j]) for j in feat_cols])
        raw.append(row[li].strip())
    if not raw:
        raise DataError(f"{path}: no data rows")
    y = _binarize(raw, positive_label, str(path))
    return Dataset(np.asarray(X, dtype=float).reshape(len(raw), len(feat_cols)), y,
                   tuple(header[j] for j in feat_cols), name or path.stem)


def _binarize(raw, positive_label, where):
    """0/1 labels.  With an explicit ``positive_label`` a single-valued column is
    accepted (e.g. an all-negative test file); otherwise two values are needed."""
    values, counts = np.unique(np.asarray(raw, dtype=object).astype(str), return_counts=True)
    values = [str(v) for v in values]
    if len(values) > 2 or (len(values) < 2 and positive_label is None):
        raise DataError(f"{where}: expected exactly two label values, found "
                        f"{len(values)}: {values[:10]}")
    if positive_label is None:
        # minority is positive; ties resolved by sort order for determinism
        pos = values[int(np.argmin(counts))]
    else:
        key = str(positive_label).strip().lower()
        matches = [v for v in values if v.lower() == key]
        if not matches and len(values) == 2:
            raise DataError(f"{where}: positive label {positive_label!r} not among {values}")
        pos = matches[0] if matches else None
    return np.array([1 if v == pos else 0 for v in raw], dtype=np.int64)


_ATTR_RE = re.compile(r"@attribute\s+('[^']*'|\"[^\"]*\"|\S+)\s+(.*)$", re.IGNORECASE)


def _parse_attr_type(spec):
    spec = spec.strip()
    if spec.startswith("{"):
        if not spec.endswith("}"):
            raise DataError(f"unterminated nominal list: {spec!r}")
        return [v.strip().strip("'\"") for v in spec[1:-1].split(",")]
    kind = re.match(r"[A-Za-z]+", spec)
    kind = kind.group(0).lower() if kind else ""
    if kind in ("real", "integer", "numeric"):
        return kind
    raise DataError(f"unknown attribute type {spec!r}")


def load_keel_dat(path, positive_class=None, name=None):
    """Read a KEEL ``.dat`` file (ARFF-like headers work too).

    The last ``@attribute`` is the class.  Nominal input attributes are coded
    as their position in the declared value list.  Unless ``positive_class`` is
    given the less frequent class becomes label 1.  Missing values (``?``) are
    rejected.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    attrs = []
    relation = None
    data_lines = None
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("%"):
                continue
            if data_lines is not None:
                data_lines.append((lineno, s))
                continue
            low = s.lower()
            if low.startswith("@relation"):
                relation = s.split(None, 1)[1].strip() if len(s.split(None, 1)) > 1 else ""
            elif low.startswith("@attribute"):
                mt = _ATTR_RE.match(s)
                if not mt:
                    raise DataError(f"{path}:{lineno}: malformed attribute line")
                attrs.append((mt.group(1).strip("'\""), _parse_attr_type(mt.group(2))))
            elif low.startswith(("@inputs", "@outputs", "@input", "@output")):
                continue
            elif low.startswith("@data"):
                data_lines = []
            else:
                raise DataError(f"{path}:{lineno}: unexpected header line {s[:40]!r}")
    if relation is None or not attrs:
        raise DataError(f"{path}: missing @relation or @attribute header")
    if data_lines is None:
        raise DataError(f"{path}: no @data section")
    if not data_lines:
        raise DataError(f"{path}: empty @data section")
    if not isinstance(attrs[-1][1], list):
        raise DataError(f"{path}: class attribute {attrs[-1][0]!r} is not nominal")

    inputs = attrs[:-1]
    X = np.empty((len(data_lines), len(inputs)))
    raw = []
    for i, (lineno, s) in enumerate(data_lines):
        cells = [c.strip().strip("'\"") for c in s.split(",")]
        if len(cells) != len(attrs):
            raise DataError(f"{path}:{lineno}: {len(cells)} values, expected {len(attrs)}")
        for j, (aname, kind) in enumerate(inputs):
            c = cells[j]
            if c in ("?", ""):
                raise DataError(f"{path}:{lineno}: missing value in {aname!r}")
            if isinstance(kind, list):
                if c not in kind:
                    raise DataError(f"{path}:{lineno}: {c!r} not a declared value of {aname!r}")
                X[i, j] = kind.index(c)
            else:
                X[i, j] = _to_float(c, lineno, aname)
        raw.append(cells[-1])
    y = _binarize(raw, positive_class, str(path))
    return Dataset(X, y, tuple(a for a, _ in inputs), name or relation or path.stem)


def load(path, fmt=None, label_column=-1, positive_label=None):
    """Dispatch on ``fmt`` ('csv', 'keel' or 'json'), guessing from the suffix."""
    path = Path(path)
    if fmt is None:
        fmt = {".csv": "csv", ".json": "json"}.get(path.suffix.lower(), "keel")
    if fmt == "csv":
        return load_csv(path, label_column, positive_label)
    if fmt == "keel":
        return load_keel_dat(path, positive_label)
    if fmt == "json":
        if not path.is_file():
            raise DataError(f"no such file: {path}")
        return load_dataset_json(path)
    raise DataError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# splitting

@dataclass(frozen=True, eq=False)
class SplitPair:
    train: Dataset
    test: Dataset
    seed: int
    train_fraction: float
    train_index: np.ndarray = field(repr=False, default=None)
    test_index: np.ndarray = field(repr=False, default=None)


def stratified_split(d, train_fraction=0.7, seed=0):
    """Per-class shuffled split with ``round(f * n_class)`` rows to train.

    Rounding is clipped so each class keeps at least one row on each side.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    rng = make_rng(seed, "split")
    tr, te = [], []
    for cls in (0, 1):
        idx = np.flatnonzero(d.labels == cls)
        if idx.size < 2:
            raise DataError(f"class {cls} has {idx.size} sample(s); need >= 2 to stratify")
        idx = rng.permutation(idx)
        k = int(np.floor(train_fraction * idx.size + 0.5))
        k = min(max(k, 1), idx.size - 1)
        tr.append(idx[:k])
        te.append(idx[k:])
    tr = np.sort(np.concatenate(tr))
    te = np.sort(np.concatenate(te))
    return SplitPair(d.subset(tr, d.name), d.subset(te, d.name), int(seed),
                     float(train_fraction), tr, te)


# ---------------------------------------------------------------------------
# standardisation

@dataclass(frozen=True, eq=False)
class Standardizer:
    """Affine feature map fitted on training rows.

    ``kind='zscore'`` scales each feature by its population std (constant
    features pass through with std 1).  ``kind='whiten'`` additionally
    decorrelates: ``x -> W (x - mean)`` with ``W = C^{-1/2}`` over the
    non-degenerate directions of the covariance.
    """

    means: np.ndarray
    std_devs: np.ndarray
    whitening: np.ndarray = None
    kind: str = "zscore"

    def transform(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.means.shape[0]:
            raise DataError(f"expected {self.means.shape[0]} features, got {X.shape[1]}")
        Z = (X - self.means) / self.std_devs
        if self.whitening is not None:
            Z = Z @ self.whitening.T
        return Z

    def to_json(self):
        return {"kind": self.kind, "means": self.means.tolist(),
                "std_devs": self.std_devs.tolist(),
                "whitening": None if self.whitening is None else self.whitening.tolist()}

    @classmethod
    def from_json(cls, obj):
        W = obj.get("whitening")
        return cls(np.asarray(obj["means"], dtype=float), np.asarray(obj["std_devs"], dtype=float),
                   None if W is None else np.asarray(W, dtype=float), obj.get("kind", "zscore"))


def fit_standardizer(d, kind="zscore"):
    X = d.features if isinstance(d, Dataset) else np.atleast_2d(np.asarray(d, dtype=float))
    if X.shape[0] == 0:
        raise DataError("cannot fit a standardizer on zero rows")
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd > 1e-12 * np.maximum(1.0, np.abs(mu)), sd, 1.0)
    W = None
    if kind == "whiten":
        Z = (X - mu) / sd
        eig = sym_eig(Z.T @ Z / X.shape[0])
        keep = eig.eigenvalues > 1e-10 * max(eig.eigenvalues[0], 1e-300)
        inv = np.zeros_like(eig.eigenvalues)
        inv[keep] = 1.0 / np.sqrt(eig.eigenvalues[keep])
        W = (eig.eigenvectors * inv) @ eig.eigenvectors.T
    elif kind != "zscore":
        raise ValueError(f"unknown standardizer kind {kind!r}")
    return Standardizer(mu, sd, W, kind)


def apply_standardizer(s, d):
    return d.with_features(s.transform(d.features), d.feature_names)
