"""Sparse labelled datasets: libsvm text I/O, label maps and mini-batching."""
from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .hashing import HashSpec, hash_classes

__all__ = [
    "SparseVector",
    "Dataset",
    "HashedLabelView",
    "load_libsvm",
    "write_libsvm",
    "hashed_label_view",
    "iter_minibatches",
    "LibsvmFormatError",
]

logger = logging.getLogger(__name__)


class LibsvmFormatError(ValueError):
    """Raised for malformed libsvm input; the message carries the line number."""


@dataclass(frozen=True)
class SparseVector:
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.ndim != 1 or idx.shape != val.shape:
            raise ValueError("indices and values must be 1-d and of equal length")
        if idx.size and (idx[0] < 0 or np.any(np.diff(idx) <= 0)):
            raise ValueError("indices must be non-negative and strictly increasing")
        if not np.all(np.isfinite(val)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_pairs(cls, pairs) -> "SparseVector":
        """Build from ``(index, value)`` pairs; repeated indices are summed."""
        acc = {}
        for i, v in pairs:
            acc[int(i)] = acc.get(int(i), 0.0) + float(v)
        keys = sorted(acc)
        return cls(np.array(keys, dtype=np.int64), np.array([acc[k] for k in keys]))

    def to_csr(self, d: int) -> sp.csr_matrix:
        if self.indices.size and self.indices[-1] >= d:
            raise ValueError(f"feature index {int(self.indices[-1])} out of range for d={d}")
        indptr = np.array([0, self.indices.size], dtype=np.int64)
        return sp.csr_matrix((self.values, self.indices, indptr), shape=(1, d))

    def __len__(self):
        return int(self.indices.size)


@dataclass
class Dataset:
    """Rows of ``X`` (CSR, ``N x d``) with dense internal labels in ``[0, K)``.

    ``label_map[k]`` is the original label of internal class ``k``.
    """

    X: sp.csr_matrix
    y: np.ndarray
    K: int
    label_map: np.ndarray = field(default=None)

    def __post_init__(self):
        self.X = sp.csr_matrix(self.X, dtype=np.float64)
        self.X.sort_indices()
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.label_map is None:
            self.label_map = np.arange(self.K, dtype=np.int64)
        self.label_map = np.asarray(self.label_map, dtype=np.int64)
        if self.y.shape != (self.X.shape[0],):
            raise ValueError("need exactly one label per row")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= self.K):
            raise ValueError(f"labels must lie in [0, {self.K})")
        if len(self.label_map) != self.K:
            raise ValueError("label map must have one entry per class")
        if not np.all(np.isfinite(self.X.data)):
            raise ValueError("feature values must be finite")

    @property
    def N(self) -> int:
        return int(self.X.shape[0])

    @property
    def d(self) -> int:
        return int(self.X.shape[1])

    def __len__(self):
        return self.N

    def __getitem__(self, i: int):
        row = self.X.getrow(i)
        return SparseVector(row.indices, row.data), int(self.y[i])

    def __iter__(self):
        for i in range(self.N):
            yield self[i]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.X[rows], self.y[rows], self.K, self.label_map)

    def with_dim(self, d: int) -> "Dataset":
        """Same rows, zero-padded to ``d`` features."""
        if d < self.d:
            raise ValueError(f"cannot shrink feature dimension {self.d} to {d}")
        X = sp.csr_matrix((self.X.data, self.X.indices, self.X.indptr), shape=(self.N, d))
        return Dataset(X, self.y, self.K, self.label_map)

    def original_labels(self) -> np.ndarray:
        return self.label_map[self.y]

    def normalized(self) -> "Dataset":
        """Copy with every row scaled to unit L2 norm (all-zero rows left alone)."""
        X = self.X.copy()
        norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
        norms[norms == 0] = 1.0
        X = sp.csr_matrix(sp.diags(1.0 / norms) @ X)
        return Dataset(X, self.y, self.K, self.label_map)

    @classmethod
    def from_examples(cls, examples: Sequence, d: int, K: int, label_map=None) -> "Dataset":
        rows = [x.to_csr(d) for x, _ in examples]
        X = sp.vstack(rows, format="csr") if rows else sp.csr_matrix((0, d))
        return cls(X, np.array([y for _, y in examples], dtype=np.int64), K, label_map)


def _parse_line(line: str, lineno: int, one_based: bool):
    parts = line.split()
    try:
        label = int(parts[0])
    except ValueError:
        raise LibsvmFormatError(f"line {lineno}: bad label {parts[0]!r}") from None
    idx, val = [], []
    for tok in parts[1:]:
        if tok.startswith("#"):
            break
        k, sep, v = tok.partition(":")
        if not sep:
            raise LibsvmFormatError(f"line {lineno}: expected idx:val, got {tok!r}")
        try:
            i, x = int(k), float(v)
        except ValueError:
            raise LibsvmFormatError(f"line {lineno}: bad feature {tok!r}") from None
        if one_based:
            i -= 1
        if i < 0:
            raise LibsvmFormatError(f"line {lineno}: negative feature index in {tok!r}")
        if not math.isfinite(x):
            raise LibsvmFormatError(f"line {lineno}: non-finite value in {tok!r}")
        idx.append(i)
        val.append(x)
    return label, idx, val


def load_libsvm(
    path,
    expected_d: Optional[int] = None,
    expected_K: Optional[int] = None,
    label_map=None,
    one_based: bool = False,
    normalize: bool = False,
) -> Dataset:
    """Read ``label idx:val idx:val ...`` lines into a :class:`Dataset`.

    Label handling, in order of precedence:

    * ``label_map`` given: raw labels are looked up in it (unknown -> error).
    * ``expected_K`` given: raw labels must already be in ``[0, expected_K)``
      and are used as-is.
    * otherwise the sorted distinct raw labels become ``0..K-1``.

    Repeated feature indices on one line are summed. Blank lines and lines
    starting with ``#`` are skipped.
    """
    labels, indptr, indices, values = [], [0], [], []
    max_feat = -1
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            label, idx, val = _parse_line(line, lineno, one_based)
            if idx:
                order = np.argsort(idx, kind="stable")
                idx_arr = np.asarray(idx, dtype=np.int64)[order]
                val_arr = np.asarray(val, dtype=np.float64)[order]
                uniq, start = np.unique(idx_arr, return_index=True)
                val_arr = np.add.reduceat(val_arr, start)
                idx_arr = uniq
                if expected_d is not None and idx_arr[-1] >= expected_d:
                    raise LibsvmFormatError(
                        f"line {lineno}: feature {int(idx_arr[-1])} >= expected d={expected_d}"
                    )
                max_feat = max(max_feat, int(idx_arr[-1]))
                indices.append(idx_arr)
                values.append(val_arr)
                indptr.append(indptr[-1] + idx_arr.size)
            else:
                indptr.append(indptr[-1])
            if label_map is None and expected_K is not None and not 0 <= label < expected_K:
                raise LibsvmFormatError(f"line {lineno}: label {label} outside [0, {expected_K})")
            labels.append(label)

    d = expected_d if expected_d is not None else max_feat + 1
    raw = np.asarray(labels, dtype=np.int64)
    if label_map is not None:
        label_map = np.asarray(label_map, dtype=np.int64)
        lookup = {int(v): k for k, v in enumerate(label_map)}
        try:
            y = np.array([lookup[int(v)] for v in raw], dtype=np.int64)
        except KeyError as e:
            raise LibsvmFormatError(f"label {e.args[0]} not in the label map") from None
        K = len(label_map)
    elif expected_K is not None:
        y, K, label_map = raw, expected_K, np.arange(expected_K, dtype=np.int64)
    else:
        label_map, y = np.unique(raw, return_inverse=True)
        K = len(label_map)
        y = y.astype(np.int64).ravel()

    X = sp.csr_matrix(
        (
            np.concatenate(values) if values else np.zeros(0),
            np.concatenate(indices) if indices else np.zeros(0, dtype=np.int64),
            np.asarray(indptr, dtype=np.int64),
        ),
        shape=(len(labels), max(d, 0)),
    )
    ds = Dataset(X, y, K, label_map)
    logger.info("loaded %s: N=%d d=%d K=%d", os.fspath(path), ds.N, ds.d, ds.K)
    return ds.normalized() if normalize else ds


def write_libsvm(ds: Dataset, path, one_based: bool = False) -> None:
    """Write ``ds`` with its original labels; values use ``repr`` so reloading is exact."""
    off = 1 if one_based else 0
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", encoding="ascii") as fh:
        X = ds.X
        raw = ds.original_labels()
        for r in range(ds.N):
            lo, hi = X.indptr[r], X.indptr[r + 1]
            feats = " ".join(
                f"{int(i) + off}:{float(v)!r}" for i, v in zip(X.indices[lo:hi], X.data[lo:hi])
            )
            fh.write(f"{int(raw[r])} {feats}".rstrip() + "\n")
    os.replace(tmp, path)


class HashedLabelView:
    """Lazy ``i -> h(y_i)`` accessor; hashed labels are never materialised."""

    def __init__(self, y: np.ndarray, spec: HashSpec):
        self._y = y
        self.spec = spec

    @property
    def buckets(self) -> int:
        return self.spec.buckets

    def __len__(self):
        return len(self._y)

    def __getitem__(self, i):
        if np.ndim(i) == 0:
            return int(hash_classes(self.spec, self._y[i]))
        return hash_classes(self.spec, self._y[i])


def hashed_label_view(ds: Dataset, spec: HashSpec) -> HashedLabelView:
    if spec.universe < ds.K:
        raise ValueError(f"hash universe {spec.universe} smaller than K={ds.K}")
    return HashedLabelView(ds.y, spec)


def iter_minibatches(n: int, batch_size: int, seed: int, epoch: int) -> Iterator[np.ndarray]:
    """Row-index batches for one epoch; the permutation depends only on (seed, epoch)."""
    rng = np.random.default_rng([int(seed) & ((1 << 64) - 1), int(epoch)])
    perm = rng.permutation(n)
    for lo in range(0, n, batch_size):
        yield perm[lo : lo + batch_size]
