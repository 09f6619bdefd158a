"""MACH: R independent B-class softmax models over hashed labels.

Training hashes every label with ``R`` independent 2-universal functions and
fits one small softmax per function. At inference each model yields a
distribution over its ``B`` buckets (the meta-probabilities); the score of
class ``i`` combines the ``R`` meta-probabilities of the buckets ``i`` falls
into, using one of three estimators:

* ``UNBIASED``: ``B/(B-1) * (mean_j P[j, h_j(i)] - 1/B)``; its expectation
  over the hash draw is the true class probability.
* ``MIN``: ``min_j P[j, h_j(i)]`` (count-min style).
* ``MEDIAN``: ``median_j P[j, h_j(i)]`` (count-median style; even ``R`` takes
  the mean of the two central values).

``UNBIASED`` is an increasing affine map of ``sum_j P[j, h_j(i)]`` so both
rank classes identically.
"""
from __future__ import annotations

import enum
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .data_io import Dataset, HashedLabelView, SparseVector
from .hashing import HashKind, HashSpec, bucket_table, make_hash_family
from .softmax import SoftmaxModel, TrainConfig, cross_entropy, predict_proba_batch, train_logistic

__all__ = [
    "EstimatorKind",
    "MachConfig",
    "MachModel",
    "TrainReport",
    "Prediction",
    "mach_train",
    "meta_probabilities",
    "merge_probabilities",
    "scores_from_meta",
    "score_classes",
    "predict",
    "predict_from_scores",
    "estimate_class_probability",
]

logger = logging.getLogger(__name__)


class EstimatorKind(enum.Enum):
    UNBIASED = "unbiased"
    MIN = "min"
    MEDIAN = "median"

    @classmethod
    def parse(cls, value) -> "EstimatorKind":
        return value if isinstance(value, cls) else cls(str(value).lower())


@dataclass(frozen=True)
class MachConfig:
    K: int
    B: int
    R: int
    seed: int = 0
    hash_kind: HashKind = HashKind.CARTER_WEGMAN
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.K < 2:
            raise ValueError(f"K must be >= 2, got {self.K}")
        if self.B < 2:
            raise ValueError(f"B must be >= 2, got {self.B}")
        if self.R < 1:
            raise ValueError(f"R must be >= 1, got {self.R}")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("seed must fit in an unsigned 64-bit word")
        object.__setattr__(self, "hash_kind", HashKind.parse(self.hash_kind))


@dataclass
class MachModel:
    config: MachConfig
    specs: List[HashSpec]
    models: List[SoftmaxModel]
    label_map: np.ndarray

    def __post_init__(self):
        cfg = self.config
        self.label_map = np.asarray(self.label_map, dtype=np.int64)
        if not len(self.specs) == len(self.models) == cfg.R:
            raise ValueError("need exactly R hash specs and R models")
        if len(self.label_map) != cfg.K:
            raise ValueError("label map must have K entries")
        d = self.models[0].d
        for j, (s, m) in enumerate(zip(self.specs, self.models)):
            if s.buckets != cfg.B or s.universe < cfg.K:
                raise ValueError(f"hash spec {j} does not map [K] -> [B]")
            if s.kind is not cfg.hash_kind:
                raise ValueError("all hash specs must be of the configured kind")
            if m.B != cfg.B or m.d != d:
                raise ValueError(f"sub-model {j} has shape {m.weights.shape}, expected ({cfg.B}, {d})")
        self._table = None

    @property
    def d(self) -> int:
        return self.models[0].d

    @property
    def table(self) -> np.ndarray:
        """``R x K`` bucket ids, computed once."""
        if self._table is None:
            self._table = bucket_table(self.specs, self.config.K)
        return self._table

    def __eq__(self, other):
        if not isinstance(other, MachModel):
            return NotImplemented
        return (
            self.config == other.config
            and self.specs == other.specs
            and self.models == other.models
            and np.array_equal(self.label_map, other.label_map)
        )


class TrainReport(NamedTuple):
    index: int
    wall_ms: float
    final_loss: float


def _train_one(X, y, spec: HashSpec, cfg: TrainConfig, index: int):
    t0 = time.perf_counter()
    view = HashedLabelView(y, spec)
    try:
        model = train_logistic(X, view, spec.buckets, cfg)
    except (ValueError, FloatingPointError) as e:
        raise type(e)(f"sub-model {index}: {e}") from e
    wall_ms = (time.perf_counter() - t0) * 1e3
    loss = cross_entropy(model, X, view[np.arange(X.shape[0])])
    return model, TrainReport(index, wall_ms, loss)


def mach_train(
    ds: Dataset,
    cfg: MachConfig,
    workers: int = 1,
    specs: Optional[Sequence[HashSpec]] = None,
    reports: Optional[list] = None,
) -> MachModel:
    """Train the ``R`` sub-models; ``workers > 1`` uses a process pool.

    Each sub-model is trained in isolation from the same inputs, so the
    result is bit-identical for any worker count. ``specs`` overrides the
    seeded hash family (used to build the injective one-vs-all case).
    """
    if ds.N < 1:
        raise ValueError("cannot train on an empty dataset")
    if ds.K > cfg.K:
        raise ValueError(f"dataset has K={ds.K} classes, config allows {cfg.K}")
    if specs is None:
        specs = make_hash_family(cfg.K, cfg.B, cfg.R, cfg.seed, cfg.hash_kind)
    specs = list(specs)
    if len(specs) != cfg.R:
        raise ValueError("need exactly R hash specs")
    workers = max(1, min(int(workers), cfg.R))

    label_map = ds.label_map
    if len(label_map) < cfg.K:
        # classes never seen in training keep their internal id as label
        extra = np.arange(len(label_map), cfg.K, dtype=np.int64)
        label_map = np.concatenate([label_map, extra])

    jobs = [(ds.X, ds.y, spec, cfg.train, j) for j, spec in enumerate(specs)]
    if workers == 1:
        results = [_train_one(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_train_one, *job) for job in jobs]
            results = [f.result() for f in futures]
    models = [m for m, _ in results]
    for _, rep in results:
        logger.info("sub-model %d trained in %.1f ms, loss %.6f", *rep)
        if reports is not None:
            reports.append(rep)
    return MachModel(cfg, specs, models, label_map)


def _rows(mm: MachModel, xs):
    if isinstance(xs, SparseVector):
        return xs.to_csr(mm.d)
    if isinstance(xs, Dataset):
        X = xs.X
    elif isinstance(xs, (list, tuple)) and xs and isinstance(xs[0], SparseVector):
        return sp.vstack([x.to_csr(mm.d) for x in xs], format="csr")
    else:
        X = xs
    if X.shape[1] > mm.d:
        raise ValueError(f"input has {X.shape[1]} features, model expects {mm.d}")
    if X.shape[1] < mm.d:
        X = sp.csr_matrix(X)
        X = sp.csr_matrix((X.data, X.indices, X.indptr), shape=(X.shape[0], mm.d))
    return X


def meta_probabilities(mm: MachModel, xs) -> np.ndarray:
    """``(n, R, B)`` array; ``[:, j, :]`` is sub-model ``j``'s bucket distribution."""
    X = _rows(mm, xs)
    return np.stack([predict_proba_batch(m, X) for m in mm.models], axis=1)


def merge_probabilities(p: np.ndarray, table: np.ndarray, B: int) -> np.ndarray:
    """Bucket probabilities implied by class probabilities ``p``.

    ``out[..., j, b] = sum_{i : table[j, i] == b} p[..., i]``. With an exact
    class-probability vector this is what a perfect sub-model would output.
    """
    p = np.asarray(p, dtype=np.float64)
    table = np.asarray(table)
    R, K = table.shape
    lead = p.shape[:-1]
    flat = p.reshape(-1, K)
    out = np.zeros((flat.shape[0], R, B))
    for j in range(R):
        for row in range(flat.shape[0]):
            out[row, j] = np.bincount(table[j], weights=flat[row], minlength=B)
    return out.reshape(*lead, R, B)


def _gathered(meta: np.ndarray, table: np.ndarray) -> np.ndarray:
    # (n, R, K): meta-probability of the bucket each class lands in
    R = table.shape[0]
    return np.stack([meta[:, j, table[j]] for j in range(R)], axis=1)


def scores_from_meta(meta: np.ndarray, table: np.ndarray, est=EstimatorKind.UNBIASED) -> np.ndarray:
    """Class scores ``(n, K)`` from cached meta-probabilities ``(n, R, B)``."""
    est = EstimatorKind.parse(est)
    meta = np.asarray(meta, dtype=np.float64)
    if meta.ndim == 2:
        meta = meta[None]
    B = meta.shape[2]
    g = _gathered(meta, np.asarray(table))
    if est is EstimatorKind.UNBIASED:
        return B / (B - 1) * (g.mean(axis=1) - 1.0 / B)
    if est is EstimatorKind.MIN:
        return g.min(axis=1)
    return np.median(g, axis=1)


def score_classes(mm: MachModel, x, est=EstimatorKind.UNBIASED) -> np.ndarray:
    """Scores for all ``K`` classes; a single input gives shape ``(K,)``."""
    s = scores_from_meta(meta_probabilities(mm, x), mm.table, est)
    return s[0] if isinstance(x, SparseVector) else s


class Prediction(NamedTuple):
    labels: np.ndarray  # original labels, (n,)
    classes: np.ndarray  # internal ids, (n,)
    top_classes: np.ndarray  # (n, k) internal ids, best first
    top_scores: np.ndarray  # (n, k)


def predict_from_scores(scores: np.ndarray, label_map: np.ndarray, top_k: int = 1) -> Prediction:
    scores = np.atleast_2d(scores)
    top_k = max(1, min(int(top_k), scores.shape[1]))
    # stable sort on negated scores: ties resolve toward the smaller class id
    order = np.argsort(-scores, axis=1, kind="stable")[:, :top_k]
    top_scores = np.take_along_axis(scores, order, axis=1)
    classes = order[:, 0]
    return Prediction(label_map[classes], classes, order, top_scores)


def predict(mm: MachModel, xs, est=EstimatorKind.UNBIASED, top_k: int = 1) -> Prediction:
    scores = scores_from_meta(meta_probabilities(mm, xs), mm.table, est)
    return predict_from_scores(scores, mm.label_map, top_k)


def estimate_class_probability(mm: MachModel, x: SparseVector, i: int) -> float:
    """Unbiased-estimator score of class ``i``.

    Only its expectation over hash draws equals the true probability; a single
    draw can be negative or overshoot.
    """
    if not 0 <= i < mm.config.K:
        raise ValueError(f"class id {i} outside [0, {mm.config.K})")
    return float(score_classes(mm, x, EstimatorKind.UNBIASED)[i])
