"""Accuracy harness: MACH against its one-vs-all degenerate case."""
from __future__ import annotations

from typing import Dict, Iterable

import numpy as np

from .core import (
    EstimatorKind,
    MachConfig,
    MachModel,
    mach_train,
    meta_probabilities,
    predict_from_scores,
    scores_from_meta,
)
from .data_io import Dataset
from .hashing import identity_spec
from .softmax import TrainConfig

__all__ = ["accuracy", "accuracies", "train_oaa"]


def train_oaa(ds: Dataset, train: TrainConfig, K: int = None) -> MachModel:
    """One-vs-all softmax expressed as MACH with ``R=1`` and ``h(i) = i``."""
    K = ds.K if K is None else K
    cfg = MachConfig(K=K, B=K, R=1, seed=0, train=train)
    return mach_train(ds, cfg, specs=[identity_spec(K)])


def accuracies(mm: MachModel, ds: Dataset, estimators: Iterable = tuple(EstimatorKind),
               batch: int = 4096) -> Dict[str, float]:
    """Top-1 accuracy for each estimator, sharing one meta-probability pass per chunk."""
    ests = [EstimatorKind.parse(e) for e in estimators]
    hits = {e: 0 for e in ests}
    for lo in range(0, ds.N, batch):
        X = ds.X[lo : lo + batch]
        meta = meta_probabilities(mm, X)
        for e in ests:
            pred = predict_from_scores(scores_from_meta(meta, mm.table, e), mm.label_map)
            hits[e] += int(np.sum(pred.labels == ds.original_labels()[lo : lo + batch]))
    n = max(ds.N, 1)
    return {e.value: hits[e] / n for e in ests}


def accuracy(mm: MachModel, ds: Dataset, est=EstimatorKind.UNBIASED) -> float:
    est = EstimatorKind.parse(est)
    return accuracies(mm, ds, [est])[est.value]
