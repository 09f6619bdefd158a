"""Synthetic sparse softmax data with a known ground-truth model."""
from __future__ import annotations

import os
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .data_io import Dataset, write_libsvm
from .softmax import SoftmaxModel, predict_proba_batch

__all__ = ["SyntheticData", "make_synthetic", "truth_accuracy", "write_synthetic", "load_truth"]


class SyntheticData(NamedTuple):
    dataset: Dataset
    truth: SoftmaxModel


def make_synthetic(
    K: int,
    d: int,
    N: int,
    seed: int = 0,
    scale: float = 5.0,
    density: float = 0.05,
    support: int = 2,
) -> SyntheticData:
    """Sample ``N`` rows from a random sparse softmax model with ``K`` classes.

    Ground truth: every class puts weight ``+-scale * (1 + U(0, 1))`` on
    ``support`` randomly chosen features and zero elsewhere; bias is zero.
    Rows mimic bag-of-words data: ``max(1, Binomial(d, density))`` active
    features at random positions with Exp(1) values. Labels are drawn from the
    truth's class distribution, so the truth's accuracy is the Bayes rate.
    """
    if min(K, d, N, support) < 1:
        raise ValueError("K, d, N and support must be positive")
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    support = min(support, d)
    rng = np.random.default_rng(seed)
    W = np.zeros((K, d))
    for k in range(K):
        feats = rng.choice(d, size=support, replace=False)
        signs = rng.choice([-1.0, 1.0], size=support)
        W[k, feats] = scale * (1.0 + rng.random(support)) * signs
    truth = SoftmaxModel(W, np.zeros(K))

    nnz = np.maximum(1, rng.binomial(d, density, size=N))
    indptr = np.concatenate([[0], np.cumsum(nnz)])
    indices = np.concatenate([np.sort(rng.choice(d, size=k, replace=False)) for k in nnz])
    values = rng.exponential(1.0, size=indptr[-1])
    X = sp.csr_matrix((values, indices, indptr), shape=(N, d))

    probs = predict_proba_batch(truth, X)
    u = rng.random(N)[:, None]
    y = np.minimum((probs.cumsum(axis=1) < u).sum(axis=1), K - 1)
    return SyntheticData(Dataset(X, y, K), truth)


def truth_accuracy(truth: SoftmaxModel, ds: Dataset) -> float:
    """Accuracy of the truth model's argmax on ``ds`` (the Bayes rate estimate)."""
    pred = np.argmax(predict_proba_batch(truth, ds.X), axis=1)
    return float(np.mean(pred == ds.y))


def write_synthetic(data: SyntheticData, path) -> str:
    """Write ``path`` (libsvm) and ``path + '.truth.npz'``; returns the truth path."""
    write_libsvm(data.dataset, path)
    truth_path = f"{os.fspath(path)}.truth.npz"
    with open(truth_path, "wb") as fh:
        np.savez(fh, weights=data.truth.weights, bias=data.truth.bias)
    return truth_path


def load_truth(path) -> SoftmaxModel:
    with np.load(path) as z:
        return SoftmaxModel(z["weights"], z["bias"])
