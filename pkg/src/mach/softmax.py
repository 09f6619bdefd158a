"""Multinomial logistic regression on sparse rows, trained with mini-batch SGD.

Plain cross-entropy, no regularisation, zero initialisation. Every operation
on the training path is a scipy sparse product or an elementwise numpy op,
so results do not depend on BLAS threading and are bit-reproducible.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np
import scipy.sparse as sp

from .data_io import Dataset, SparseVector, iter_minibatches

__all__ = [
    "Optimizer",
    "TrainConfig",
    "SoftmaxModel",
    "TrainingDivergedError",
    "predict_proba",
    "predict_proba_batch",
    "log_softmax",
    "cross_entropy",
    "gradient",
    "train_logistic",
]

logger = logging.getLogger(__name__)


class Optimizer(enum.IntEnum):
    SGD = 0


class TrainingDivergedError(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 64
    learning_rate: float = 0.1
    lr_decay: float = 0.9
    shuffle_seed: int = 0
    optimizer: Optimizer = Optimizer.SGD

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        # a zero step is allowed: it returns the initial model untouched
        if not self.learning_rate >= 0 or not np.isfinite(self.learning_rate):
            raise ValueError("learning_rate must be a finite non-negative number")
        if not 0 < self.lr_decay <= 1:
            raise ValueError("lr_decay must lie in (0, 1]")
        if not 0 <= self.shuffle_seed < 1 << 64:
            raise ValueError("shuffle_seed must fit in an unsigned 64-bit word")
        object.__setattr__(self, "optimizer", Optimizer(self.optimizer))

    def step_size(self, epoch: int) -> float:
        return self.learning_rate * self.lr_decay**epoch


@dataclass
class SoftmaxModel:
    weights: np.ndarray  # (B, d)
    bias: np.ndarray  # (B,)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError("weights must be (B, d) and bias (B,)")

    @classmethod
    def zeros(cls, B: int, d: int) -> "SoftmaxModel":
        return cls(np.zeros((B, d)), np.zeros(B))

    @property
    def B(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.weights.shape[1]

    def logits(self, X) -> np.ndarray:
        X = _as_rows(X, self.d)
        return np.asarray(X @ self.weights.T) + self.bias

    def __eq__(self, other):
        if not isinstance(other, SoftmaxModel):
            return NotImplemented
        return (
            self.weights.shape == other.weights.shape
            and self.weights.tobytes() == other.weights.tobytes()
            and self.bias.tobytes() == other.bias.tobytes()
        )


def _as_rows(X, d: int):
    if isinstance(X, SparseVector):
        return X.to_csr(d)
    if sp.issparse(X):
        if X.shape[1] != d:
            raise ValueError(f"input has {X.shape[1]} features, model expects {d}")
        return X
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != d:
        raise ValueError(f"input has {X.shape[1]} features, model expects {d}")
    return X


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def predict_proba(m: SoftmaxModel, x: SparseVector) -> np.ndarray:
    """Class probabilities (length ``B``) for a single sparse input."""
    return _softmax(m.logits(x))[0]


def predict_proba_batch(m: SoftmaxModel, X) -> np.ndarray:
    return _softmax(m.logits(X))


def cross_entropy(m: SoftmaxModel, X, labels) -> float:
    """Mean cross-entropy of ``m`` on rows ``X`` with bucket labels ``labels``."""
    labels = np.asarray(labels)
    lp = log_softmax(m.logits(X))
    return float(-lp[np.arange(len(labels)), labels].mean())


def _check_labels(labels: np.ndarray, B: int):
    if labels.size and (labels.min() < 0 or labels.max() >= B):
        bad = labels[(labels < 0) | (labels >= B)][0]
        raise ValueError(f"label {int(bad)} outside [0, {B})")


def gradient(m: SoftmaxModel, X, labels):
    """Gradient of the mean cross-entropy: ``(dW (B, d), db (B,))``.

    Columns no row of the batch touches get exactly zero.
    """
    labels = np.asarray(labels, dtype=np.int64)
    X = _as_rows(X, m.d)
    _check_labels(labels, m.B)
    n = X.shape[0]
    resid = predict_proba_batch(m, X)
    resid[np.arange(n), labels] -= 1.0
    resid /= n
    if sp.issparse(X):
        gW = np.asarray((sp.csr_matrix(X).T @ resid).T)
    else:
        gW = resid.T @ X
    return gW, resid.sum(axis=0)


def train_logistic(
    ds: Union[Dataset, sp.csr_matrix],
    labels,
    B: int,
    cfg: TrainConfig,
    history: Optional[List[float]] = None,
) -> SoftmaxModel:
    """Fit a ``B``-class softmax on ``ds`` against ``labels`` (array or lazy view).

    ``labels[idx]`` must return bucket ids for an index array. If ``history``
    is given, the mean batch loss of each epoch is appended to it.
    """
    X = ds.X if isinstance(ds, Dataset) else sp.csr_matrix(ds)
    n, d = X.shape
    if n < 1:
        raise ValueError("cannot train on an empty dataset")
    if B < 1:
        raise ValueError("B must be positive")
    model = SoftmaxModel.zeros(B, d)
    W, b = model.weights, model.bias
    with np.errstate(over="ignore", invalid="ignore"):
        _sgd_epochs(X, labels, B, cfg, W, b, history)
    if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
        raise TrainingDivergedError("non-finite parameters after training")
    return model


def _sgd_epochs(X, labels, B, cfg, W, b, history):
    n = X.shape[0]
    batch_no = 0
    for epoch in range(cfg.epochs):
        lr = cfg.step_size(epoch)
        total, seen = 0.0, 0
        for rows in iter_minibatches(n, cfg.batch_size, cfg.shuffle_seed, epoch):
            Xb = X[rows]
            yb = np.asarray(labels[rows], dtype=np.int64)
            _check_labels(yb, B)
            k = len(rows)
            z = np.asarray(Xb @ W.T) + b
            z -= z.max(axis=1, keepdims=True)
            lse = np.log(np.exp(z).sum(axis=1))
            loss = float((lse - z[np.arange(k), yb]).mean())
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss {loss} at epoch {epoch}, batch {batch_no}"
                )
            total += loss * k
            seen += k
            batch_no += 1
            if lr == 0.0:
                continue
            resid = np.exp(z - lse[:, None])
            resid[np.arange(k), yb] -= 1.0
            resid /= k
            cols = np.unique(Xb.indices)
            if cols.size:
                # only columns present in the batch have non-zero gradient
                sub = Xb[:, cols]
                W[:, cols] -= lr * np.asarray((sub.T @ resid).T)
            b -= lr * resid.sum(axis=0)
        if history is not None:
            history.append(total / seen)
        logger.debug("epoch %d lr=%.4g loss=%.6f", epoch, lr, total / seen)
