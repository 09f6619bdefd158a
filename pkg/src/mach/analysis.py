"""Planning and audit tools: how many repetitions, which classes collide, what it costs."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Tuple

import numpy as np

from .hashing import MERSENNE_61, HashSpec, _mulmod_p61, bucket_table

__all__ = [
    "PlanRequest",
    "CostReport",
    "plan_R",
    "union_bound",
    "audit_distinguishability",
    "cost_report",
    "collision_rates",
]

_U64_MAX = (1 << 64) - 1


@dataclass(frozen=True)
class PlanRequest:
    K: int
    B: int
    delta: float

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be positive")
        if self.B < 2:
            raise ValueError(f"B must be >= 2 (log B = 0 otherwise), got {self.B}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


def union_bound(K: int, B: int, R: int) -> float:
    """Upper bound ``K**2 * B**-R`` on Pr(some pair of classes is indistinguishable)."""
    return K * K * float(B) ** (-R)


def plan_R(req: PlanRequest) -> int:
    """Smallest integer ``R >= 2 ln(K / sqrt(delta)) / ln B`` (at least 1).

    With that many repetitions ``K**2 * B**-R <= delta``.
    """
    exact = 2.0 * math.log(req.K / math.sqrt(req.delta)) / math.log(req.B)
    # snap values that are integral up to rounding noise, e.g. 5.999999999999999
    nearest = round(exact)
    if abs(exact - nearest) <= 1e-9 * max(1.0, abs(exact)):
        exact = float(nearest)
    return max(1, math.ceil(exact))


def audit_distinguishability(specs: List[HashSpec], K: int) -> List[Tuple[int, int]]:
    """All pairs ``(i, j)``, ``i < j < K``, that share a bucket under every spec.

    Classes are grouped by their ``R``-tuple of buckets, which costs
    ``O(K R log K)`` instead of scanning all pairs.
    """
    if any(s.universe < K for s in specs):
        raise ValueError("every spec must cover the K classes")
    table = bucket_table(specs, K)
    _, inverse = np.unique(table.T, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    order = np.argsort(inverse, kind="stable")
    boundaries = np.flatnonzero(np.diff(inverse[order])) + 1
    pairs = []
    for group in np.split(order, boundaries):
        members = np.sort(group)
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                pairs.append((int(members[a]), int(members[b])))
    pairs.sort()
    return pairs


@dataclass(frozen=True)
class CostReport:
    K: int
    B: int
    R: int
    d: int
    model_floats: int
    bias_floats: int
    inference_mults: int
    oaa_model_floats: int
    reduction_ratio: float

    @property
    def model_bytes(self) -> int:
        return 8 * (self.model_floats + self.bias_floats)

    @property
    def oaa_model_bytes(self) -> int:
        return 8 * (self.oaa_model_floats + self.K)

    def as_dict(self) -> Dict[str, object]:
        out = asdict(self)
        out["model_bytes"] = self.model_bytes
        out["oaa_model_bytes"] = self.oaa_model_bytes
        return out


def _checked(value: int, what: str) -> int:
    if value > _U64_MAX:
        raise OverflowError(f"{what}={value} does not fit in 64 bits")
    return value


def cost_report(K: int, B: int, R: int, d: int) -> CostReport:
    """Parameter and multiply counts of MACH versus a one-vs-all softmax.

    Weights (``B*R*d``) and biases (``B*R``) are counted separately.
    """
    for name, v in (("K", K), ("B", B), ("R", R), ("d", d)):
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v}")
    K, B, R, d = int(K), int(B), int(R), int(d)
    model = _checked(B * R * d, "model_floats")
    mults = _checked(R * B * d + K * R, "inference_mults")
    oaa = _checked(K * d, "oaa_model_floats")
    _checked(8 * (model + B * R), "model_bytes")
    return CostReport(K, B, R, d, model, B * R, mults, oaa, oaa / model)


def collision_rates(K: int, B: int, R: int, trials: int, seed: int = 0, p: int = MERSENNE_61):
    """Monte Carlo over fresh Carter-Wegman families.

    Returns ``(pair_freq, any_freq)``: a ``K x K`` matrix with the fraction of
    trials in which classes ``i`` and ``j`` collide under all ``R`` functions,
    and the fraction of trials with at least one such pair.
    """
    if p != MERSENNE_61:
        raise ValueError("vectorised Monte Carlo only supports p = 2**61 - 1")
    rng = np.random.default_rng(seed)
    pair_counts = np.zeros((K, K), dtype=np.int64)
    any_count = 0
    ids = np.arange(K, dtype=np.uint64)
    chunk = max(1, min(trials, 20000))
    done = 0
    iu = np.triu_indices(K, 1)
    while done < trials:
        n = min(chunk, trials - done)
        a = rng.integers(1, p, size=(n, R, 1), dtype=np.uint64)
        b = rng.integers(0, p, size=(n, R, 1), dtype=np.uint64)
        h = (_mulmod_p61(a, ids[None, None, :]) + b) % np.uint64(p) % np.uint64(B)
        # same[t, i, j]: classes i, j share a bucket in every function of trial t
        same = np.all(h[:, :, :, None] == h[:, :, None, :], axis=1)
        pair_counts += same.sum(axis=0)
        any_count += int(np.any(same[:, iu[0], iu[1]], axis=1).sum())
        done += n
    return pair_counts / trials, any_count / trials
