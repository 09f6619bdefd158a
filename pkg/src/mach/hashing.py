"""2-universal hash functions mapping class ids onto a small set of buckets.

Two constructions are available:

* ``CARTER_WEGMAN``: ``h(x) = ((a*x + b) mod p) mod B`` with a prime ``p > K``.
  The default prime is the Mersenne prime ``2**61 - 1`` so the modular
  product can be computed exactly in unsigned 64-bit arithmetic.
* ``ODD_MULTIPLIER``: ``h(x) = (a*x mod 2**64) & (B - 1)`` with ``a`` odd and
  ``B`` a power of two. Keeping the low bits means ``h`` depends only on
  ``a mod B``, so there are just ``B/2`` distinct functions and classes that
  differ by a multiple of ``B`` always collide. It is kept for speed
  comparisons; Carter-Wegman is the default.

A family of ``R`` functions is derived from one master seed by seeding each
member with ``(seed, index)``, so growing ``R`` never changes earlier members.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np

__all__ = [
    "MERSENNE_61",
    "HashKind",
    "HashSpec",
    "make_hash_family",
    "hash_class",
    "hash_classes",
    "bucket_table",
    "identity_spec",
    "is_prime",
]

MERSENNE_61 = (1 << 61) - 1
_U64 = (1 << 64) - 1
_LOW30 = np.uint64((1 << 30) - 1)
_LOW31 = np.uint64((1 << 31) - 1)
_P61 = np.uint64(MERSENNE_61)


class HashKind(enum.IntEnum):
    CARTER_WEGMAN = 0
    ODD_MULTIPLIER = 1

    @classmethod
    def parse(cls, value: Union[str, int, "HashKind"]) -> "HashKind":
        if isinstance(value, HashKind):
            return value
        if isinstance(value, str):
            key = value.strip().lower().replace("-", "_")
            aliases = {
                "carter_wegman": cls.CARTER_WEGMAN,
                "cw": cls.CARTER_WEGMAN,
                "odd_multiplier": cls.ODD_MULTIPLIER,
                "odd": cls.ODD_MULTIPLIER,
            }
            if key not in aliases:
                raise ValueError(f"unknown hash kind {value!r}")
            return aliases[key]
        return cls(int(value))


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for every n < 3.3e24."""
    if n < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
    for q in small:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in small:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class HashSpec:
    """Parameters of one hash function ``[universe] -> [buckets]``.

    ``p`` is ignored (stored as 0) for the odd-multiplier construction.
    """

    kind: HashKind
    a: int
    b: int
    p: int
    buckets: int
    universe: int

    def __post_init__(self):
        object.__setattr__(self, "kind", HashKind.parse(self.kind))
        for name in ("a", "b", "p", "buckets", "universe"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
                raise TypeError(f"{name} must be an integer, got {type(v).__name__}")
            v = int(v)
            if not 0 <= v <= _U64:
                raise ValueError(f"{name}={v} does not fit in an unsigned 64-bit word")
            object.__setattr__(self, name, v)
        if self.buckets < 2:
            raise ValueError(f"bucket count must be >= 2, got {self.buckets}")
        if self.universe < 1:
            raise ValueError(f"universe must be positive, got {self.universe}")
        if self.kind is HashKind.CARTER_WEGMAN:
            if self.p <= self.universe:
                raise ValueError(f"prime p={self.p} must exceed the universe K={self.universe}")
            if not 1 <= self.a < self.p or not 0 <= self.b < self.p:
                raise ValueError("need 1 <= a < p and 0 <= b < p")
            if not is_prime(self.p):
                raise ValueError(f"p={self.p} is not prime")
        else:
            if self.a % 2 == 0:
                raise ValueError("odd-multiplier hash needs an odd multiplier a")
            if not _is_power_of_two(self.buckets):
                raise ValueError(
                    f"odd-multiplier hash needs a power-of-two bucket count, got {self.buckets}"
                )

    def __call__(self, i):
        return hash_classes(self, i) if np.ndim(i) else hash_class(self, i)


def identity_spec(universe: int, buckets: Optional[int] = None) -> HashSpec:
    """Carter-Wegman spec with ``a=1, b=0``: maps ``i -> i mod buckets``.

    With ``buckets >= universe`` this is injective, which turns MACH with one
    repetition into a plain one-vs-all softmax.
    """
    return HashSpec(HashKind.CARTER_WEGMAN, 1, 0, MERSENNE_61, buckets or universe, universe)


def _member_rng(seed: int, index: int, kind: HashKind) -> np.random.Generator:
    seq = np.random.SeedSequence([int(seed) & _U64, int(index), int(kind)])
    return np.random.Generator(np.random.PCG64(seq))


def make_hash_family(
    K: int,
    B: int,
    R: int,
    seed: int = 0,
    kind: Union[str, HashKind] = HashKind.CARTER_WEGMAN,
    prime: int = MERSENNE_61,
) -> List[HashSpec]:
    """Draw ``R`` independent hash functions ``[K] -> [B]``.

    Deterministic in ``(seed, K, B, R, kind, prime)``; member ``j`` depends
    only on ``(seed, j, kind)``.
    """
    kind = HashKind.parse(kind)
    if B < 2:
        raise ValueError(f"B must be >= 2, got {B}")
    if R < 1:
        raise ValueError(f"R must be >= 1, got {R}")
    if K < 1:
        raise ValueError(f"K must be positive, got {K}")
    if kind is HashKind.ODD_MULTIPLIER and not _is_power_of_two(B):
        raise ValueError(f"odd-multiplier hashing needs a power-of-two B, got {B}")
    if kind is HashKind.CARTER_WEGMAN and prime <= K:
        raise ValueError(f"prime {prime} must exceed K={K}")

    specs = []
    for j in range(R):
        rng = _member_rng(seed, j, kind)
        if kind is HashKind.CARTER_WEGMAN:
            a = int(rng.integers(1, prime, dtype=np.uint64))
            b = int(rng.integers(0, prime, dtype=np.uint64))
            specs.append(HashSpec(kind, a, b, prime, B, K))
        else:
            a = int(rng.integers(0, 1 << 63, dtype=np.uint64)) * 2 + 1
            specs.append(HashSpec(kind, a, 0, 0, B, K))
    return specs


def _mulmod_p61(a, x):
    """``(a * x) mod (2**61 - 1)`` for uint64 arrays with ``a < 2**61`` and ``x < 2**61``.

    Works on 31/30-bit limbs so no intermediate exceeds 64 bits.
    """
    a = np.asarray(a, dtype=np.uint64)
    x = np.asarray(x, dtype=np.uint64)
    s31, s30, s61 = np.uint64(31), np.uint64(30), np.uint64(61)
    a_lo, a_hi = a & _LOW31, a >> s31  # a_hi < 2**30
    x_lo, x_hi = x & _LOW31, x >> s31
    # a*x = a_hi*x_hi*2**62 + (a_hi*x_lo + a_lo*x_hi)*2**31 + a_lo*x_lo
    # and 2**62 == 2 (mod p), 2**61 == 1 (mod p)
    hh = a_hi * x_hi * np.uint64(2)  # < 2**61
    mid = a_hi * x_lo + a_lo * x_hi  # < 2**62
    mid_term = ((mid & _LOW30) << s31) + (mid >> s30)  # mid*2**31 mod p, < 2**62
    ll = a_lo * x_lo  # < 2**62
    ll = (ll & _P61) + (ll >> s61)
    acc = (hh % _P61) + (mid_term % _P61) + ll  # < 3*2**61 + small
    acc = (acc & _P61) + (acc >> s61)
    return acc % _P61


def hash_class(spec: HashSpec, i: int) -> int:
    """Bucket id of class ``i`` (scalar, exact integer arithmetic)."""
    i = int(i)
    if not 0 <= i < spec.universe:
        raise ValueError(f"class id {i} outside universe [0, {spec.universe})")
    if spec.kind is HashKind.CARTER_WEGMAN:
        return ((spec.a * i + spec.b) % spec.p) % spec.buckets
    return ((spec.a * i) & _U64) & (spec.buckets - 1)


def hash_classes(spec: HashSpec, ids) -> np.ndarray:
    """Vectorised :func:`hash_class`; returns an int64 array shaped like ``ids``."""
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= spec.universe):
        raise ValueError(f"class ids outside universe [0, {spec.universe})")
    x = ids.astype(np.uint64)
    if spec.kind is HashKind.ODD_MULTIPLIER:
        with np.errstate(over="ignore"):
            out = (np.uint64(spec.a) * x) & np.uint64(spec.buckets - 1)
    elif spec.p == MERSENNE_61:
        ax = _mulmod_p61(np.uint64(spec.a), x)
        out = (ax + np.uint64(spec.b)) % _P61 % np.uint64(spec.buckets)
    else:
        obj = x.astype(object)
        out = np.asarray((obj * spec.a + spec.b) % spec.p % spec.buckets, dtype=np.uint64)
    return out.astype(np.int64).reshape(ids.shape)


def bucket_table(specs, K: Optional[int] = None) -> np.ndarray:
    """``R x K`` table with entry ``[j, i] = h_j(i)``."""
    if not specs:
        raise ValueError("need at least one hash spec")
    K = specs[0].universe if K is None else K
    ids = np.arange(K, dtype=np.int64)
    return np.stack([hash_classes(s, ids) for s in specs])
