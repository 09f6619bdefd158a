import itertools
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mach.hashing import (
    MERSENNE_61,
    HashKind,
    HashSpec,
    _mulmod_p61,
    bucket_table,
    hash_class,
    hash_classes,
    identity_spec,
    is_prime,
    make_hash_family,
)


def test_family_is_deterministic():
    assert make_hash_family(10, 4, 3, seed=7) == make_hash_family(10, 4, 3, seed=7)


def test_family_differs_across_seeds():
    assert make_hash_family(10, 4, 3, seed=7) != make_hash_family(10, 4, 3, seed=8)


def test_growing_R_keeps_earlier_members():
    assert make_hash_family(50, 8, 6, seed=3)[:4] == make_hash_family(50, 8, 4, seed=3)


def test_odd_multiplier_needs_power_of_two():
    with pytest.raises(ValueError):
        make_hash_family(10, 3, 2, seed=0, kind=HashKind.ODD_MULTIPLIER)


@pytest.mark.parametrize("B", [0, 1])
def test_rejects_small_B(B):
    with pytest.raises(ValueError):
        make_hash_family(10, B, 2)


def test_family_invariants():
    specs = make_hash_family(100, 16, 5, seed=1)
    assert len(specs) == 5
    for s in specs:
        assert s.p > 100 and 1 <= s.a < s.p and 0 <= s.b < s.p
        assert s.buckets == 16 and s.universe == 100


def test_odd_multiplier_family_is_odd():
    for s in make_hash_family(100, 16, 20, seed=5, kind="odd-multiplier"):
        assert s.a % 2 == 1 and s.a < 2**64


def test_carter_wegman_examples():
    s = HashSpec(HashKind.CARTER_WEGMAN, 1, 0, 31, 4, 30)
    assert hash_class(s, 5) == 1
    assert hash_class(s, 8) == 0


def test_odd_multiplier_example():
    s = HashSpec(HashKind.ODD_MULTIPLIER, 3, 0, 0, 4, 10)
    assert hash_class(s, 7) == 1


def test_odd_multiplier_wraps_at_64_bits():
    a = 2**64 - 1
    s = HashSpec(HashKind.ODD_MULTIPLIER, a, 0, 0, 8, 100)
    for i in range(100):
        assert hash_class(s, i) == ((a * i) % 2**64) % 8
    np.testing.assert_array_equal(hash_classes(s, np.arange(100)), [hash_class(s, i) for i in range(100)])


def test_out_of_universe():
    s = make_hash_family(10, 4, 1)[0]
    with pytest.raises(ValueError):
        hash_class(s, 10)
    with pytest.raises(ValueError):
        hash_class(s, -1)
    with pytest.raises(ValueError):
        hash_classes(s, [0, 10])


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind=HashKind.CARTER_WEGMAN, a=1, b=0, p=10, buckets=4, universe=5),  # p not prime
        dict(kind=HashKind.CARTER_WEGMAN, a=1, b=0, p=7, buckets=4, universe=7),  # p <= K
        dict(kind=HashKind.CARTER_WEGMAN, a=0, b=0, p=7, buckets=4, universe=5),  # a = 0
        dict(kind=HashKind.CARTER_WEGMAN, a=1, b=7, p=7, buckets=4, universe=5),  # b >= p
        dict(kind=HashKind.CARTER_WEGMAN, a=1, b=0, p=7, buckets=1, universe=5),  # B = 1
        dict(kind=HashKind.ODD_MULTIPLIER, a=2, b=0, p=0, buckets=4, universe=5),  # even a
        dict(kind=HashKind.ODD_MULTIPLIER, a=3, b=0, p=0, buckets=6, universe=5),  # B not 2^k
    ],
)
def test_spec_invariants(kwargs):
    with pytest.raises(ValueError):
        HashSpec(**kwargs)


def test_is_prime_against_sieve():
    n = 5000
    sieve = np.ones(n, dtype=bool)
    sieve[:2] = False
    for i in range(2, int(n**0.5) + 1):
        if sieve[i]:
            sieve[i * i :: i] = False
    assert [is_prime(i) for i in range(n)] == list(sieve)
    assert is_prime(MERSENNE_61)
    assert not is_prime(MERSENNE_61 - 2)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, MERSENNE_61 - 1), st.lists(st.integers(0, 2**61 - 1), min_size=1, max_size=20))
def test_mulmod_matches_bigint(a, xs):
    got = _mulmod_p61(np.uint64(a), np.array(xs, dtype=np.uint64))
    assert [int(v) for v in got] == [a * x % MERSENNE_61 for x in xs]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 1000), st.integers(1, 2000))
def test_vectorised_matches_scalar(seed, B, K):
    spec = make_hash_family(K, B, 1, seed=seed)[0]
    ids = np.arange(K)
    np.testing.assert_array_equal(hash_classes(spec, ids), [hash_class(spec, i) for i in ids])


def test_generic_prime_path_matches_scalar():
    spec = HashSpec(HashKind.CARTER_WEGMAN, 123457, 99, 1_000_003, 17, 1000)
    np.testing.assert_array_equal(
        hash_classes(spec, np.arange(1000)), [hash_class(spec, i) for i in range(1000)]
    )


def test_identity_spec_is_injective():
    s = identity_spec(64)
    np.testing.assert_array_equal(hash_classes(s, np.arange(64)), np.arange(64))


def test_bucket_table_shape():
    specs = make_hash_family(30, 5, 4, seed=2)
    t = bucket_table(specs)
    assert t.shape == (4, 30) and t.min() >= 0 and t.max() < 5
    assert t[2, 7] == hash_class(specs[2], 7)


def test_stable_across_processes():
    code = "from mach.hashing import make_hash_family as f; print([(s.a, s.b) for s in f(100, 8, 3, 11)])"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True)
    here = [(s.a, s.b) for s in make_hash_family(100, 8, 3, 11)]
    assert out.stdout.strip() == str(here)


def _residue_counts(p, B):
    return [len(range(z, p, B)) for z in range(B)]


@pytest.mark.parametrize("p,B,K", [(7, 3, 5), (11, 4, 10), (13, 5, 6), (17, 2, 16)])
def test_pairwise_counts_match_exact_oracle(p, B, K):
    """Enumerate every (a, b); compare joint bucket counts with the closed form.

    For i != j, (a, b) -> (a*i + b, a*j + b) mod p is a bijection from
    [1, p) x [0, p) onto pairs (u, v) with u != v, so the count of
    (h(i), h(j)) == (z1, z2) is c(z1) c(z2) - [z1 == z2] c(z1), where c(z)
    counts residues in [0, p) congruent to z mod B.
    """
    c = _residue_counts(p, B)
    specs = [HashSpec(HashKind.CARTER_WEGMAN, a, b, p, B, K) for a in range(1, p) for b in range(p)]
    table = bucket_table(specs, K)
    total = len(specs)
    for i, j in itertools.combinations(range(K), 2):
        joint = np.zeros((B, B), dtype=int)
        np.add.at(joint, (table[:, i], table[:, j]), 1)
        expected = np.outer(c, c) - np.diag(c)
        np.testing.assert_array_equal(joint, expected)
    assert expected.sum() == total


@pytest.mark.parametrize("p,B", [(7, 3), (11, 4), (13, 5), (31, 4)])
def test_marginal_uniformity(p, B):
    """For fixed i, a*i + b mod p is uniform on [0, p) over all (a, b).

    So bucket z has frequency c(z)/p exactly: at most ceil(p/B)/p (overshoot
    bound) and at least floor(p/B)/p.
    """
    K = p - 1
    c = np.array(_residue_counts(p, B))
    specs = [HashSpec(HashKind.CARTER_WEGMAN, a, b, p, B, K) for a in range(1, p) for b in range(p)]
    table = bucket_table(specs, K)
    for i in range(K):
        freq = np.bincount(table[:, i], minlength=B) / len(specs)
        np.testing.assert_allclose(freq, c / p, rtol=0, atol=1e-15)
        assert np.all(freq - 1 / B <= math.ceil(p / B) / p - 1 / B + 1e-15)
        assert np.all(1 / B - freq <= 1 / B - (p // B) / p + 1e-15)


def test_odd_multiplier_low_bits_weakness():
    """Documented limitation: only a mod B matters, and x, x + B always collide."""
    specs = make_hash_family(64, 8, 12, seed=1, kind=HashKind.ODD_MULTIPLIER)
    table = bucket_table(specs, 64)
    assert len({tuple(row) for row in table}) <= 4
    assert np.all(table[:, :56] == table[:, 8:])
