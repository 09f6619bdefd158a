# coding: utf-8

# # Hashing classes into buckets
#
# MACH never trains a K-way classifier. Each of its R repetitions first maps
# the K class ids into B buckets with an independently seeded 2-universal hash,
# then trains a small B-way classifier on the bucket ids.

import numpy as np

from mach.hashing import HashKind, bucket_table, hash_classes, make_hash_family

K, B, R = 12, 4, 3
specs = make_hash_family(K, B, R, seed=0)
for r, s in enumerate(specs):
    print(f"h_{r}(x) = (({s.a} * x + {s.b}) mod {s.p}) mod {s.buckets}")

# The R x K bucket table is what the estimators look up at prediction time.

table = bucket_table(specs, K)
print(table)

# A bucket holds about K/B classes. Class pairs sharing a bucket differ between
# repetitions, which is what lets the repetitions be combined.

for r in range(R):
    print(f"repetition {r}: bucket sizes {np.bincount(table[r], minlength=B).tolist()}")

# Hashing is a pure function of (seed, repetition index), so a family can be
# rebuilt anywhere from its seed.

again = make_hash_family(K, B, R, seed=0)
assert again == specs
print(hash_classes(specs[0], np.arange(K)))

# The cheaper odd-multiplier family keeps the low bits of a 64-bit product and
# needs a power-of-two B.

odd = make_hash_family(K, B, R, seed=0, kind=HashKind.ODD_MULTIPLIER)
print(bucket_table(odd, K))
