# coding: utf-8

# # Recovering class probabilities from bucket probabilities
#
# If a repetition's classifier were perfect it would output, for bucket b, the
# total probability of the classes hashed to b. Averaging that over the R
# repetitions and correcting for the 1/B background gives an unbiased estimate
# of every class probability.

import numpy as np

from mach.core import merge_probabilities, scores_from_meta
from mach.hashing import bucket_table, make_hash_family

p = np.array([0.4, 0.25, 0.15, 0.1, 0.07, 0.03])
K, B = len(p), 2

# Exact check: average over every possible map from 6 classes to 2 buckets.

import itertools

maps = np.array(list(itertools.product(range(B), repeat=K)))
est = np.mean([scores_from_meta(merge_probabilities(p, m[None], B)[None], m[None])[0] for m in maps],
              axis=0)
print("truth   ", p)
print("average ", est.round(15))

# With a real hash family and growing R the estimate concentrates around p.

for R in (1, 4, 16, 64):
    table = bucket_table(make_hash_family(K, B, R, seed=3), K)
    meta = merge_probabilities(p, table, B)[None]
    print(R, scores_from_meta(meta, table)[0].round(3))

# The min and median estimators are biased but often rank classes just as well.

table = bucket_table(make_hash_family(K, 4, 16, seed=3), K)
meta = merge_probabilities(p, table, 4)[None]
for est_kind in ("unbiased", "min", "median"):
    print(est_kind, scores_from_meta(meta, table, est_kind)[0].round(3))
