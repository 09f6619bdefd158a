# coding: utf-8

# # Planning R, auditing a family and counting parameters

from mach.analysis import (
    PlanRequest,
    audit_distinguishability,
    collision_rates,
    cost_report,
    plan_R,
    union_bound,
)
from mach.hashing import make_hash_family

# How many repetitions guarantee every pair of classes is separated somewhere,
# with failure probability at most delta?

for K, B, delta in ((100, 10, 0.01), (10**5, 32, 0.01), (10**5, 512, 0.001)):
    R = plan_R(PlanRequest(K, B, delta))
    print(f"K={K} B={B} delta={delta}: R={R}, union bound {union_bound(K, B, R):.2e}")

# The audit lists the pairs a concrete family fails to separate.

K, B = 200, 8
for R in (1, 2, 3, 5):
    pairs = audit_distinguishability(make_hash_family(K, B, R, seed=1), K)
    print(f"R={R}: {len(pairs)} indistinguishable pairs (expected {K * (K - 1) / 2 / B**R:.1f})")

# A pair collides in every repetition with probability 1/B**R.

pair, any_freq = collision_rates(20, 4, 3, 20000, seed=0)
print(f"mean pair rate {pair[0, 1:].mean():.5f} vs {4**-3:.5f}; some pair collides in {any_freq:.3f}")

# Cost of the ODP-sized configuration against one-vs-all.

rep = cost_report(105033, 32, 25, 422713)
for k, v in rep.as_dict().items():
    print(f"{k}={v}")
