"""Check the beta/3 revenue bound on a few planted instances.

For each instance both online algorithms see the same stream; the optimum
comes from enumerating every binary hierarchy over the points.
"""
import math

from memtree.evaluation import evaluate_instances, moseley_wang_revenue
from memtree.insertion import ThresholdPolicy

# a hand-sized example first
w = [[0, 0.9, 0.1], [0.9, 0, 0.2], [0.1, 0.2, 0]]
for h in [((0, 1), 2), ((0, 2), 1), ((1, 2), 0)]:
    print(h, moseley_wang_revenue(h, w))

lam = 0.5
beta = math.exp(-lam)
policy = ThresholdPolicy(0.4, lam, "main-text")
print(f"\nbeta = {beta:.4f}")
print(f"{'i':>3} {'n':>2} {'opt':>8} {'otd':>8} {'tree':>8} {'bound':>8}  ok")
misses = 0
for i, r in evaluate_instances(40, 7, beta, seed=1, policy=policy):
    ok = r.bound_holds
    misses += not ok
    print(f"{i:3d} {r.n:2d} {r.optimal_revenue:8.3f} {r.otd_revenue:8.3f} "
          f"{r.memtree_revenue:8.3f} {r.bound:8.3f}  {'yes' if ok else 'NO'}")
print(f"\n{misses} of 40 instances break the bound")
