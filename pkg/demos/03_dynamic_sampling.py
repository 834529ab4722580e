"""
Dynamic sample budgets and selection policies
=============================================

One cached tree serves every budget: cutting at k = budget yields one
representative per cluster.  The middle policy picks the temporal median,
which bounds how far any cluster member can be from its representative.
"""

from eko import (
    Connectivity,
    Policy,
    agglomerate,
    gop_baseline,
    samples_for_budget,
    synthesize_stream,
    uniform_baseline,
)

features, _ = synthesize_stream(
    seed=3, n=5000, segments=10, rare_event_rate=0.0, noise_sigma=0.2
)
dendrogram = agglomerate(features, Connectivity.tight())

for budget in (5, 10, 25):
    ss = samples_for_budget(dendrogram, features, budget, Policy.MIDDLE)
    print(f"budget {budget:>3}: frames {ss.frame_ids[:8]}" + (" ..." if budget > 8 else ""))

# policies differ in where the representative sits inside the cluster
ss_first = samples_for_budget(dendrogram, features, 10, Policy.FIRST)
ss_mid = samples_for_budget(dendrogram, features, 10, Policy.MIDDLE)
ss_mean = samples_for_budget(dendrogram, features, 10, Policy.MEAN)
print("\nsame 10 clusters, three policies:")
for name, ss in (("first", ss_first), ("middle", ss_mid), ("mean", ss_mean)):
    print(f"  {name:>6}: {ss.frame_ids}")

print("\nper-cluster worst-case distance to the representative:")
for name, ss in (("first", ss_first), ("middle", ss_mid)):
    worst = max(
        max(e.frame_id - e.cluster_start, e.cluster_end - e.frame_id)
        for e in ss.entries
    )
    print(f"  {name:>6}: {worst} frames")

# the baselines ignore content entirely
uniform = uniform_baseline(5000, 10)
gop = gop_baseline(5000, 500)
print(f"\nuniform picks: {uniform.frame_ids}")
print(f"gop picks:     {gop.frame_ids}")
