# Deletion-based mitigation, step by step.
#
# Start from a dataset with an engineered group imbalance: two point clumps,
# the protected group concentrated on the first, the unprotected on the
# second. The solver picks per-(group, cluster) deletion counts that scale
# the distribution difference down to a chosen fraction.

import numpy as np

from vdaudit.dataset import binarize_group
from vdaudit.fairpick import (
    aggregate_features,
    apply_plan,
    choose_k,
    compute_dvar,
    dvar_after_plan,
    fairpick_with_diagnostics,
    solve_deletions,
)
from vdaudit.synthetic import two_clump_skew

ds = two_clump_skew(counts=((70, 30), (30, 70)))
groups = binarize_group(ds, "grp")

k = choose_k(ds, groups, min_per_cluster=10, seed=0)
cd = aggregate_features(ds, groups, k, seed=0)
print(f"{len(ds)} records, k = {k} clusters")
print("counts (rows: protected, unprotected):")
print(cd.counts)

dvar = compute_dvar(cd)
print("\ndvar before:")
print(np.round(dvar, 4))

T = 0.5
plan = solve_deletions(cd, T, refine_passes=5)
print(f"\ndeletion plan for T = {T}:")
print(plan.deletions)
print(f"residual {plan.residual:.2e}, "
      f"{plan.ignored_negative_requests} insertion requests ignored")

print("\ndvar after (target is T * before):")
print(np.round(dvar_after_plan(cd, plan.deletions), 4))

reduced = apply_plan(ds, cd, plan, seed=0)
print(f"\nkept {len(reduced)} of {len(ds)} records")

# the one-call pipeline does the same per class stratum; with two label
# values each class is mitigated independently
multi = two_clump_skew(counts=((140, 60), (60, 140)), n_classes=2)
result = fairpick_with_diagnostics(
    multi, binarize_group(multi, "grp"), threshold=0.6, min_per_cluster=10, seed=0
)
for p in result.plans:
    print(f"\nclass {p.class_label}: k = {p.k}, deleted {p.deleted_total}, "
          f"deletions {p.deletions}")
print(f"reduced dataset: {len(result.dataset)} of {len(multi)}")
