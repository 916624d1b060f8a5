"""
Vulnerability disparity: who does the attack catch?
===================================================

Attack recall restricted to the protected members minus recall on the
unprotected members. Zero means both groups leak equally; the per-bin
decomposition shows where along the target's confidence axis the gap lives.

The dataset below is engineered to leak unevenly. Protected records carry
near-unique feature combinations, so the tree memorizes them into tiny pure
leaves; unprotected records share a handful of combinations and end up in
large mixed leaves that look the same for members and non-members.
"""

import numpy as np

from vdaudit.dataset import (
    CATEGORICAL,
    Column,
    ProtectedSpec,
    Schema,
    SplitSpec,
    binarize_group,
    dataset_from_rows,
    sample_attack_data,
    split,
)
from vdaudit.id3 import train_id3
from vdaudit.metrics import VdInput, recall_by_bin, vulnerability_disparity
from vdaudit.mia import MlpConfig, build_attack_training_set, evaluate_mia, train_attack_model

rng = np.random.default_rng(17)
columns = tuple(Column(f"f{i}", CATEGORICAL) for i in range(4))
columns += (Column("grp", CATEGORICAL), Column("label", CATEGORICAL))
schema = Schema(columns, "label", (ProtectedSpec("grp", frozenset({"p"})),))
rows = [[c.name for c in columns]]
for _ in range(1200):
    if rng.random() < 0.3:  # protected: effectively unique combinations
        feats = [f"r{rng.integers(100_000)}" for _ in range(4)]
        grp = "p"
    else:  # unprotected: 3^4 possible combinations, heavily shared
        feats = [f"v{rng.integers(3)}" for _ in range(4)]
        grp = "u"
    rows.append([*feats, grp, f"c{rng.integers(2)}"])
ds = dataset_from_rows(rows, schema)

spec = SplitSpec(0.5, 0.15, 0.20, seed=2)
train, test = split(ds, spec)
target = train_id3(train, depth=10)

attack_members, attack_non, eval_members, eval_non = sample_attack_data(train, test, spec)
model = train_attack_model(build_attack_training_set(target, attack_members, attack_non),
                           MlpConfig(), seed=0)
result = evaluate_mia(model, target, eval_members, eval_non)

# the audit needs, per evaluation member: the attack's member/non-member bit,
# the group bit, and the target's probability for the record's true class
groups = binarize_group(eval_members, "grp")
true_class_probs = result.member_probs[
    np.arange(len(result.member_true_class)), result.member_true_class
]
vd_in = VdInput(result.member_predictions, groups.labels, true_class_probs)
print(f"overall VD: {vulnerability_disparity(vd_in):+.4f}")

report = recall_by_bin(vd_in)
print(f"members evaluated: protected {report.group_sizes[0]}, "
      f"unprotected {report.group_sizes[1]}\n")
print("bin        protected  unprotected   diff")
for (lo, hi), (rp, ru) in zip(report.bin_edges(), report.bin_recalls):
    print(f"[{lo:.1f},{hi:.1f})   {rp:9.4f}  {ru:11.4f}  {rp - ru:+.4f}")
diff = report.bin_recalls[:, 0] - report.bin_recalls[:, 1]
print(f"\nbin differences sum to {diff.sum():+.4f} == VD (identity holds by construction)")
