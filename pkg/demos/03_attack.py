"""
Membership inference against an overfit tree
============================================

The attacker sees the target's prediction probability vector for a record and
guesses whether that record was in the training set. Training members sit in
sharper leaves than fresh records, and per-class attack MLPs learn exactly
that difference. The target model itself plays the shadow model role, which
is the strongest attacker the scheme admits.
"""

from vdaudit.dataset import SplitSpec, sample_attack_data, split
from vdaudit.id3 import accuracy, train_id3
from vdaudit.mia import MlpConfig, build_attack_training_set, evaluate_mia, train_attack_model
from vdaudit.synthetic import memorizable_dataset

ds = memorizable_dataset(seed=12, n=800)
spec = SplitSpec(0.5, 0.15, 0.20, seed=4)
train, test = split(ds, spec)

target = train_id3(train, depth=12)
print(f"target: train acc {accuracy(target, train):.3f}, test acc {accuracy(target, test):.3f}")
gap = accuracy(target, train) - accuracy(target, test)
print(f"overfit gap {gap:.3f}  (the attack feeds on this)")

# members come from the training split, non-members from the test split;
# one slice trains the attack models, a disjoint slice evaluates them
attack_members, attack_non, eval_members, eval_non = sample_attack_data(train, test, spec)
ats = build_attack_training_set(target, attack_members, attack_non)
print("attack training buckets per class:", ats.bucket_sizes())

model = train_attack_model(ats, MlpConfig(), seed=9)
result = evaluate_mia(model, target, eval_members, eval_non)
precision = "n/a" if result.precision is None else f"{result.precision:.3f}"
print(f"attack precision {precision}, recall {result.recall:.3f}")
print(f"({result.true_positives} true positives, {result.false_positives} false positives)")
