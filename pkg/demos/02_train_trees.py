"""
Plain ID3 next to its differentially private variant
====================================================
"""

from vdaudit.dataset import SplitSpec, split
from vdaudit.id3 import DpConfig, accuracy, train_dp_id3, train_id3
from vdaudit.synthetic import memorizable_dataset

ds = memorizable_dataset(seed=11, n=600)
train, test = split(ds, SplitSpec(0.5, 0.15, 0.20, seed=1))

plain = train_id3(train, depth=8)
print(f"plain tree     train {accuracy(plain, train):.3f}  test {accuracy(plain, test):.3f}")

# the private trainer perturbs every count it looks at with Laplace noise:
# per-class leaf counts at scale 1/eps, split-scoring counts at 2m/eps
# where m is the number of candidate attributes at the node
for eps in (0.1, 1.0, 10.0, 100.0):
    tree = train_dp_id3(train, depth=8, dp=DpConfig(epsilon=eps), seed=2)
    print(f"dp eps={eps:<6g} train {accuracy(tree, train):.3f}  test {accuracy(tree, test):.3f}")

# noise_enabled=False short-circuits to the exact trainer; handy for tests
silent = train_dp_id3(train, depth=8, dp=DpConfig(1.0, noise_enabled=False))
assert accuracy(silent, train) == accuracy(plain, train)
print("noise-disabled run reproduces the plain tree")
