"""Synthetic dataset generators for tests and demonstration scripts.

Everything routes through the normal CSV row parser so generated data
exercises the same ingestion path as file-based data.
"""

from __future__ import annotations

import numpy as np

from .dataset import (
    CATEGORICAL,
    NUMERIC,
    Column,
    Dataset,
    ProtectedSpec,
    Schema,
    dataset_from_rows,
)


def random_dataset(
    seed: int,
    n: int = 120,
    n_features: int = 4,
    n_classes: int = 2,
    max_values: int = 5,
    numeric_fraction: float = 0.25,
    with_protected: bool = False,
) -> Dataset:
    """Random tabular data with a mix of categorical and numeric features."""
    rng = np.random.default_rng(seed)
    columns = []
    kinds = []
    for i in range(n_features):
        numeric = rng.random() < numeric_fraction
        kinds.append(NUMERIC if numeric else CATEGORICAL)
        columns.append(Column(f"f{i}", kinds[-1]))
    protected = ()
    if with_protected:
        columns.append(Column("grp", CATEGORICAL))
        protected = (ProtectedSpec("grp", frozenset({"p"})),)
    columns.append(Column("label", CATEGORICAL))
    schema = Schema(tuple(columns), "label", protected)

    header = [c.name for c in columns]
    rows = [header]
    cardinalities = [int(rng.integers(2, max_values + 1)) for _ in range(n_features)]
    for _ in range(n):
        row = []
        for i in range(n_features):
            if kinds[i] == NUMERIC:
                row.append(f"{rng.normal():.6f}")
            else:
                row.append(f"v{rng.integers(cardinalities[i])}")
        if with_protected:
            row.append("p" if rng.random() < 0.5 else "u")
        row.append(f"c{rng.integers(n_classes)}")
        rows.append(row)
    return dataset_from_rows(rows, schema)


def memorizable_dataset(
    seed: int,
    n: int = 800,
    n_features: int = 5,
    n_values: int = 12,
    with_protected: bool = True,
    protected_rate: float = 0.5,
) -> Dataset:
    """High-cardinality features with random labels.

    Feature combinations are mostly unique, so a moderately deep tree
    memorizes its training split; that separation between members and
    non-members is what a membership inference attack feeds on.
    """
    rng = np.random.default_rng(seed)
    columns = [Column(f"f{i}", CATEGORICAL) for i in range(n_features)]
    protected = ()
    if with_protected:
        columns.append(Column("grp", CATEGORICAL))
        protected = (ProtectedSpec("grp", frozenset({"p"})),)
    columns.append(Column("label", CATEGORICAL))
    schema = Schema(tuple(columns), "label", protected)
    rows = [[c.name for c in columns]]
    for _ in range(n):
        row = [f"v{rng.integers(n_values)}" for _ in range(n_features)]
        if with_protected:
            row.append("p" if rng.random() < protected_rate else "u")
        row.append(f"c{rng.integers(2)}")
        rows.append(row)
    return dataset_from_rows(rows, schema)


def two_clump_skew(
    counts=((70, 30), (30, 70)),
    separation: float = 10.0,
    n_classes: int = 1,
) -> Dataset:
    """Two point clumps whose (group x clump) occupancies are given exactly.

    ``counts[g][c]`` records land on clump c for group g (group 0 protected).
    All records of a clump share identical feature values, so K-means with
    k = 2 recovers the clumps and the group-vs-complement distribution
    difference per clump is fixed by the count table alone.
    """
    columns = (
        Column("x", NUMERIC),
        Column("y", NUMERIC),
        Column("grp", CATEGORICAL),
        Column("label", CATEGORICAL),
    )
    schema = Schema(columns, "label", (ProtectedSpec("grp", frozenset({"p"})),))
    rows = [["x", "y", "grp", "label"]]
    label_cycle = 0
    for g, tag in enumerate(("p", "u")):
        for c in range(2):
            coord = f"{c * separation:.1f}"
            for _ in range(counts[g][c]):
                rows.append([coord, coord, tag, f"c{label_cycle % n_classes}"])
                label_cycle += 1
    return dataset_from_rows(rows, schema)
