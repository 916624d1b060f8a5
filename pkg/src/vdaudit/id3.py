"""ID3 decision trees with an optional Laplace-noised (differentially private)
training mode.

Both trainers share one recursive builder; the private mode only swaps exact
counts for noised ones. Split scores use the count form

    V(A) = sum_j sum_c N_jc * log(N_jc / N_j)

which, on exact counts, equals -|T| * H(C|A) and therefore ranks attributes
exactly like information gain. Under noise, counts inside the logarithm are
floored at 1e-9 so the score stays finite; the outer multiplier is left raw.

Numeric columns are discretized into (up to) 10 equal-frequency bins whose
edges are computed from the training data and stored on the tree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .dataset import CATEGORICAL, NUMERIC, Dataset

TREE_FORMAT_VERSION = 1
LOG_FLOOR = 1e-9
NUMERIC_BINS = 10


class Id3Error(Exception):
    pass


@dataclass(frozen=True)
class DpConfig:
    """Privacy budget for one tree-training run."""

    epsilon: float
    noise_enabled: bool = True

    def __post_init__(self):
        if self.noise_enabled and not self.epsilon > 0:
            raise Id3Error(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class SplitScore:
    """Score for one candidate attribute at one node.

    ``branch_counts`` holds the (possibly noised) per-branch totals N_j and
    ``branch_class_counts`` the per-branch per-class counts N_jc actually used
    in the score.
    """

    column: int
    score: float
    branch_counts: np.ndarray
    branch_class_counts: np.ndarray


@dataclass
class Leaf:
    probs: np.ndarray


@dataclass
class Split:
    column: int
    children: dict[int, "Leaf | Split"]
    fallback: Leaf


@dataclass
class DecisionTree:
    root: Leaf | Split
    depth_limit: int
    class_count: int
    column_names: list[str]
    column_kinds: list[str]
    class_column: int
    bin_edges: dict[int, np.ndarray]
    epsilon: float | None = None


# --- Laplace sampling --------------------------------------------------------


def sample_laplace(scale: float, u) -> np.ndarray | float:
    """Inverse-CDF Laplace(0, scale) draw from uniform variate(s) u in (0, 1).

    u must lie strictly inside the open interval; callers drawing from a
    half-open generator are expected to resample boundary hits.
    """
    if not scale > 0:
        raise Id3Error(f"scale must be positive, got {scale}")
    arr = np.asarray(u, dtype=np.float64)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise Id3Error("uniform variate outside the open interval (0, 1)")
    shifted = arr - 0.5
    out = -scale * np.sign(shifted) * np.log1p(-2.0 * np.abs(shifted))
    return out if arr.ndim else float(out)


def _open_uniform(rng: np.random.Generator, size: int) -> np.ndarray:
    # rng.random() covers [0, 1); resample exact zeros to stay in the open interval
    u = rng.random(size)
    while True:
        zeros = u == 0.0
        if not zeros.any():
            return u
        u[zeros] = rng.random(int(zeros.sum()))


def _draw_laplace(rng: np.random.Generator, scale: float, size: int) -> np.ndarray:
    return np.asarray(sample_laplace(scale, _open_uniform(rng, size)))


# --- split scoring -----------------------------------------------------------


def score_attribute(
    branch_values: np.ndarray,
    labels: np.ndarray,
    column: int,
    n_branches: int,
    n_classes: int,
    noise: Callable[[int], np.ndarray] | None = None,
) -> SplitScore:
    """Count-form split score for one attribute over one node's records.

    ``branch_values`` are the attribute's branch codes (ints < n_branches) for
    the node's records and ``labels`` the class codes. ``noise`` draws a batch
    of additive perturbations; None scores exact counts.
    """
    joint = np.bincount(
        branch_values * n_classes + labels, minlength=n_branches * n_classes
    ).astype(np.float64)
    class_counts = joint.reshape(n_branches, n_classes)
    branch_counts = class_counts.sum(axis=1)
    if noise is not None:
        branch_counts = branch_counts + noise(n_branches)
        class_counts = class_counts + noise(n_branches * n_classes).reshape(
            n_branches, n_classes
        )
    ratio = np.log(np.maximum(class_counts, LOG_FLOOR)) - np.log(
        np.maximum(branch_counts, LOG_FLOOR)
    )[:, None]
    score = float(np.sum(class_counts * ratio))
    return SplitScore(column, score, branch_counts, class_counts)


# --- training ----------------------------------------------------------------


class _Noiser:
    """Laplace perturbations for one DP training run, drawn in a fixed order."""

    def __init__(self, epsilon: float, rng: np.random.Generator):
        self.epsilon = epsilon
        self.rng = rng

    def score_noise(self, n_candidates: int) -> Callable[[int], np.ndarray]:
        scale = 2.0 * n_candidates / self.epsilon
        return lambda size: _draw_laplace(self.rng, scale, size)

    def leaf_counts(self, counts: np.ndarray) -> np.ndarray:
        # per-class noisy count, resampled while negative
        out = np.empty_like(counts, dtype=np.float64)
        for c, exact in enumerate(counts):
            while True:
                noisy = float(exact) + float(_draw_laplace(self.rng, 1.0 / self.epsilon, 1)[0])
                if noisy >= 0.0:
                    out[c] = noisy
                    break
        return out


def _leaf_from_counts(counts: np.ndarray, noiser: _Noiser | None) -> Leaf:
    if noiser is not None:
        counts = noiser.leaf_counts(counts)
    total = counts.sum()
    if total <= 0.0:
        probs = np.full(len(counts), 1.0 / len(counts))
    else:
        probs = counts / total
    probs.setflags(write=False)
    return Leaf(probs)


def _build_node(
    B: np.ndarray,
    labels: np.ndarray,
    domains: dict[int, np.ndarray],
    idx: np.ndarray,
    candidates: list[int],
    depth_left: int,
    parent: Leaf | None,
    n_classes: int,
    noiser: _Noiser | None,
) -> Leaf | Split:
    if idx.size == 0:
        # empty branch: private mode votes on noisy zero counts, exact mode
        # inherits the parent's distribution
        if noiser is not None:
            return _leaf_from_counts(np.zeros(n_classes), noiser)
        return Leaf(parent.probs)

    counts = np.bincount(labels[idx], minlength=n_classes).astype(np.float64)
    pure = counts.max() == idx.size
    if depth_left == 0 or not candidates or pure:
        return _leaf_from_counts(counts, noiser)

    best: SplitScore | None = None
    for col in candidates:
        noise = noiser.score_noise(len(candidates)) if noiser is not None else None
        # bin codes can be sparse (numeric columns with few distinct values);
        # score over their rank in the column's sorted domain
        codes = np.searchsorted(domains[col], B[idx, col])
        s = score_attribute(
            codes, labels[idx], col, len(domains[col]), n_classes, noise
        )
        if best is None or s.score > best.score:
            best = s
    fallback = _leaf_from_counts(counts, noiser)
    remaining = [c for c in candidates if c != best.column]
    children: dict[int, Leaf | Split] = {}
    for value in domains[best.column]:
        sub = idx[B[idx, best.column] == value]
        children[int(value)] = _build_node(
            B, labels, domains, sub, remaining, depth_left - 1, fallback, n_classes, noiser
        )
    return Split(best.column, children, fallback)


def _branch_matrix(
    train: Dataset,
) -> tuple[np.ndarray, dict[int, np.ndarray], dict[int, np.ndarray], list[int]]:
    """Branch codes per feature column, their domains, and numeric bin edges."""
    schema = train.schema
    class_idx = schema.column_index(schema.class_column)
    n = len(train)
    B = np.zeros((n, len(schema.columns)), dtype=np.int64)
    bin_edges: dict[int, np.ndarray] = {}
    feature_cols: list[int] = []
    for i, col in enumerate(schema.columns):
        if i == class_idx:
            continue
        feature_cols.append(i)
        values = train.records[:, i]
        if col.kind == NUMERIC:
            qs = np.linspace(0.0, 1.0, NUMERIC_BINS + 1)[1:-1]
            edges = np.unique(np.quantile(values, qs))
            bin_edges[i] = edges
            B[:, i] = np.searchsorted(edges, values, side="right")
        else:
            B[:, i] = values.astype(np.int64)
    domains = {i: np.unique(B[:, i]) for i in feature_cols}
    return B, domains, bin_edges, feature_cols


def _train(train: Dataset, depth: int, noiser: _Noiser | None, epsilon: float | None) -> DecisionTree:
    if len(train) == 0:
        raise Id3Error("cannot train on an empty dataset")
    if depth < 0:
        raise Id3Error(f"depth must be >= 0, got {depth}")
    schema = train.schema
    B, domains, bin_edges, feature_cols = _branch_matrix(train)
    labels = train.class_labels()
    n_classes = train.class_count()
    root = _build_node(
        B,
        labels,
        domains,
        np.arange(len(train)),
        feature_cols,
        depth,
        None,
        n_classes,
        noiser,
    )
    return DecisionTree(
        root=root,
        depth_limit=depth,
        class_count=n_classes,
        column_names=[c.name for c in schema.columns],
        column_kinds=[c.kind for c in schema.columns],
        class_column=schema.column_index(schema.class_column),
        bin_edges=bin_edges,
        epsilon=epsilon,
    )


def train_id3(train: Dataset, depth: int) -> DecisionTree:
    """Plain ID3 with a depth cap; splits ranked by information gain."""
    return _train(train, depth, None, None)


def train_dp_id3(train: Dataset, depth: int, dp: DpConfig, seed: int = 0) -> DecisionTree:
    """ID3 with Laplace-perturbed counts at scoring and voting time.

    Per-class leaf counts receive Lap(0, 1/epsilon) noise, resampled while
    negative. At internal nodes both the per-branch totals and the per-branch
    per-class counts receive Lap(0, 2m/epsilon) where m is the number of
    candidate attributes at that node. With ``noise_enabled=False`` the run
    collapses to :func:`train_id3` exactly.
    """
    if not dp.noise_enabled:
        return _train(train, depth, None, None)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 2)))
    return _train(train, depth, _Noiser(dp.epsilon, rng), dp.epsilon)


# --- prediction --------------------------------------------------------------


def _branch_codes(tree: DecisionTree, column: int, values: np.ndarray) -> np.ndarray:
    if tree.column_kinds[column] == NUMERIC:
        return np.searchsorted(tree.bin_edges[column], values, side="right")
    return values.astype(np.int64)


def _fill_probs(
    tree: DecisionTree, node: Leaf | Split, X: np.ndarray, idx: np.ndarray, out: np.ndarray
) -> None:
    if isinstance(node, Leaf):
        out[idx] = node.probs
        return
    codes = _branch_codes(tree, node.column, X[idx, node.column])
    matched = np.zeros(idx.size, dtype=bool)
    for value, child in node.children.items():
        m = codes == value
        if m.any():
            _fill_probs(tree, child, X, idx[m], out)
            matched |= m
    if not matched.all():
        # branch value unseen in training: the node's own distribution answers
        out[idx[~matched]] = node.fallback.probs


def predict_proba(tree: DecisionTree, ds: Dataset) -> np.ndarray:
    """Class-probability vectors, one row per record; rows sum to 1."""
    out = np.empty((len(ds), tree.class_count), dtype=np.float64)
    _fill_probs(tree, tree.root, ds.records, np.arange(len(ds)), out)
    return out


def predict(tree: DecisionTree, ds: Dataset) -> np.ndarray:
    """Predicted class codes (argmax, lowest index on ties)."""
    return np.argmax(predict_proba(tree, ds), axis=1)


def accuracy(tree: DecisionTree, ds: Dataset) -> float:
    if len(ds) == 0:
        raise Id3Error("accuracy over an empty dataset is undefined")
    return float(np.mean(predict(tree, ds) == ds.class_labels()))


# --- serialization -----------------------------------------------------------


def _node_to_dict(node: Leaf | Split) -> dict:
    if isinstance(node, Leaf):
        return {"leaf": node.probs.tolist()}
    return {
        "column": node.column,
        "fallback": node.fallback.probs.tolist(),
        "children": {str(v): _node_to_dict(c) for v, c in node.children.items()},
    }


def _node_from_dict(raw: dict) -> Leaf | Split:
    if "leaf" in raw:
        return Leaf(np.array(raw["leaf"], dtype=np.float64))
    return Split(
        column=int(raw["column"]),
        children={int(v): _node_from_dict(c) for v, c in raw["children"].items()},
        fallback=Leaf(np.array(raw["fallback"], dtype=np.float64)),
    )


def tree_to_dict(tree: DecisionTree) -> dict:
    return {
        "format_version": TREE_FORMAT_VERSION,
        "kind": "decision_tree",
        "depth_limit": tree.depth_limit,
        "class_count": tree.class_count,
        "column_names": tree.column_names,
        "column_kinds": tree.column_kinds,
        "class_column": tree.class_column,
        "bin_edges": {str(k): v.tolist() for k, v in tree.bin_edges.items()},
        "epsilon": tree.epsilon,
        "root": _node_to_dict(tree.root),
    }


def tree_from_dict(raw: dict) -> DecisionTree:
    if raw.get("format_version") != TREE_FORMAT_VERSION or raw.get("kind") != "decision_tree":
        raise Id3Error("not a recognized decision tree document")
    return DecisionTree(
        root=_node_from_dict(raw["root"]),
        depth_limit=int(raw["depth_limit"]),
        class_count=int(raw["class_count"]),
        column_names=list(raw["column_names"]),
        column_kinds=list(raw["column_kinds"]),
        class_column=int(raw["class_column"]),
        bin_edges={int(k): np.array(v, dtype=np.float64) for k, v in raw["bin_edges"].items()},
        epsilon=raw["epsilon"],
    )


def save_tree(tree: DecisionTree, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(tree_to_dict(tree), fh, sort_keys=True)


def load_tree(path: str | Path) -> DecisionTree:
    with open(path, "r", encoding="utf-8") as fh:
        return tree_from_dict(json.load(fh))
