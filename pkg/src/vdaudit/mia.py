"""Membership inference against a trained decision tree.

The attack follows the strongest-attacker setup: the target model doubles as
the shadow model, so attack training examples are the target's own probability
vectors for known members (training records) and non-members (testing
records). Examples are bucketed by the target's predicted class and one small
binary MLP is trained per bucket; at inference a record is routed to the
bucket of its predicted class and labeled member when the MLP's member
probability reaches 0.5.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .id3 import DecisionTree, predict_proba

WEIGHTS_FORMAT_VERSION = 1


class MiaError(Exception):
    pass


@dataclass(frozen=True)
class MlpConfig:
    hidden_units: int = 300
    epochs: int = 100
    learning_rate: float = 0.01
    batch_size: int = 32


@dataclass
class BinaryMlp:
    """One-hidden-layer rectifier network with a 2-way softmax output."""

    w1: np.ndarray  # (input_dim, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden, 2)
    b2: np.ndarray  # (2,)

    @classmethod
    def init(cls, input_dim: int, hidden: int, rng: np.random.Generator) -> "BinaryMlp":
        # scaled normal init keeps early softmax outputs near uniform
        w1 = rng.normal(0.0, np.sqrt(2.0 / input_dim), size=(input_dim, hidden))
        w2 = rng.normal(0.0, np.sqrt(2.0 / hidden), size=(hidden, 2))
        return cls(w1, np.zeros(hidden), w2, np.zeros(2))

    def forward(self, X: np.ndarray) -> np.ndarray:
        """Class probabilities, shape (n, 2), rows summing to 1."""
        h = np.maximum(X @ self.w1 + self.b1, 0.0)
        logits = h @ self.w2 + self.b2
        logits = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        return e / e.sum(axis=1, keepdims=True)

    def loss(self, X: np.ndarray, y: np.ndarray) -> float:
        p = self.forward(X)
        return float(-np.mean(np.log(p[np.arange(len(y)), y] + 1e-12)))

    def gradients(
        self, X: np.ndarray, y: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Mean cross-entropy gradients for (w1, b1, w2, b2)."""
        n = X.shape[0]
        pre = X @ self.w1 + self.b1
        h = np.maximum(pre, 0.0)
        logits = h @ self.w2 + self.b2
        logits = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        p = e / e.sum(axis=1, keepdims=True)
        d_logits = p.copy()
        d_logits[np.arange(n), y] -= 1.0
        d_logits /= n
        g_w2 = h.T @ d_logits
        g_b2 = d_logits.sum(axis=0)
        d_h = d_logits @ self.w2.T
        d_pre = d_h * (pre > 0.0)
        g_w1 = X.T @ d_pre
        g_b1 = d_pre.sum(axis=0)
        return g_w1, g_b1, g_w2, g_b2

    def train(
        self, X: np.ndarray, y: np.ndarray, cfg: MlpConfig, rng: np.random.Generator
    ) -> list[float]:
        """Mini-batch gradient descent; returns the per-epoch loss trace."""
        n = X.shape[0]
        history = []
        for _ in range(cfg.epochs):
            if cfg.batch_size >= n:
                order = np.arange(n)  # full batch, fixed order
            else:
                order = rng.permutation(n)
            for start in range(0, n, cfg.batch_size):
                sel = order[start : start + cfg.batch_size]
                g_w1, g_b1, g_w2, g_b2 = self.gradients(X[sel], y[sel])
                self.w1 -= cfg.learning_rate * g_w1
                self.b1 -= cfg.learning_rate * g_b1
                self.w2 -= cfg.learning_rate * g_w2
                self.b2 -= cfg.learning_rate * g_b2
            history.append(self.loss(X, y))
        return history

    def member_probability(self, X: np.ndarray) -> np.ndarray:
        return self.forward(X)[:, 1]


@dataclass(frozen=True)
class ConstantPredictor:
    """Fallback for class buckets too degenerate to train on."""

    bit: int

    def member_probability(self, X: np.ndarray) -> np.ndarray:
        return np.full(X.shape[0], float(self.bit))


@dataclass
class AttackTrainingSet:
    """Per predicted-class bucket: probability vectors and membership bits."""

    class_count: int
    vectors: dict[int, np.ndarray]
    bits: dict[int, np.ndarray]

    def bucket_sizes(self) -> dict[int, int]:
        return {c: len(b) for c, b in self.bits.items()}


@dataclass
class AttackModel:
    class_count: int
    models: dict[int, BinaryMlp | ConstantPredictor]
    config: MlpConfig


@dataclass
class MiaResult:
    precision: float | None  # None when nothing was predicted member
    recall: float
    member_predictions: np.ndarray
    nonmember_predictions: np.ndarray
    member_probs: np.ndarray  # target probability vectors, member eval set
    nonmember_probs: np.ndarray
    member_true_class: np.ndarray
    nonmember_true_class: np.ndarray

    @property
    def true_positives(self) -> int:
        return int(self.member_predictions.sum())

    @property
    def false_positives(self) -> int:
        return int(self.nonmember_predictions.sum())


def build_attack_training_set(
    target: DecisionTree, attack_members: Dataset, attack_nonmembers: Dataset
) -> AttackTrainingSet:
    """Label the target's probability vectors with membership bits, bucketed
    by the target's predicted class."""
    if len(attack_members) == 0 or len(attack_nonmembers) == 0:
        raise MiaError("attack training needs at least one member and one non-member")
    vec_m = predict_proba(target, attack_members)
    vec_n = predict_proba(target, attack_nonmembers)
    vectors = np.vstack([vec_m, vec_n])
    bits = np.concatenate(
        [np.ones(len(attack_members), dtype=np.int64), np.zeros(len(attack_nonmembers), dtype=np.int64)]
    )
    predicted = np.argmax(vectors, axis=1)
    by_class_vec: dict[int, np.ndarray] = {}
    by_class_bit: dict[int, np.ndarray] = {}
    for c in range(target.class_count):
        sel = predicted == c
        by_class_vec[c] = vectors[sel]
        by_class_bit[c] = bits[sel]
    return AttackTrainingSet(target.class_count, by_class_vec, by_class_bit)


def _balance(
    vectors: np.ndarray, bits: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Random undersampling of the majority membership bit."""
    ones = np.flatnonzero(bits == 1)
    zeros = np.flatnonzero(bits == 0)
    m = min(len(ones), len(zeros))
    keep_ones = rng.choice(ones, size=m, replace=False) if len(ones) > m else ones
    keep_zeros = rng.choice(zeros, size=m, replace=False) if len(zeros) > m else zeros
    keep = np.sort(np.concatenate([keep_ones, keep_zeros]))
    return vectors[keep], bits[keep]


def train_attack_model(
    ats: AttackTrainingSet, hyper: MlpConfig = MlpConfig(), seed: int = 0
) -> AttackModel:
    """Train one binary MLP per class bucket.

    Buckets are balanced by undersampling the majority membership bit. A
    bucket with fewer than 2 examples of either bit gets a constant predictor
    (majority bit; empty buckets and exact ties default to member).
    """
    models: dict[int, BinaryMlp | ConstantPredictor] = {}
    for c in range(ats.class_count):
        vectors = ats.vectors.get(c, np.empty((0, ats.class_count)))
        bits = ats.bits.get(c, np.empty(0, dtype=np.int64))
        rng = np.random.default_rng(np.random.SeedSequence((seed, 3, c)))
        n_member = int((bits == 1).sum())
        n_non = int((bits == 0).sum())
        if n_member < 2 or n_non < 2:
            bit = 1 if n_member >= n_non else 0
            models[c] = ConstantPredictor(bit)
            continue
        X, y = _balance(vectors, bits, rng)
        mlp = BinaryMlp.init(X.shape[1], hyper.hidden_units, rng)
        mlp.train(X, y, hyper, rng)
        models[c] = mlp
    return AttackModel(ats.class_count, models, hyper)


def _infer_bits(am: AttackModel, probs: np.ndarray) -> np.ndarray:
    predicted = np.argmax(probs, axis=1)
    out = np.zeros(len(probs), dtype=np.int64)
    for c in range(am.class_count):
        sel = predicted == c
        if sel.any():
            p = am.models[c].member_probability(probs[sel])
            out[sel] = (p >= 0.5).astype(np.int64)  # tie counts as member
    return out


def infer_membership(am: AttackModel, target: DecisionTree, record_ds: Dataset) -> np.ndarray:
    """Membership bits for every record of a dataset."""
    return _infer_bits(am, predict_proba(target, record_ds))


def evaluate_mia(
    am: AttackModel, target: DecisionTree, eval_members: Dataset, eval_nonmembers: Dataset
) -> MiaResult:
    """Precision and recall of the attack over held-out members/non-members.

    precision = TP / (TP + FP) over records predicted member (None when no
    record is predicted member); recall = TP / |members|.
    """
    if len(eval_members) == 0 or len(eval_nonmembers) == 0:
        raise MiaError("evaluation needs non-empty member and non-member sets")
    probs_m = predict_proba(target, eval_members)
    probs_n = predict_proba(target, eval_nonmembers)
    pred_m = _infer_bits(am, probs_m)
    pred_n = _infer_bits(am, probs_n)
    tp = int(pred_m.sum())
    fp = int(pred_n.sum())
    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / len(eval_members)
    return MiaResult(
        precision=precision,
        recall=recall,
        member_predictions=pred_m,
        nonmember_predictions=pred_n,
        member_probs=probs_m,
        nonmember_probs=probs_n,
        member_true_class=eval_members.class_labels(),
        nonmember_true_class=eval_nonmembers.class_labels(),
    )


# --- serialization -----------------------------------------------------------


def attack_model_to_dict(am: AttackModel) -> dict:
    models = {}
    for c, m in am.models.items():
        if isinstance(m, ConstantPredictor):
            models[str(c)] = {"constant": m.bit}
        else:
            models[str(c)] = {
                "w1": m.w1.tolist(),
                "b1": m.b1.tolist(),
                "w2": m.w2.tolist(),
                "b2": m.b2.tolist(),
            }
    return {
        "format_version": WEIGHTS_FORMAT_VERSION,
        "kind": "attack_model",
        "class_count": am.class_count,
        "config": {
            "hidden_units": am.config.hidden_units,
            "epochs": am.config.epochs,
            "learning_rate": am.config.learning_rate,
            "batch_size": am.config.batch_size,
        },
        "models": models,
    }


def attack_model_from_dict(raw: dict) -> AttackModel:
    if raw.get("format_version") != WEIGHTS_FORMAT_VERSION or raw.get("kind") != "attack_model":
        raise MiaError("not a recognized attack model document")
    models: dict[int, BinaryMlp | ConstantPredictor] = {}
    for key, m in raw["models"].items():
        if "constant" in m:
            models[int(key)] = ConstantPredictor(int(m["constant"]))
        else:
            models[int(key)] = BinaryMlp(
                np.array(m["w1"]), np.array(m["b1"]), np.array(m["w2"]), np.array(m["b2"])
            )
    cfg = raw["config"]
    return AttackModel(
        class_count=int(raw["class_count"]),
        models=models,
        config=MlpConfig(
            hidden_units=int(cfg["hidden_units"]),
            epochs=int(cfg["epochs"]),
            learning_rate=float(cfg["learning_rate"]),
            batch_size=int(cfg["batch_size"]),
        ),
    )


def save_attack_model(am: AttackModel, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(attack_model_to_dict(am), fh, sort_keys=True)


def load_attack_model(path: str | Path) -> AttackModel:
    with open(path, "r", encoding="utf-8") as fh:
        return attack_model_from_dict(json.load(fh))
