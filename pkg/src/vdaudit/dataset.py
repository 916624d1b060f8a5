"""Tabular datasets: schema-driven CSV loading, encoding, splits, group labels.

Records are held as a dense float64 matrix. Categorical cells store integer
codes assigned in first-appearance order; numeric cells store the parsed
value unchanged. Rows with a missing cell are dropped at load time, so every
downstream consumer sees complete records only.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CATEGORICAL = "categorical"
NUMERIC = "numeric"


class DatasetError(Exception):
    """Base class for dataset-layer failures."""


class CsvParseError(DatasetError):
    """Malformed CSV content; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SchemaMismatchError(DatasetError):
    """Header row does not match the schema's column list."""


class GroupMapError(DatasetError):
    """A protected column value could not be mapped to a group."""


@dataclass(frozen=True)
class Column:
    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in (CATEGORICAL, NUMERIC):
            raise DatasetError(f"column {self.name!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class ProtectedSpec:
    """Group map for one protected column.

    ``protected_values`` name the protected group. When ``unprotected_values``
    is None every other observed value falls in the unprotected group;
    otherwise the two sets must cover all observed values and any value
    outside both is a :class:`GroupMapError`.
    """

    column: str
    protected_values: frozenset[str]
    unprotected_values: frozenset[str] | None = None

    def __post_init__(self):
        if not self.protected_values:
            raise DatasetError(f"protected column {self.column!r}: empty value set")
        if self.unprotected_values is not None:
            overlap = self.protected_values & self.unprotected_values
            if overlap:
                raise DatasetError(
                    f"protected column {self.column!r}: values {sorted(overlap)} "
                    "appear in both groups"
                )

    def side(self, value: str) -> bool | None:
        """True for protected, False for unprotected, None for unmapped."""
        if value in self.protected_values:
            return True
        if self.unprotected_values is None:
            return False
        if value in self.unprotected_values:
            return False
        return None


@dataclass(frozen=True)
class Schema:
    columns: tuple[Column, ...]
    class_column: str
    protected: tuple[ProtectedSpec, ...] = ()
    missing_tokens: frozenset[str] = frozenset()

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise DatasetError("duplicate column names in schema")
        if self.class_column not in names:
            raise DatasetError(f"class column {self.class_column!r} not in columns")
        if self.column(self.class_column).kind != CATEGORICAL:
            raise DatasetError("class column must be categorical")
        for spec in self.protected:
            if spec.column not in names:
                raise DatasetError(f"protected column {spec.column!r} not in columns")
            if self.column(spec.column).kind != CATEGORICAL:
                raise DatasetError(f"protected column {spec.column!r} must be categorical")

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def column_index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise KeyError(name)

    def protected_spec(self, name: str) -> ProtectedSpec:
        for spec in self.protected:
            if spec.column == name:
                return spec
        raise DatasetError(f"{name!r} is not a protected column in this schema")


def schema_from_json(path: str | Path) -> Schema:
    """Load a schema description from a JSON file.

    Expected shape::

        {
          "columns": [{"name": "age", "kind": "numeric"}, ...],
          "class_column": "income",
          "protected": [{"column": "sex", "protected_values": ["Female"]}],
          "missing_tokens": ["?"]
        }
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        columns = tuple(Column(c["name"], c["kind"]) for c in raw["columns"])
        protected = tuple(
            ProtectedSpec(
                p["column"],
                frozenset(p["protected_values"]),
                frozenset(p["unprotected_values"]) if "unprotected_values" in p else None,
            )
            for p in raw.get("protected", ())
        )
        return Schema(
            columns=columns,
            class_column=raw["class_column"],
            protected=protected,
            missing_tokens=frozenset(raw.get("missing_tokens", ())),
        )
    except KeyError as exc:
        raise DatasetError(f"schema file {path}: missing key {exc}") from exc


@dataclass
class Dataset:
    """Encoded tabular data bound to its schema.

    ``records`` is an (n, len(columns)) float64 matrix. ``encoders`` maps each
    categorical column name to its code-to-raw-value list; code ``i`` decodes
    to ``encoders[name][i]``.
    """

    schema: Schema
    records: np.ndarray
    encoders: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        self.records = np.asarray(self.records, dtype=np.float64)
        if self.records.ndim != 2 or self.records.shape[1] != len(self.schema.columns):
            raise DatasetError(
                f"records shape {self.records.shape} does not match "
                f"{len(self.schema.columns)} schema columns"
            )
        self.records.setflags(write=False)

    def __len__(self) -> int:
        return self.records.shape[0]

    def column_values(self, name: str) -> np.ndarray:
        return self.records[:, self.schema.column_index(name)]

    def class_labels(self) -> np.ndarray:
        """Class codes as an int array."""
        return self.column_values(self.schema.class_column).astype(np.int64)

    def class_count(self) -> int:
        return len(self.encoders[self.schema.class_column])

    def decode(self, name: str, code: int) -> str:
        return self.encoders[name][int(code)]

    def decode_column(self, name: str) -> list[str]:
        enc = self.encoders[name]
        return [enc[int(v)] for v in self.column_values(name)]

    def take(self, indices: Sequence[int] | np.ndarray) -> "Dataset":
        """New dataset with the selected rows; shares schema and encoders."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.schema, self.records[idx].copy(), self.encoders)


@dataclass(frozen=True)
class GroupAssignment:
    """Binary protected/unprotected labels aligned with a dataset's rows."""

    attribute: str
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=bool)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.labels.shape[0]

    def take(self, indices: Sequence[int] | np.ndarray) -> "GroupAssignment":
        idx = np.asarray(indices, dtype=np.int64)
        return GroupAssignment(self.attribute, self.labels[idx].copy())


@dataclass(frozen=True)
class SplitSpec:
    """Fractions and seed for the train/test and attack/eval subsampling."""

    train_fraction: float = 0.5
    attack_fraction: float = 0.15
    eval_fraction: float = 0.20
    seed: int = 0

    def __post_init__(self):
        for name in ("train_fraction", "attack_fraction", "eval_fraction"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise DatasetError(f"{name} must lie in (0, 1), got {v}")
        if self.attack_fraction + self.eval_fraction > 1.0:
            raise DatasetError("attack_fraction + eval_fraction must not exceed 1")


# --- loading ---------------------------------------------------------------


def _parse_rows(rows: Iterable[Sequence[str]], schema: Schema, source: str) -> Dataset:
    header_seen = False
    names = [c.name for c in schema.columns]
    kinds = [c.kind for c in schema.columns]
    width = len(names)
    prot_idx = {schema.column_index(s.column): s for s in schema.protected}
    encoders: dict[str, dict[str, int]] = {
        c.name: {} for c in schema.columns if c.kind == CATEGORICAL
    }
    out: list[list[float]] = []
    unmapped: dict[str, set[str]] = {}

    for line_no, row in enumerate(rows, start=1):
        if not header_seen:
            got = [cell.strip() for cell in row]
            if got != names:
                raise SchemaMismatchError(
                    f"{source}: header {got!r} does not match schema columns {names!r}"
                )
            header_seen = True
            continue
        if len(row) == 0 or (len(row) == 1 and row[0].strip() == ""):
            continue  # blank line
        if len(row) != width:
            raise CsvParseError(line_no, f"expected {width} fields, got {len(row)}")
        cells = [cell.strip() for cell in row]
        if any(c == "" or c in schema.missing_tokens for c in cells):
            continue  # incomplete record, dropped
        encoded = [0.0] * width
        for i, cell in enumerate(cells):
            if kinds[i] == NUMERIC:
                try:
                    encoded[i] = float(cell)
                except ValueError:
                    raise CsvParseError(
                        line_no, f"column {names[i]!r}: {cell!r} is not numeric"
                    ) from None
            else:
                table = encoders[names[i]]
                code = table.setdefault(cell, len(table))
                encoded[i] = float(code)
                spec = prot_idx.get(i)
                if spec is not None and spec.side(cell) is None:
                    unmapped.setdefault(names[i], set()).add(cell)
        out.append(encoded)

    if not header_seen:
        raise CsvParseError(1, f"{source}: empty input, header row required")
    if unmapped:
        detail = "; ".join(
            f"{col}: {sorted(vals)}" for col, vals in sorted(unmapped.items())
        )
        raise GroupMapError(f"{source}: unmapped protected values ({detail})")

    records = (
        np.array(out, dtype=np.float64) if out else np.empty((0, width), dtype=np.float64)
    )
    return Dataset(schema, records, {name: list(table) for name, table in encoders.items()})


def load_csv(path: str | Path, schema: Schema) -> Dataset:
    """Load an RFC-4180 CSV file with a header row matching the schema.

    Cell whitespace is stripped before interpretation. Rows containing an
    empty cell or a configured missing token are dropped. Categorical values
    are encoded in first-appearance order.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return _parse_rows(csv.reader(fh), schema, str(path))


def dataset_from_rows(rows: Iterable[Sequence[str]], schema: Schema) -> Dataset:
    """Build a dataset from in-memory string rows (header row included)."""
    return _parse_rows(rows, schema, "<rows>")


def write_csv(ds: Dataset, path: str | Path) -> None:
    """Write a dataset back out as CSV with decoded categorical values."""
    names = [c.name for c in ds.schema.columns]
    kinds = [c.kind for c in ds.schema.columns]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in ds.records:
            out = []
            for i, v in enumerate(row):
                if kinds[i] == CATEGORICAL:
                    out.append(ds.encoders[names[i]][int(v)])
                else:
                    out.append(repr(float(v)) if v != int(v) else str(int(v)))
            writer.writerow(out)


# --- splits and subsets ----------------------------------------------------


def _subset_size(fraction: float, n: int) -> int:
    k = int(round(fraction * n))
    return max(1, min(k, n - 1))


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Disjoint train/test split covering all records.

    The train side receives round(train_fraction * n) records, clamped so
    both sides are non-empty. Selection is a seeded permutation; row order
    within each side preserves the original dataset order.
    """
    n = len(ds)
    if n < 2:
        raise DatasetError(f"need at least 2 records to split, got {n}")
    k = _subset_size(spec.train_fraction, n)
    rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 0)))
    perm = rng.permutation(n)
    train_idx = np.sort(perm[:k])
    test_idx = np.sort(perm[k:])
    return ds.take(train_idx), ds.take(test_idx)


def sample_attack_data(
    train: Dataset, test: Dataset, spec: SplitSpec
) -> tuple[Dataset, Dataset, Dataset, Dataset]:
    """Draw disjoint attack-training and evaluation subsets from each side.

    Members (records the target saw) come from ``train``, non-members from
    ``test``. Returns ``(attack_members, attack_nonmembers, eval_members,
    eval_nonmembers)``; within each source the attack and eval subsets are
    disjoint.
    """
    rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 1)))
    picks = []
    for source in (train, test):
        n = len(source)
        n_attack = _subset_size(spec.attack_fraction, n)
        n_eval = _subset_size(spec.eval_fraction, n)
        if n_attack + n_eval > n:
            raise DatasetError(
                f"attack ({n_attack}) + eval ({n_eval}) subsets exceed "
                f"{n} available records"
            )
        perm = rng.permutation(n)
        picks.append(
            (
                source.take(np.sort(perm[:n_attack])),
                source.take(np.sort(perm[n_attack : n_attack + n_eval])),
            )
        )
    (attack_members, eval_members), (attack_nonmembers, eval_nonmembers) = picks
    return attack_members, attack_nonmembers, eval_members, eval_nonmembers


# --- protected groups ------------------------------------------------------


def binarize_group(ds: Dataset, attribute: str) -> GroupAssignment:
    """Per-record protected/unprotected labels for one protected column."""
    spec = ds.schema.protected_spec(attribute)
    encoder = ds.encoders[attribute]
    sides = [spec.side(value) for value in encoder]
    bad = [encoder[i] for i, s in enumerate(sides) if s is None]
    if bad:
        raise GroupMapError(f"column {attribute!r}: unmapped values {sorted(bad)}")
    lookup = np.array([bool(s) for s in sides])
    codes = ds.column_values(attribute).astype(np.int64)
    return GroupAssignment(attribute, lookup[codes])


def group_skew(ds: Dataset, attribute: str) -> dict[str, int]:
    """Raw-value counts for a categorical column, in first-appearance order."""
    if ds.schema.column(attribute).kind != CATEGORICAL:
        raise DatasetError(f"group_skew needs a categorical column, {attribute!r} is numeric")
    encoder = ds.encoders[attribute]
    codes = ds.column_values(attribute).astype(np.int64)
    counts = np.bincount(codes, minlength=len(encoder))
    return {value: int(counts[i]) for i, value in enumerate(encoder)}
