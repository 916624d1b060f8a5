"""Shared fixtures: real-data gating and small reusable datasets.

The Adult and COMPAS benchmarks are not redistributable with the package;
tests that need them skip with acquisition instructions when the files are
absent from data/ (see README, "Benchmark data").
"""

from pathlib import Path

import pytest

from vdaudit.dataset import Dataset, load_csv, schema_from_json

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = REPO_ROOT / "data"
SCHEMA_DIR = REPO_ROOT / "schemas"

_cache: dict[str, Dataset] = {}


def load_benchmark(name: str) -> Dataset:
    """Load data/<name>.csv against schemas/<name>.json, or skip."""
    csv_path = DATA_DIR / f"{name}.csv"
    if not csv_path.exists():
        pytest.skip(
            f"{csv_path} not present; this check needs the real {name} data. "
            f"See README section 'Benchmark data' for how to obtain and place it."
        )
    if name not in _cache:
        schema = schema_from_json(SCHEMA_DIR / f"{name}.json")
        _cache[name] = load_csv(csv_path, schema)
    return _cache[name]


@pytest.fixture
def adult() -> Dataset:
    return load_benchmark("adult")


@pytest.fixture
def compas() -> Dataset:
    return load_benchmark("compas")
