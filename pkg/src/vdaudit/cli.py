"""Command-line interface and experiment orchestration.

Subcommands:

* ``train``      fit one (optionally private) tree and report accuracies
* ``attack``     run the membership inference attack against one tree
* ``audit``      one full trial: train, attack, disparity report
* ``mitigate``   apply the deletion mitigation to a dataset file
* ``experiment`` the full grid: {no DP + epsilon grid} x {no mitigation + T grid},
  repeated over trials, aggregated into report files

Every reported number is a deterministic function of (config, master seed):
per-stage seeds are derived by hashing the master seed with the cell identity
and trial index, so editing one grid value never perturbs other cells.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import dataset as ds_mod
from . import id3, metrics, mia
from .fairpick import fairpick_with_diagnostics, plan_report_to_dict

REPORT_FORMAT_VERSION = 1
DEFAULT_EPSILONS = (0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 50.0, 100.0)
DEFAULT_T_GRID = (0.4, 0.6, 0.8)


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    schema: str
    protected: str
    depth: int = 5
    epsilons: tuple[float, ...] = DEFAULT_EPSILONS
    fairpick_enabled: bool = False
    fairpick_t: tuple[float, ...] = DEFAULT_T_GRID
    min_per_cluster: int = 10
    refine_passes: int = 5
    trials: int = 25
    train_fraction: float = 0.5
    attack_fraction: float = 0.15
    eval_fraction: float = 0.20
    seed: int = 0
    jobs: int = 1
    out: str = "results"

    def __post_init__(self):
        if not self.dataset or not self.schema:
            raise ConfigError("dataset and schema paths are required")
        if not self.protected:
            raise ConfigError("a protected column is required")
        if self.depth < 0:
            raise ConfigError(f"depth must be >= 0, got {self.depth}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if any(e <= 0 for e in self.epsilons):
            raise ConfigError("epsilon values must be positive")
        if any(not (0.0 <= t <= 1.0) for t in self.fairpick_t):
            raise ConfigError("fairpick thresholds must lie in [0, 1]")
        if self.min_per_cluster < 1:
            raise ConfigError("min_per_cluster must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "schema": self.schema,
            "protected": self.protected,
            "depth": self.depth,
            "epsilons": list(self.epsilons),
            "fairpick_enabled": self.fairpick_enabled,
            "fairpick_t": list(self.fairpick_t),
            "min_per_cluster": self.min_per_cluster,
            "refine_passes": self.refine_passes,
            "trials": self.trials,
            "train_fraction": self.train_fraction,
            "attack_fraction": self.attack_fraction,
            "eval_fraction": self.eval_fraction,
            "seed": self.seed,
            "jobs": self.jobs,
            "out": self.out,
        }


# --- seeds and cell naming ---------------------------------------------------


def derive_seed(master: int, *parts) -> int:
    """Stable 63-bit seed from the master seed and a cell/stage identity."""
    h = hashlib.sha256(str(int(master)).encode())
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:8], "big") >> 1


def _fmt(value: float | None) -> str:
    return "none" if value is None else format(float(value), "g")


def cell_key(epsilon: float | None, t: float | None) -> str:
    return f"eps={_fmt(epsilon)},t={_fmt(t)}"


def _cell_file_tag(key: str) -> str:
    return key.replace("=", "-").replace(",", "_")


# --- single trial ------------------------------------------------------------


def _attack_and_measure(
    cfg: ExperimentConfig,
    tree: id3.DecisionTree,
    train_used: ds_mod.Dataset,
    test: ds_mod.Dataset,
    subsets,
    eval_groups: ds_mod.GroupAssignment,
    attack_seed: int,
) -> dict:
    attack_members, attack_nonmembers, eval_members, eval_nonmembers = subsets
    ats = mia.build_attack_training_set(tree, attack_members, attack_nonmembers)
    model = mia.train_attack_model(ats, mia.MlpConfig(), attack_seed)
    result = mia.evaluate_mia(model, tree, eval_members, eval_nonmembers)
    true_class_probs = result.member_probs[
        np.arange(len(result.member_true_class)), result.member_true_class
    ]
    vd_input = metrics.VdInput(result.member_predictions, eval_groups.labels, true_class_probs)
    report = metrics.recall_by_bin(vd_input)
    return {
        "acc_train": id3.accuracy(tree, train_used),
        "acc_test": id3.accuracy(tree, test),
        "precision": result.precision,
        "recall": result.recall,
        "true_positives": result.true_positives,
        "false_positives": result.false_positives,
        "vd_measured": report.vd,
        "bins": report.bin_recalls.tolist(),
        "group_sizes": list(report.group_sizes),
        "no_positives": list(report.no_positives),
    }


def run_trial(cfg: ExperimentConfig, ds: ds_mod.Dataset, t: float | None, trial: int) -> dict:
    """All cells of one (T stratum, trial): the plain baseline plus every
    epsilon, sharing the split, mitigation, and attack subsets."""
    out: dict[str, dict] = {}
    seeds = {
        "split": derive_seed(cfg.seed, "split", trial),
        "attack_sample": derive_seed(cfg.seed, "attack-sample", _fmt(t), trial),
    }
    try:
        split_spec = ds_mod.SplitSpec(
            cfg.train_fraction, cfg.attack_fraction, cfg.eval_fraction, seeds["split"]
        )
        train, test = ds_mod.split(ds, split_spec)
        fairpick_plans = None
        if t is not None:
            seeds["fairpick"] = derive_seed(cfg.seed, "fairpick", _fmt(t), trial)
            groups = ds_mod.binarize_group(train, cfg.protected)
            fp = fairpick_with_diagnostics(
                train,
                groups,
                t,
                cfg.min_per_cluster,
                seeds["fairpick"],
                cfg.refine_passes,
            )
            train_used = fp.dataset
            fairpick_plans = [plan_report_to_dict(p) for p in fp.plans]
        else:
            train_used = train
        sample_spec = ds_mod.SplitSpec(
            cfg.train_fraction, cfg.attack_fraction, cfg.eval_fraction, seeds["attack_sample"]
        )
        subsets = ds_mod.sample_attack_data(train_used, test, sample_spec)
        eval_groups = ds_mod.binarize_group(subsets[2], cfg.protected)
    except Exception as exc:  # noqa: BLE001 - a stratum failure fails all its cells
        message = f"{type(exc).__name__}: {exc}"
        for eps in (None, *cfg.epsilons):
            out[cell_key(eps, t)] = {"trial": trial, "error": message, "seeds": seeds}
        return out

    baseline_vd = None
    for eps in (None, *cfg.epsilons):
        key = cell_key(eps, t)
        run_seeds = dict(seeds)
        try:
            if eps is None:
                tree = id3.train_id3(train_used, cfg.depth)
            else:
                run_seeds["dp"] = derive_seed(cfg.seed, "dp", _fmt(t), _fmt(eps), trial)
                tree = id3.train_dp_id3(
                    train_used, cfg.depth, id3.DpConfig(eps), run_seeds["dp"]
                )
            run_seeds["attack_train"] = derive_seed(
                cfg.seed, "attack-train", _fmt(t), _fmt(eps), trial
            )
            record = _attack_and_measure(
                cfg, tree, train_used, test, subsets, eval_groups, run_seeds["attack_train"]
            )
            record["trial"] = trial
            record["seeds"] = run_seeds
            if eps is None:
                baseline_vd = record["vd_measured"]
                record["vd"] = record["vd_measured"]
                record["vd_dp"] = None
                record["change_c"] = None
            else:
                record["vd"] = baseline_vd
                record["vd_dp"] = record["vd_measured"]
                record["change_c"] = (
                    metrics.vd_change(baseline_vd, record["vd_dp"])
                    if baseline_vd is not None
                    else None
                )
            if fairpick_plans is not None:
                record["fairpick"] = fairpick_plans
            out[key] = record
        except Exception as exc:  # noqa: BLE001 - recorded, surfaces in the report
            out[key] = {
                "trial": trial,
                "error": f"{type(exc).__name__}: {exc}",
                "seeds": run_seeds,
            }
    return out


# --- experiment runner -------------------------------------------------------

_worker_dataset_cache: dict[tuple[str, str], ds_mod.Dataset] = {}


def _load_dataset(cfg: ExperimentConfig) -> ds_mod.Dataset:
    key = (cfg.dataset, cfg.schema)
    if key not in _worker_dataset_cache:
        schema = ds_mod.schema_from_json(cfg.schema)
        _worker_dataset_cache[key] = ds_mod.load_csv(cfg.dataset, schema)
    return _worker_dataset_cache[key]


def _trial_job(payload: tuple[ExperimentConfig, float | None, int]) -> dict:
    cfg, t, trial = payload
    return run_trial(cfg, _load_dataset(cfg), t, trial)


def _mean_std(values: list[float]) -> dict:
    if not values:
        return {"mean": None, "std": None, "n": 0}
    arr = np.asarray(values, dtype=np.float64)
    return {"mean": float(arr.mean()), "std": float(arr.std()), "n": len(values)}


_AGGREGATE_FIELDS = (
    "acc_train",
    "acc_test",
    "precision",
    "recall",
    "vd",
    "vd_dp",
    "change_c",
    "vd_measured",
)


def _aggregate_cell(runs: list[dict], trials: int) -> dict:
    ok = [r for r in runs if "error" not in r]
    failed = trials - len(ok)
    agg: dict = {"failed": failed, "valid": failed <= 0.2 * trials}
    for name in _AGGREGATE_FIELDS:
        agg[name] = _mean_std([r[name] for r in ok if r.get(name) is not None])
    agg["baseline_zero_changes"] = sum(
        1 for r in ok if r.get("vd") is not None and r["vd"] == 0.0
    )
    bins = [np.asarray(r["bins"]) for r in ok if "bins" in r]
    agg["bins_mean"] = np.mean(bins, axis=0).tolist() if bins else None
    deleted = [
        sum(p["deleted_total"] for p in r["fairpick"]) for r in ok if "fairpick" in r
    ]
    ignored = [
        sum(p["ignored_negative_requests"] for p in r["fairpick"])
        for r in ok
        if "fairpick" in r
    ]
    if deleted:
        agg["fairpick_deleted"] = _mean_std([float(d) for d in deleted])
        agg["fairpick_ignored"] = _mean_std([float(i) for i in ignored])
    return agg


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Execute the full grid and aggregate a report structure.

    Cells are keyed by (epsilon or none, T or none). Work is scheduled per
    (T stratum, trial) so all epsilon cells of a stratum share their split
    and mitigation; strata x trials run across a worker pool when jobs > 1.
    """
    t_values: list[float | None] = [None]
    if cfg.fairpick_enabled:
        t_values.extend(cfg.fairpick_t)
    jobs = [(cfg, t, trial) for t in t_values for trial in range(cfg.trials)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_trial_job, jobs))
    else:
        results = [_trial_job(job) for job in jobs]

    cells: dict[str, dict] = {}
    for t in t_values:
        for eps in (None, *cfg.epsilons):
            cells[cell_key(eps, t)] = {
                "epsilon": eps,
                "t": t,
                "trials": cfg.trials,
                "runs": [],
            }
    for result in results:
        for key, record in result.items():
            cells[key]["runs"].append(record)
    for cell in cells.values():
        cell["runs"].sort(key=lambda r: r["trial"])
        cell["aggregate"] = _aggregate_cell(cell["runs"], cfg.trials)

    # mitigation effect: compare each T cell against the matching no-T cell
    for key, cell in cells.items():
        if cell["t"] is None:
            continue
        base = cells[cell_key(cell["epsilon"], None)]["aggregate"]["vd_measured"]["mean"]
        here = cell["aggregate"]["vd_measured"]["mean"]
        if base is None or here is None or abs(base) < 1e-12:
            cell["aggregate"]["vd_reduction_pct"] = None
        else:
            cell["aggregate"]["vd_reduction_pct"] = 100.0 * (abs(base) - abs(here)) / abs(base)

    return {
        "format_version": REPORT_FORMAT_VERSION,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "config": cfg.to_dict(),
        "cells": cells,
    }


def report_cells(report: dict) -> dict:
    return report["cells"]


def emit_report(report: dict, out_dir: str | Path) -> list[Path]:
    """Write report.json, summary.csv, and per-cell bin/plan files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "report.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
    written.append(path)

    summary_fields = [
        "cell",
        "epsilon",
        "t",
        "trials",
        "failed",
        "valid",
        "acc_train_mean",
        "acc_train_std",
        "acc_test_mean",
        "acc_test_std",
        "precision_mean",
        "precision_std",
        "recall_mean",
        "recall_std",
        "vd_mean",
        "vd_std",
        "vd_dp_mean",
        "vd_dp_std",
        "change_c_mean",
        "vd_reduction_pct",
        "fairpick_deleted_mean",
        "fairpick_ignored_mean",
    ]
    path = out / "summary.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(summary_fields)
        for key, cell in report["cells"].items():
            agg = cell["aggregate"]
            row = [
                key,
                _fmt(cell["epsilon"]),
                _fmt(cell["t"]),
                cell["trials"],
                agg["failed"],
                agg["valid"],
            ]
            for name in ("acc_train", "acc_test", "precision", "recall", "vd", "vd_dp"):
                row.extend([agg[name]["mean"], agg[name]["std"]])
            row.append(agg["change_c"]["mean"])
            row.append(agg.get("vd_reduction_pct"))
            row.append(agg.get("fairpick_deleted", {}).get("mean"))
            row.append(agg.get("fairpick_ignored", {}).get("mean"))
            writer.writerow(["" if v is None else v for v in row])
    written.append(path)

    for key, cell in report["cells"].items():
        tag = _cell_file_tag(key)
        bins = cell["aggregate"].get("bins_mean")
        if bins is not None:
            path = out / f"bins_{tag}.csv"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["bin_lo", "bin_hi", "group", "recall"])
                for r in range(metrics.N_BINS):
                    lo, hi = r / metrics.N_BINS, (r + 1) / metrics.N_BINS
                    writer.writerow([lo, hi, "protected", bins[r][0]])
                    writer.writerow([lo, hi, "unprotected", bins[r][1]])
            written.append(path)
        plans = [
            {"trial": r["trial"], "plans": r["fairpick"]}
            for r in cell["runs"]
            if "fairpick" in r
        ]
        if plans:
            path = out / f"plans_{tag}.json"
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(plans, fh, indent=1, sort_keys=True)
            written.append(path)
    return written


# --- config loading ----------------------------------------------------------

_CONFIG_KEYS = {f.name for f in fields(ExperimentConfig)}
_LIST_OR_NONE_KEYS = {"epsilons": "epsilon", "fairpick_t": "fairpick_t"}


def _parse_grid(value, what: str) -> tuple[float, ...]:
    """Accept a float, a list of floats, a comma-separated string, or 'none'."""
    if value is None:
        return ()
    if isinstance(value, str):
        if value.strip().lower() == "none":
            return ()
        try:
            return tuple(float(p) for p in value.split(",") if p.strip())
        except ValueError as exc:
            raise ConfigError(f"bad {what} list {value!r}") from exc
    if isinstance(value, (int, float)):
        return (float(value),)
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    raise ConfigError(f"bad {what} value {value!r}")


def load_config(path: str | Path | None, overrides: dict) -> ExperimentConfig:
    """Merge a TOML config document (if any) with CLI flag overrides."""
    raw: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}") from exc
    merged: dict = {}
    for key, value in raw.items():
        name = {"epsilon": "epsilons"}.get(key, key)
        if name not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        merged[name] = value
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    if "epsilons" in merged:
        merged["epsilons"] = _parse_grid(merged["epsilons"], "epsilon")
    if "fairpick_t" in merged:
        merged["fairpick_t"] = _parse_grid(merged["fairpick_t"], "fairpick_t")
        merged.setdefault("fairpick_enabled", len(merged["fairpick_t"]) > 0)
    for key in ("dataset", "schema", "protected"):
        if key not in merged:
            raise ConfigError(f"missing required config key {key!r}")
    try:
        return ExperimentConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# --- subcommands -------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); config errors are exit 1
        raise ConfigError(message)


def _add_common(p: argparse.ArgumentParser, *names: str) -> None:
    if "dataset" in names:
        p.add_argument("--dataset", help="CSV data file")
        p.add_argument("--schema", help="JSON schema file")
    if "protected" in names:
        p.add_argument("--protected", help="protected column name")
    if "depth" in names:
        p.add_argument("--depth", type=int, help="tree depth limit")
    if "epsilon" in names:
        p.add_argument("--epsilon", help="privacy budget(s), comma separated, or 'none'")
    if "seed" in names:
        p.add_argument("--seed", type=int, help="master seed")
    if "fractions" in names:
        p.add_argument("--train-fraction", type=float, dest="train_fraction")
        p.add_argument("--attack-fraction", type=float, dest="attack_fraction")
        p.add_argument("--eval-fraction", type=float, dest="eval_fraction")


def _require(args, *names: str) -> None:
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise ConfigError(f"missing required flag(s): {', '.join('--' + m for m in missing)}")


def _load_pair(args) -> ds_mod.Dataset:
    schema = ds_mod.schema_from_json(args.schema)
    return ds_mod.load_csv(args.dataset, schema)


def _single_epsilon(value: str | None) -> float | None:
    grid = _parse_grid(value, "epsilon")
    if len(grid) > 1:
        raise ConfigError("this subcommand takes a single epsilon (or 'none')")
    return grid[0] if grid else None


def _cmd_train(args) -> int:
    _require(args, "dataset", "schema", "depth")
    ds = _load_pair(args)
    seed = args.seed or 0
    spec = ds_mod.SplitSpec(
        args.train_fraction or 0.5, args.attack_fraction or 0.15, args.eval_fraction or 0.20, seed
    )
    train, test = ds_mod.split(ds, spec)
    eps = _single_epsilon(args.epsilon)
    if eps is None:
        tree = id3.train_id3(train, args.depth)
    else:
        tree = id3.train_dp_id3(train, args.depth, id3.DpConfig(eps), derive_seed(seed, "dp"))
    print(f"records: {len(ds)} (train {len(train)}, test {len(test)})")
    print(f"epsilon: {_fmt(eps)}")
    print(f"train accuracy: {id3.accuracy(tree, train):.4f}")
    print(f"test accuracy:  {id3.accuracy(tree, test):.4f}")
    if args.out:
        id3.save_tree(tree, args.out)
        print(f"tree written to {args.out}")
    return 0


def _attack_once(args):
    ds = _load_pair(args)
    seed = args.seed or 0
    spec = ds_mod.SplitSpec(
        args.train_fraction or 0.5, args.attack_fraction or 0.15, args.eval_fraction or 0.20, seed
    )
    train, test = ds_mod.split(ds, spec)
    eps = _single_epsilon(args.epsilon)
    if getattr(args, "tree", None):
        tree = id3.load_tree(args.tree)
    elif eps is None:
        tree = id3.train_id3(train, args.depth)
    else:
        tree = id3.train_dp_id3(train, args.depth, id3.DpConfig(eps), derive_seed(seed, "dp"))
    subsets = ds_mod.sample_attack_data(train, test, spec)
    ats = mia.build_attack_training_set(tree, subsets[0], subsets[1])
    model = mia.train_attack_model(ats, mia.MlpConfig(), derive_seed(seed, "attack-train"))
    result = mia.evaluate_mia(model, tree, subsets[2], subsets[3])
    return result, model, tree, subsets


def _cmd_attack(args) -> int:
    _require(args, "dataset", "schema")
    if not getattr(args, "tree", None):
        _require(args, "depth")
    result, model, _, _ = _attack_once(args)
    precision = "no-positives" if result.precision is None else f"{result.precision:.4f}"
    print(f"attack precision: {precision}")
    print(f"attack recall:    {result.recall:.4f}")
    print(f"true positives {result.true_positives}, false positives {result.false_positives}")
    if args.out:
        mia.save_attack_model(model, args.out)
        print(f"attack model written to {args.out}")
    return 0


def _cmd_audit(args) -> int:
    _require(args, "dataset", "schema", "protected", "depth")
    result, _, _, subsets = _attack_once(args)
    eval_members = subsets[2]
    groups = ds_mod.binarize_group(eval_members, args.protected)
    probs = result.member_probs[
        np.arange(len(result.member_true_class)), result.member_true_class
    ]
    vd_input = metrics.VdInput(result.member_predictions, groups.labels, probs)
    report = metrics.recall_by_bin(vd_input)
    precision = "no-positives" if result.precision is None else f"{result.precision:.4f}"
    print(f"protected column: {args.protected}")
    print(f"attack precision: {precision}, recall: {result.recall:.4f}")
    print(f"vulnerability disparity: {report.vd:+.4f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "vd_report.json", "w", encoding="utf-8") as fh:
            json.dump(metrics.vd_report_to_dict(report), fh, indent=1, sort_keys=True)
        with open(out / "bins.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_lo", "bin_hi", "group", "recall"])
            writer.writerows(metrics.vd_report_csv_rows(report))
        print(f"report written to {out}")
    return 0


def _cmd_mitigate(args) -> int:
    _require(args, "dataset", "schema", "protected", "fairpick_t", "out")
    grid = _parse_grid(args.fairpick_t, "fairpick_t")
    if len(grid) != 1:
        raise ConfigError("mitigate takes exactly one --fairpick-t value")
    ds = _load_pair(args)
    groups = ds_mod.binarize_group(ds, args.protected)
    result = fairpick_with_diagnostics(
        ds, groups, grid[0], args.min_per_cluster or 10, args.seed or 0
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds_mod.write_csv(result.dataset, out / "reduced.csv")
    with open(out / "plan.json", "w", encoding="utf-8") as fh:
        json.dump(
            [plan_report_to_dict(p) for p in result.plans], fh, indent=1, sort_keys=True
        )
    print(f"kept {len(result.dataset)} of {len(ds)} records "
          f"({result.deleted_total()} deleted)")
    print(f"reduced dataset and plan written to {out}")
    return 0


def _cmd_experiment(args) -> int:
    overrides = {
        "dataset": args.dataset,
        "schema": args.schema,
        "protected": args.protected,
        "depth": args.depth,
        "epsilons": args.epsilon,
        "fairpick_t": args.fairpick_t,
        "trials": args.trials,
        "seed": args.seed,
        "jobs": args.jobs,
        "out": args.out,
        "min_per_cluster": args.min_per_cluster,
        "train_fraction": args.train_fraction,
        "attack_fraction": args.attack_fraction,
        "eval_fraction": args.eval_fraction,
    }
    cfg = load_config(args.config, overrides)
    report = run_experiment(cfg)
    written = emit_report(report, cfg.out)
    for key, cell in report["cells"].items():
        agg = cell["aggregate"]
        pr = agg["precision"]["mean"]
        vd = agg["vd_measured"]["mean"]
        print(
            f"{key}: precision {pr if pr is None else round(pr, 4)}, "
            f"vd {vd if vd is None else round(vd, 4)}, "
            f"failed {agg['failed']}/{cell['trials']}"
        )
    print(f"wrote {len(written)} files to {cfg.out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="vdaudit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one decision tree")
    _add_common(p, "dataset", "depth", "epsilon", "seed", "fractions")
    p.add_argument("--out", help="write the tree as JSON")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("attack", help="membership inference against one tree")
    _add_common(p, "dataset", "depth", "epsilon", "seed", "fractions")
    p.add_argument("--tree", help="load a saved tree instead of training")
    p.add_argument("--out", help="write the attack model as JSON")
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("audit", help="one trial with a disparity report")
    _add_common(p, "dataset", "protected", "depth", "epsilon", "seed", "fractions")
    p.add_argument("--out", help="directory for vd_report.json and bins.csv")
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("mitigate", help="apply the deletion mitigation to a dataset")
    _add_common(p, "dataset", "protected", "seed")
    p.add_argument("--fairpick-t", dest="fairpick_t", help="target dvar ratio in [0,1]")
    p.add_argument("--min-per-cluster", dest="min_per_cluster", type=int)
    p.add_argument("--out", help="output directory", required=False)
    p.set_defaults(func=_cmd_mitigate)

    p = sub.add_parser("experiment", help="full grid with aggregated report")
    p.add_argument("--config", help="TOML config file")
    _add_common(p, "dataset", "protected", "depth", "epsilon", "seed", "fractions")
    p.add_argument("--fairpick-t", dest="fairpick_t", help="T grid, comma separated, or 'none'")
    p.add_argument("--trials", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--min-per-cluster", dest="min_per_cluster", type=int)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=_cmd_experiment)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
