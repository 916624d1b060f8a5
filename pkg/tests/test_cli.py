"""CLI plumbing: seeds, cell naming, config loading, trials, report files."""

import json

import numpy as np
import pytest

from vdaudit import cli, id3, metrics, mia
from vdaudit.cli import (
    ConfigError,
    ExperimentConfig,
    _aggregate_cell,
    _cell_file_tag,
    _mean_std,
    _parse_grid,
    cell_key,
    derive_seed,
    emit_report,
    load_config,
    run_experiment,
    run_trial,
)
from vdaudit.dataset import load_csv, schema_from_json


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    """Small two-class dataset with group-skewed clumps, on disk."""
    root = tmp_path_factory.mktemp("cli-corpus")
    csv_path = root / "toy.csv"
    schema_path = root / "toy.json"
    rng = np.random.default_rng(7)
    rows = ["x,y,grp,label"]
    clumps = {"c0": (0.0, 10.0), "c1": (3.0, 13.0)}
    for label, (a, b) in clumps.items():
        for grp, counts in (("p", (25, 15)), ("u", (15, 25))):
            for coord, count in zip((a, b), counts):
                for _ in range(count):
                    rows.append(f"{coord},{rng.normal():.4f},{grp},{label}")
    csv_path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    schema_path.write_text(
        json.dumps(
            {
                "columns": [
                    {"name": "x", "kind": "numeric"},
                    {"name": "y", "kind": "numeric"},
                    {"name": "grp", "kind": "categorical"},
                    {"name": "label", "kind": "categorical"},
                ],
                "class_column": "label",
                "protected": [{"column": "grp", "protected_values": ["p"]}],
            }
        ),
        encoding="utf-8",
    )
    return {"csv": csv_path, "schema": schema_path, "root": root}


def make_config(corpus, **kw) -> ExperimentConfig:
    base = dict(
        dataset=str(corpus["csv"]),
        schema=str(corpus["schema"]),
        protected="grp",
        depth=3,
        epsilons=(0.5,),
        trials=2,
        min_per_cluster=4,
        seed=11,
    )
    base.update(kw)
    return ExperimentConfig(**base)


# --- seeds and naming ----------------------------------------------------------


def test_derive_seed_is_stable_and_63_bit():
    a = derive_seed(0, "split", 3)
    assert a == derive_seed(0, "split", 3)
    assert 0 <= a < 2**63
    assert a != derive_seed(0, "split", 4)
    assert a != derive_seed(1, "split", 3)
    assert derive_seed(5) != derive_seed(5, "")


def test_cell_key_formats():
    assert cell_key(None, None) == "eps=none,t=none"
    assert cell_key(0.5, None) == "eps=0.5,t=none"
    assert cell_key(100.0, 0.4) == "eps=100,t=0.4"
    assert cell_key(0.01, 0.8) == "eps=0.01,t=0.8"


def test_cell_file_tag_is_filename_safe():
    tag = _cell_file_tag(cell_key(0.5, None))
    assert tag == "eps-0.5_t-none"
    assert "=" not in tag and "," not in tag


def test_parse_grid_accepted_forms():
    assert _parse_grid(None, "x") == ()
    assert _parse_grid(" NONE ", "x") == ()
    assert _parse_grid("0.1, 0.5", "x") == (0.1, 0.5)
    assert _parse_grid(5, "x") == (5.0,)
    assert _parse_grid([1, 2], "x") == (1.0, 2.0)
    with pytest.raises(ConfigError, match="bad x"):
        _parse_grid("zero", "x")
    with pytest.raises(ConfigError, match="bad x"):
        _parse_grid(object(), "x")


# --- config --------------------------------------------------------------------


def test_experiment_config_validation():
    good = dict(dataset="d.csv", schema="s.json", protected="grp")
    ExperimentConfig(**good)
    cases = [
        {"dataset": ""},
        {"protected": ""},
        {"depth": -1},
        {"trials": 0},
        {"epsilons": (0.5, -1.0)},
        {"fairpick_t": (0.5, 1.5)},
        {"min_per_cluster": 0},
        {"jobs": 0},
    ]
    for case in cases:
        with pytest.raises(ConfigError):
            ExperimentConfig(**{**good, **case})


def test_config_to_dict_round_trips():
    cfg = ExperimentConfig("d.csv", "s.json", "grp", depth=7, epsilons=(1.0,))
    d = cfg.to_dict()
    d["epsilons"] = tuple(d["epsilons"])
    d["fairpick_t"] = tuple(d["fairpick_t"])
    assert ExperimentConfig(**d) == cfg


def test_load_config_toml_with_epsilon_alias(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text(
        'dataset = "d.csv"\nschema = "s.json"\nprotected = "grp"\n'
        "epsilon = [0.5, 5.0]\nfairpick_t = \"none\"\ndepth = 4\n",
        encoding="utf-8",
    )
    cfg = load_config(path, {})
    assert cfg.epsilons == (0.5, 5.0)
    assert cfg.fairpick_t == ()
    assert cfg.fairpick_enabled is False
    assert cfg.depth == 4


def test_load_config_fairpick_enabled_defaults_from_grid(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text(
        'dataset = "d.csv"\nschema = "s.json"\nprotected = "grp"\n'
        "fairpick_t = [0.4, 0.8]\n",
        encoding="utf-8",
    )
    assert load_config(path, {}).fairpick_enabled is True
    path.write_text(
        'dataset = "d.csv"\nschema = "s.json"\nprotected = "grp"\n'
        "fairpick_t = [0.4]\nfairpick_enabled = false\n",
        encoding="utf-8",
    )
    assert load_config(path, {}).fairpick_enabled is False


def test_load_config_overrides_win(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text(
        'dataset = "d.csv"\nschema = "s.json"\nprotected = "grp"\ndepth = 4\n',
        encoding="utf-8",
    )
    cfg = load_config(path, {"depth": 9, "seed": None})
    assert cfg.depth == 9
    assert cfg.seed == 0  # None overrides are ignored


def test_load_config_rejects_unknown_and_missing_keys(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text('dataset = "d.csv"\nturbo = true\n', encoding="utf-8")
    with pytest.raises(ConfigError, match="unknown config key 'turbo'"):
        load_config(path, {})
    path.write_text('dataset = "d.csv"\nschema = "s.json"\n', encoding="utf-8")
    with pytest.raises(ConfigError, match="missing required"):
        load_config(path, {})


def test_load_config_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.toml", {})
    bad = tmp_path / "bad.toml"
    bad.write_text("depth = [unclosed\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="bad.toml"):
        load_config(bad, {})


def test_load_config_rejects_bad_override_name():
    with pytest.raises(ConfigError, match="bogus"):
        load_config(None, {"dataset": "d", "schema": "s", "protected": "g", "bogus": 1})


# --- single trial --------------------------------------------------------------


def test_run_trial_baseline_and_epsilon_records(corpus):
    cfg = make_config(corpus)
    ds = load_csv(cfg.dataset, schema_from_json(cfg.schema))
    out = run_trial(cfg, ds, None, 0)
    assert set(out) == {"eps=none,t=none", "eps=0.5,t=none"}
    base = out["eps=none,t=none"]
    eps = out["eps=0.5,t=none"]
    for record in (base, eps):
        assert "error" not in record
        assert record["trial"] == 0
        for key in ("acc_train", "acc_test", "recall", "vd_measured", "bins"):
            assert key in record
        assert np.asarray(record["bins"]).shape == (10, 2)
    assert base["vd"] == base["vd_measured"]
    assert base["vd_dp"] is None and base["change_c"] is None
    assert "dp" not in base["seeds"] and "dp" in eps["seeds"]
    assert eps["vd"] == base["vd_measured"]
    assert eps["vd_dp"] == eps["vd_measured"]
    expected = metrics.vd_change(base["vd_measured"], eps["vd_measured"])
    assert eps["change_c"] == expected


def test_run_trial_mitigated_stratum_carries_plans(corpus):
    cfg = make_config(corpus, fairpick_enabled=True, fairpick_t=(0.6,))
    ds = load_csv(cfg.dataset, schema_from_json(cfg.schema))
    out = run_trial(cfg, ds, 0.6, 1)
    record = out["eps=none,t=0.6"]
    assert "error" not in record
    assert "fairpick" in record and len(record["fairpick"]) == 2
    for plan in record["fairpick"]:
        assert plan["deletions"] is not None
        assert plan["deleted_total"] >= 0
    assert "fairpick" in record["seeds"]


def test_run_trial_stratum_failure_fails_every_cell(corpus):
    cfg = make_config(corpus, min_per_cluster=500, epsilons=(0.5, 5.0))
    ds = load_csv(cfg.dataset, schema_from_json(cfg.schema))
    out = run_trial(cfg, ds, 0.5, 0)
    assert len(out) == 3
    for record in out.values():
        assert "FairpickError" in record["error"]
        assert "min_per_cluster" in record["error"]


def test_cells_are_independent_across_grids(corpus):
    wide = run_experiment(make_config(corpus, epsilons=(0.5, 5.0)))
    narrow = run_experiment(make_config(corpus, epsilons=(0.5,)))
    assert wide["cells"]["eps=0.5,t=none"]["runs"] == narrow["cells"]["eps=0.5,t=none"]["runs"]
    assert wide["cells"]["eps=none,t=none"]["runs"] == narrow["cells"]["eps=none,t=none"]["runs"]


# --- aggregation ---------------------------------------------------------------


def test_mean_std_conventions():
    assert _mean_std([]) == {"mean": None, "std": None, "n": 0}
    got = _mean_std([1.0, 3.0])
    assert got["mean"] == 2.0
    assert got["std"] == 1.0  # population std
    assert got["n"] == 2


def test_aggregate_cell_flags_failures():
    ok = {"trial": 0, "acc_train": 1.0, "acc_test": 0.5, "precision": 0.6,
          "recall": 0.7, "vd": 0.0, "vd_dp": None, "change_c": None,
          "vd_measured": 0.0, "bins": np.zeros((10, 2)).tolist()}
    bad = {"trial": 1, "error": "boom"}
    agg = _aggregate_cell([ok, bad], 2)
    assert agg["failed"] == 1
    assert agg["valid"] is False  # 50% > 20%
    assert agg["acc_train"]["mean"] == 1.0
    assert agg["vd_dp"] == {"mean": None, "std": None, "n": 0}
    assert agg["baseline_zero_changes"] == 1

    agg = _aggregate_cell([ok] * 4 + [bad], 5)
    assert agg["failed"] == 1 and agg["valid"] is True

    empty = _aggregate_cell([bad], 1)
    assert empty["bins_mean"] is None
    assert "fairpick_deleted" not in empty


# --- experiment and report files ------------------------------------------------


def test_run_experiment_grid_shape_and_reduction(corpus):
    cfg = make_config(corpus, fairpick_enabled=True, fairpick_t=(0.6,))
    report = run_experiment(cfg)
    assert set(report) == {"format_version", "created_at", "config", "cells"}
    assert report["config"] == cfg.to_dict()
    assert len(report["cells"]) == 4  # (none + 1 eps) x (none + 1 t)
    for key, cell in report["cells"].items():
        assert cell["aggregate"]["failed"] == 0, key
        if cell["t"] is None:
            assert "vd_reduction_pct" not in cell["aggregate"]
        else:
            assert "vd_reduction_pct" in cell["aggregate"]
            assert "fairpick_deleted" in cell["aggregate"]


def test_emit_report_files(tmp_path, corpus):
    cfg = make_config(corpus, fairpick_enabled=True, fairpick_t=(0.6,))
    report = run_experiment(cfg)
    written = emit_report(report, tmp_path / "out")
    names = {p.name for p in written}
    assert "report.json" in names
    assert "summary.csv" in names
    assert "bins_eps-none_t-none.csv" in names
    assert "plans_eps-0.5_t-0.6.json" in names

    with open(tmp_path / "out" / "report.json", encoding="utf-8") as fh:
        assert json.load(fh) == json.loads(json.dumps(report))

    lines = (tmp_path / "out" / "summary.csv").read_text().strip().splitlines()
    assert len(lines) == 1 + len(report["cells"])
    header = lines[0].split(",")
    assert len(header) == 22
    assert header[0] == "cell" and header[-1] == "fairpick_ignored_mean"

    bins_lines = (tmp_path / "out" / "bins_eps-none_t-none.csv").read_text().strip().splitlines()
    assert len(bins_lines) == 1 + 20


def test_emit_report_empty(tmp_path):
    report = {"format_version": 1, "created_at": "x", "config": {}, "cells": {}}
    written = emit_report(report, tmp_path / "empty")
    assert [p.name for p in written] == ["report.json", "summary.csv"]


# --- subcommands ---------------------------------------------------------------


def test_main_exit_codes(corpus, capsys):
    assert cli.main(["train"]) == 1  # missing required flags
    assert cli.main(["bogus"]) == 1  # unknown subcommand -> parser error
    assert (
        cli.main(
            ["train", "--dataset", "absent.csv", "--schema", str(corpus["schema"]),
             "--depth", "3"]
        )
        == 2
    )
    err = capsys.readouterr().err
    assert "config error" in err
    assert "error:" in err


def test_train_writes_loadable_tree(corpus, tmp_path, capsys):
    out = tmp_path / "tree.json"
    code = cli.main(
        ["train", "--dataset", str(corpus["csv"]), "--schema", str(corpus["schema"]),
         "--depth", "3", "--seed", "5", "--out", str(out)]
    )
    assert code == 0
    tree = id3.load_tree(out)
    assert tree.depth_limit == 3
    stdout = capsys.readouterr().out
    assert "train accuracy" in stdout and "epsilon: none" in stdout


def test_train_rejects_epsilon_list(corpus):
    assert (
        cli.main(
            ["train", "--dataset", str(corpus["csv"]), "--schema", str(corpus["schema"]),
             "--depth", "3", "--epsilon", "1,2"]
        )
        == 1
    )


def test_attack_saves_model_and_reuses_tree(corpus, tmp_path, capsys):
    tree_path = tmp_path / "tree.json"
    cli.main(
        ["train", "--dataset", str(corpus["csv"]), "--schema", str(corpus["schema"]),
         "--depth", "3", "--seed", "5", "--out", str(tree_path)]
    )
    model_path = tmp_path / "attack.json"
    code = cli.main(
        ["attack", "--dataset", str(corpus["csv"]), "--schema", str(corpus["schema"]),
         "--tree", str(tree_path), "--seed", "5", "--out", str(model_path)]
    )
    assert code == 0
    model = mia.load_attack_model(model_path)
    assert model.class_count == 2
    assert "attack precision" in capsys.readouterr().out


def test_audit_writes_report_files(corpus, tmp_path, capsys):
    out = tmp_path / "audit"
    code = cli.main(
        ["audit", "--dataset", str(corpus["csv"]), "--schema", str(corpus["schema"]),
         "--protected", "grp", "--depth", "3", "--seed", "5", "--out", str(out)]
    )
    assert code == 0
    with open(out / "vd_report.json", encoding="utf-8") as fh:
        doc = json.load(fh)
    assert "vd" in doc and len(doc["bins"]) == 10
    lines = (out / "bins.csv").read_text().strip().splitlines()
    assert len(lines) == 21
    assert "vulnerability disparity" in capsys.readouterr().out


def test_mitigate_t1_keeps_every_record(corpus, tmp_path, capsys):
    out = tmp_path / "mit1"
    code = cli.main(
        ["mitigate", "--dataset", str(corpus["csv"]), "--schema", str(corpus["schema"]),
         "--protected", "grp", "--fairpick-t", "1.0", "--seed", "3", "--out", str(out)]
    )
    assert code == 0
    lines = (out / "reduced.csv").read_text().strip().splitlines()
    assert len(lines) == 1 + 160
    with open(out / "plan.json", encoding="utf-8") as fh:
        plans = json.load(fh)
    assert [p["deleted_total"] for p in plans] == [0, 0]
    assert "kept 160 of 160" in capsys.readouterr().out


def test_mitigate_deletes_toward_target(corpus, tmp_path):
    out = tmp_path / "mit"
    code = cli.main(
        ["mitigate", "--dataset", str(corpus["csv"]), "--schema", str(corpus["schema"]),
         "--protected", "grp", "--fairpick-t", "0.6", "--seed", "3", "--out", str(out)]
    )
    assert code == 0
    reduced = load_csv(out / "reduced.csv", schema_from_json(corpus["schema"]))
    assert 0 < len(reduced) < 160
    with open(out / "plan.json", encoding="utf-8") as fh:
        plans = json.load(fh)
    deleted = sum(p["deleted_total"] for p in plans)
    assert len(reduced) == 160 - deleted


def test_mitigate_requires_single_t(corpus, tmp_path):
    assert (
        cli.main(
            ["mitigate", "--dataset", str(corpus["csv"]), "--schema", str(corpus["schema"]),
             "--protected", "grp", "--fairpick-t", "0.4,0.8", "--out", str(tmp_path / "x")]
        )
        == 1
    )


def test_experiment_subcommand_end_to_end(corpus, tmp_path, capsys):
    out = tmp_path / "exp"
    cfg = tmp_path / "exp.toml"
    cfg.write_text(
        f'dataset = "{corpus["csv"]}"\nschema = "{corpus["schema"]}"\n'
        'protected = "grp"\ndepth = 3\nepsilon = [0.5]\nfairpick_t = "none"\n'
        f'trials = 2\nseed = 11\nout = "{out}"\n',
        encoding="utf-8",
    )
    assert cli.main(["experiment", "--config", str(cfg)]) == 0
    with open(out / "report.json", encoding="utf-8") as fh:
        report = json.load(fh)
    assert set(report["cells"]) == {"eps=none,t=none", "eps=0.5,t=none"}
    stdout = capsys.readouterr().out
    assert "eps=0.5,t=none" in stdout and "wrote" in stdout
