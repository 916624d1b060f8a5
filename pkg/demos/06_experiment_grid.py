"""Run a small (epsilon x T) experiment grid end to end and inspect the report.

The grid runner wants file paths, so the synthetic data is written out first;
everything lands in a throwaway directory.
"""

import json
import tempfile
from pathlib import Path

from vdaudit.cli import ExperimentConfig, emit_report, run_experiment
from vdaudit.dataset import write_csv
from vdaudit.synthetic import memorizable_dataset

work = Path(tempfile.mkdtemp(prefix="vdaudit-demo-"))
ds = memorizable_dataset(seed=5, n=400)
write_csv(ds, work / "toy.csv")
(work / "toy.json").write_text(
    json.dumps(
        {
            "columns": [{"name": c.name, "kind": c.kind} for c in ds.schema.columns],
            "class_column": "label",
            "protected": [{"column": "grp", "protected_values": ["p"]}],
        }
    ),
    encoding="utf-8",
)

cfg = ExperimentConfig(
    dataset=str(work / "toy.csv"),
    schema=str(work / "toy.json"),
    protected="grp",
    depth=4,
    epsilons=(0.5,),
    fairpick_enabled=True,
    fairpick_t=(0.6,),
    min_per_cluster=4,
    trials=3,
    seed=7,
    out=str(work / "results"),
)

report = run_experiment(cfg)
written = emit_report(report, cfg.out)
print(f"wrote {len(written)} files to {cfg.out}\n")

def fmt(value):
    return "--" if value is None else f"{value:+.4f}"


# four cells: {baseline, eps=0.5} x {no mitigation, T=0.6}
print(f"{'cell':22s} {'vd':>8s} {'vd_dp':>8s} {'precision':>10s} {'failed':>7s}")
for key, cell in sorted(report["cells"].items()):
    agg = cell["aggregate"]
    print(
        f"{key:22s} {fmt(agg['vd']['mean']):>8s} {fmt(agg['vd_dp']['mean']):>8s} "
        f"{fmt(agg['precision']['mean']):>10s} {agg['failed']:>7d}"
    )

summary = (Path(cfg.out) / "summary.csv").read_text(encoding="utf-8").splitlines()
print(f"\nsummary.csv: {len(summary) - 1} data rows, "
      f"{len(summary[0].split(','))} columns")
