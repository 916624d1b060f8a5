"""
Loading a CSV against a schema, then splitting it
=================================================

Every dataset enters through the same path: a plain CSV plus a JSON schema
naming each column, the class column, and the protected attribute(s).
"""

import json
import tempfile
from pathlib import Path

from vdaudit.dataset import SplitSpec, binarize_group, load_csv, schema_from_json, split, write_csv
from vdaudit.synthetic import random_dataset

workdir = Path(tempfile.mkdtemp())

# start from a generated table so the script is self-contained
ds = random_dataset(seed=3, n=300, n_features=5, numeric_fraction=0.4, with_protected=True)
write_csv(ds, workdir / "demo.csv")

schema_doc = {
    "columns": [{"name": c.name, "kind": c.kind} for c in ds.schema.columns],
    "class_column": ds.schema.class_column,
    "protected": [{"column": "grp", "protected_values": ["p"]}],
}
(workdir / "demo.json").write_text(json.dumps(schema_doc, indent=2))

reloaded = load_csv(workdir / "demo.csv", schema_from_json(workdir / "demo.json"))
print(f"reloaded {len(reloaded)} records, {len(reloaded.schema.columns)} columns")
print("class labels:", reloaded.encoders[reloaded.schema.class_column])

# the split spec carries the train fraction, the attack/eval sampling
# fractions used later by the attack, and the seed that fixes everything
spec = SplitSpec(train_fraction=0.5, attack_fraction=0.15, eval_fraction=0.20, seed=7)
train, test = split(reloaded, spec)
print(f"train {len(train)}, test {len(test)}")

groups = binarize_group(train, "grp")
print(f"protected share of train: {groups.labels.mean():.3f}")
