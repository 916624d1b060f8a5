"""Audit and mitigate the vulnerability disparity of membership inference
attacks on (differentially private) ID3 decision trees."""

from .dataset import (
    Column,
    Dataset,
    DatasetError,
    GroupAssignment,
    ProtectedSpec,
    Schema,
    SplitSpec,
    binarize_group,
    dataset_from_rows,
    group_skew,
    load_csv,
    sample_attack_data,
    schema_from_json,
    split,
    write_csv,
)
from .fairpick import (
    ClusteredData,
    DeletionPlan,
    FairpickError,
    aggregate_features,
    apply_plan,
    choose_k,
    compute_dvar,
    dvar_after_plan,
    fairpick,
    fairpick_with_diagnostics,
    solve_deletions,
)
from .id3 import (
    DecisionTree,
    DpConfig,
    Id3Error,
    accuracy,
    predict,
    predict_proba,
    sample_laplace,
    train_dp_id3,
    train_id3,
)
from .metrics import (
    VdInput,
    VdReport,
    disparity_di,
    recall_by_bin,
    vd_change,
    vulnerability_disparity,
)
from .mia import (
    AttackModel,
    MiaResult,
    MlpConfig,
    build_attack_training_set,
    evaluate_mia,
    infer_membership,
    train_attack_model,
)

__version__ = "0.1.0"
