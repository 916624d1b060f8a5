"""FairPick: reduce group-conditional distribution differences by deletion.

The pipeline runs per class label: cluster the class subset with K-means over
the non-protected features (each center standing in for one feature
combination), measure how differently the groups populate each cluster
(``dvar``), solve for per-(group, cluster) deletion counts that scale every
dvar entry toward a target fraction T of its original value, and remove that
many uniformly-random records from each cell. Deletion requests can only be
non-negative: a negative request would mean duplicating records, which adds
no real protection, so those are clamped to zero and counted.

The target equations are rational in the deletion counts (denominators are
post-deletion group totals), so the solver linearizes by anchoring the
denominators at the pre-deletion totals and minimizes the squared residuals
under box constraints with projected gradient descent. Optional refinement
passes re-anchor the denominators at the current plan's totals and re-solve.
Real-valued solutions are rounded largest-remainder within each group, then
locally optimized over the integer grid (per cluster column, exhaustively
when the column's grid is small) so small instances land on the true integer
optimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, GroupAssignment


class FairpickError(Exception):
    pass


class InfeasibleKError(FairpickError):
    """No cluster count satisfies the per-group occupancy requirement."""


class SolverError(FairpickError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class PlanError(FairpickError):
    pass


_POLISH_GRID_CAP = 200_000
_LOCAL_SEARCH_SWEEPS = 200
_POLISH_SWEEPS = 8
# breaks objective ties toward fewer deletions; far below oracle tolerances
_TIE_PENALTY = 1e-12


@dataclass
class ClusteredData:
    """K-means view of one class subset, split by protected group.

    ``counts[i, j]`` is the number of group-i records in cluster j; group 0 is
    the protected group. Centers are reported in original feature units while
    assignment distances use per-feature min-max scaling.
    """

    k: int
    feature_columns: list[str]
    centers: np.ndarray  # (k, n_features), original units
    assignment: np.ndarray  # (n,)
    counts: np.ndarray  # (2, k) int64
    group_totals: np.ndarray  # (2,) int64
    protected: np.ndarray  # (n,) bool
    inertia: float  # total squared scaled distance to assigned centers


@dataclass
class DeletionPlan:
    deletions: np.ndarray  # (n_groups, k) int64
    ignored_negative_requests: int
    residual: float  # solver objective at the returned plan
    threshold: float
    real_solution: np.ndarray  # box-constrained least-squares solution
    iterations: int
    objective_trace: list[float] | None = None


# --- clustering --------------------------------------------------------------


def _scaled_features(subset: Dataset, attribute: str) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[str]]:
    schema = subset.schema
    class_idx = schema.column_index(schema.class_column)
    prot_idx = schema.column_index(attribute)
    cols = [i for i in range(len(schema.columns)) if i not in (class_idx, prot_idx)]
    if not cols:
        raise FairpickError("no features left after excluding class and protected columns")
    X = subset.records[:, cols]
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    span = np.where(span > 0.0, span, 1.0)
    names = [schema.columns[i].name for i in cols]
    return (X - lo) / span, lo, span, names


def _assign(Xs: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest center (lowest index on ties) and squared distance per point."""
    c2 = (centers**2).sum(axis=1)
    n = len(Xs)
    assignment = np.empty(n, dtype=np.int64)
    dist2 = np.empty(n, dtype=np.float64)
    for start in range(0, n, 8192):
        blk = Xs[start : start + 8192]
        d = blk @ centers.T
        d *= -2.0
        d += c2
        idx = np.argmin(d, axis=1)
        assignment[start : start + len(blk)] = idx
        dist2[start : start + len(blk)] = np.maximum(
            d[np.arange(len(blk)), idx] + (blk**2).sum(axis=1), 0.0
        )
    return assignment, dist2


def _kmeans(Xs: np.ndarray, k: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, float]:
    n = len(Xs)
    centers = np.empty((k, Xs.shape[1]), dtype=np.float64)
    centers[0] = Xs[rng.integers(n)]
    d2 = ((Xs - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            pick = int(rng.integers(n))  # all mass on existing centers
        else:
            pick = int(rng.choice(n, p=d2 / total))
        centers[i] = Xs[pick]
        d2 = np.minimum(d2, ((Xs - centers[i]) ** 2).sum(axis=1))

    assignment, dist2 = _assign(Xs, centers)
    for _ in range(100):
        for j in range(k):
            members = assignment == j
            if members.any():
                centers[j] = Xs[members].mean(axis=0)
            # empty cluster keeps its previous center
        new_assignment, dist2 = _assign(Xs, centers)
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
    return centers, assignment, float(dist2.sum())


def aggregate_features(subset: Dataset, groups: GroupAssignment, k: int, seed: int = 0) -> ClusteredData:
    """K-means feature aggregation over the non-protected feature columns.

    Runs Lloyd's iterations from a k-means++-style seeded initialization until
    the assignment stops changing or 100 iterations pass. The protected column
    and the class column are excluded from the distance space.
    """
    n = len(subset)
    if k < 1:
        raise FairpickError(f"k must be >= 1, got {k}")
    if k > n:
        raise FairpickError(f"k = {k} exceeds the {n} available records")
    if len(groups) != n:
        raise FairpickError("group labels do not align with the subset")
    Xs, lo, span, names = _scaled_features(subset, groups.attribute)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 4)))
    centers, assignment, inertia = _kmeans(Xs, k, rng)
    protected = groups.labels
    counts = np.zeros((2, k), dtype=np.int64)
    for row, side in enumerate((True, False)):
        sel = assignment[protected == side]
        counts[row] = np.bincount(sel, minlength=k)
    return ClusteredData(
        k=k,
        feature_columns=names,
        centers=centers * span + lo,
        assignment=assignment,
        counts=counts,
        group_totals=counts.sum(axis=1),
        protected=protected,
        inertia=inertia,
    )


def choose_k(
    subset: Dataset, groups: GroupAssignment, min_per_cluster: int = 10, seed: int = 0
) -> int:
    """Largest K whose seeded clustering keeps every cluster populated with
    more than ``min_per_cluster`` records from every group.

    Searches downward from ``|subset| // (min_per_cluster * n_groups)``.
    """
    if min_per_cluster < 1:
        raise FairpickError(f"min_per_cluster must be >= 1, got {min_per_cluster}")
    if len(subset) == 0:
        raise FairpickError("cannot cluster an empty subset")
    n_groups = 2
    k_max = len(subset) // (min_per_cluster * n_groups)
    for k in range(k_max, 0, -1):
        cd = aggregate_features(subset, groups, k, seed)
        if (cd.counts > min_per_cluster).all():
            return k
    raise InfeasibleKError(
        f"no cluster count in [1, {k_max}] keeps more than {min_per_cluster} "
        "records per group in every cluster; use a smaller min_per_cluster"
    )


# --- distribution difference -------------------------------------------------


def compute_dvar(cd: ClusteredData) -> np.ndarray:
    """Per (group, cluster): the group's share of the cluster minus the
    complement groups' share. Rows are antisymmetric for two groups."""
    return _dvar_from_counts(cd.counts.astype(np.float64))


def _dvar_from_counts(counts: np.ndarray) -> np.ndarray:
    totals = counts.sum(axis=1)
    if np.any(totals <= 0.0):
        raise FairpickError("every group must be non-empty to compute dvar")
    comp_totals = totals.sum() - totals
    if np.any(comp_totals <= 0.0):
        raise FairpickError("every group needs a non-empty complement to compute dvar")
    comp_counts = counts.sum(axis=0)[None, :] - counts
    return counts / totals[:, None] - comp_counts / comp_totals[:, None]


def dvar_after_plan(cd: ClusteredData, deletions: np.ndarray) -> np.ndarray:
    """Exact (non-linearized) dvar of the counts remaining after deletion."""
    return _dvar_from_counts(cd.counts.astype(np.float64) - np.asarray(deletions, dtype=np.float64))


# --- deletion solver ---------------------------------------------------------


def _linear_system(
    counts: np.ndarray, anchors: np.ndarray, target: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Residual map r(x) = M x + r0 for flattened deletions x.

    Row (i, j): (counts_ij - x_ij) / anchors_i minus the complement's share at
    complement anchors, minus target_ij.
    """
    n, k = counts.shape
    comp_anchor = anchors.sum() - anchors
    comp_counts = counts.sum(axis=0)[None, :] - counts
    r0 = counts / anchors[:, None] - comp_counts / comp_anchor[:, None] - target
    M = np.zeros((n * k, n * k), dtype=np.float64)
    for j in range(k):
        for i in range(n):
            row = i * k + j
            M[row, row] = -1.0 / anchors[i]
            for l in range(n):
                if l != i:
                    M[row, l * k + j] = 1.0 / comp_anchor[i]
    return M, r0.ravel()


def _pgd(
    M: np.ndarray,
    r0: np.ndarray,
    x0: np.ndarray,
    cap: np.ndarray,
    tol: float,
    max_iter: int,
    track: bool,
) -> tuple[np.ndarray, int, list[float] | None]:
    lam = float(np.linalg.eigvalsh(M.T @ M)[-1])
    if lam <= 0.0:
        return x0, 0, [float(r0 @ r0)] if track else None
    step = 1.0 / (2.0 * lam)
    x = np.clip(x0, 0.0, cap)
    trace = [] if track else None
    r = M @ x + r0
    if track:
        trace.append(float(r @ r))
    for it in range(1, max_iter + 1):
        g = 2.0 * (M.T @ r)
        x_next = np.clip(x - step * g, 0.0, cap)
        moved = float(np.max(np.abs(x_next - x)))
        x = x_next
        r = M @ x + r0
        if track:
            trace.append(float(r @ r))
        if moved <= tol:
            return x, it, trace
    raise SolverError(
        f"projected gradient did not reach stationarity in {max_iter} iterations",
        float(r @ r),
    )


def _round_largest_remainder(x: np.ndarray, cap: np.ndarray) -> np.ndarray:
    """Per group row: floor, then top up the largest remainders so the row
    total matches the rounded real total (ties go to the lowest column)."""
    base = np.floor(x)
    out = base.astype(np.int64)
    for i in range(x.shape[0]):
        rem = x[i] - base[i]
        give = int(np.rint(x[i].sum())) - int(base[i].sum())
        eligible = np.flatnonzero(rem > 1e-15)
        give = min(give, len(eligible))
        if give > 0:
            order = eligible[np.lexsort((eligible, -rem[eligible]))]
            out[i, order[:give]] += 1
    return np.minimum(out, cap.astype(np.int64))


def _column_objective(
    v: np.ndarray, j: int, counts: np.ndarray, anchors: np.ndarray, target: np.ndarray
) -> np.ndarray:
    """Objective contribution of column j for deletion vectors v (n, ...)."""
    comp_anchor = anchors.sum() - anchors
    col = counts[:, j]
    col_sum = col.sum()
    v_sum = v.sum(axis=0)
    total = np.zeros(v.shape[1:], dtype=np.float64)
    for i in range(counts.shape[0]):
        comp_del = v_sum - v[i]
        resid = (
            (col[i] - v[i]) / anchors[i]
            - (col_sum - col[i] - comp_del) / comp_anchor[i]
            - target[i, j]
        )
        total = total + resid**2
    return total


def _descend_column(
    v0: np.ndarray,
    caps: np.ndarray,
    j: int,
    counts: np.ndarray,
    anchors: np.ndarray,
    target: np.ndarray,
) -> np.ndarray:
    """Greedy unit-move descent for one column under per-cell caps."""
    n = len(v0)
    v = np.minimum(v0.astype(np.float64), caps.astype(np.float64))
    f_cur = float(
        _column_objective(v[:, None], j, counts, anchors, target)[0]
    ) + _TIE_PENALTY * float(v.sum())
    for _ in range(_LOCAL_SEARCH_SWEEPS):
        candidates = []
        for i in range(n):
            for d in (1.0, -1.0):
                w = v.copy()
                w[i] += d
                if 0.0 <= w[i] <= caps[i]:
                    candidates.append(w)
        for i in range(n):
            for l in range(n):
                if i != l:
                    w = v.copy()
                    w[i] += 1.0
                    w[l] -= 1.0
                    if w[i] <= caps[i] and w[l] >= 0.0:
                        candidates.append(w)
        if not candidates:
            break
        stacked = np.stack(candidates, axis=1)
        values = _column_objective(
            stacked, j, counts, anchors, target
        ) + _TIE_PENALTY * stacked.sum(axis=0)
        best = int(np.argmin(values))
        if values[best] >= f_cur:
            break
        v = stacked[:, best]
        f_cur = float(values[best])
    return v.astype(np.int64)


def _polish_integer(
    plan: np.ndarray,
    counts: np.ndarray,
    anchors: np.ndarray,
    target: np.ndarray,
    totals: np.ndarray,
) -> np.ndarray:
    """Integer descent on the fixed-anchor objective, one column at a time.

    The objective separates over columns once the anchors are fixed, but the
    keep-one-record-per-group rule couples a row's columns, so each column is
    optimized under the row budget left by the others and the sweep repeats
    until the plan settles. Small columns are enumerated exhaustively, large
    ones improved by single-cell and paired unit moves.
    """
    n, k = counts.shape
    out = plan.copy()
    deletable = totals.astype(np.int64) - 1
    for _ in range(_POLISH_SWEEPS):
        changed = False
        for j in range(k):
            others = out.sum(axis=1) - out[:, j]
            caps = np.minimum(
                counts[:, j].astype(np.int64), np.maximum(deletable - others, 0)
            )
            space = float(np.prod((caps + 1).astype(np.float64)))
            if space <= _POLISH_GRID_CAP:
                grids = np.meshgrid(*(np.arange(c + 1) for c in caps), indexing="ij")
                V = np.stack([g.ravel() for g in grids]).astype(np.float64)
                values = _column_objective(
                    V, j, counts, anchors, target
                ) + _TIE_PENALTY * V.sum(axis=0)
                best_v = V[:, int(np.argmin(values))].astype(np.int64)
            else:
                best_v = _descend_column(out[:, j], caps, j, counts, anchors, target)
            if not np.array_equal(best_v, out[:, j]):
                out[:, j] = best_v
                changed = True
        if not changed:
            break
    return out


def _guard_strata(plan: np.ndarray, totals: np.ndarray) -> np.ndarray:
    """Keep at least one record in every group stratum."""
    out = plan.copy()
    for i in range(plan.shape[0]):
        while out[i].sum() >= totals[i]:
            j = int(np.argmax(out[i]))
            if out[i, j] == 0:
                break
            out[i, j] -= 1
    return out


def deletion_objective(
    cd: ClusteredData, threshold: float, deletions: np.ndarray, anchors: np.ndarray | None = None
) -> float:
    """Squared-residual objective of a deletion matrix under fixed anchors
    (pre-deletion group totals unless overridden)."""
    counts = cd.counts.astype(np.float64)
    if anchors is None:
        anchors = cd.group_totals.astype(np.float64)
    target = threshold * _dvar_from_counts(counts)
    M, r0 = _linear_system(counts, np.asarray(anchors, dtype=np.float64), target)
    r = M @ np.asarray(deletions, dtype=np.float64).ravel() + r0
    return float(r @ r)


def solve_deletions(
    cd: ClusteredData,
    threshold: float,
    refine_passes: int = 0,
    max_iter: int = 100_000,
    tol: float = 1e-10,
    track_objective: bool = False,
) -> DeletionPlan:
    """Per-(group, cluster) deletion counts scaling dvar toward threshold*dvar.

    Minimizes the squared residuals of the linearized target equations under
    0 <= del <= counts, then rounds and integer-polishes. ``refine_passes``
    re-anchors the denominators at the post-deletion totals and re-solves, up
    to that many passes or until the integer plan stops changing.
    """
    if not (0.0 <= threshold <= 1.0):
        raise FairpickError(f"threshold must lie in [0, 1], got {threshold}")
    counts = cd.counts.astype(np.float64)
    totals = cd.group_totals.astype(np.float64)
    target = threshold * _dvar_from_counts(counts)
    cap = counts.ravel()

    anchors = totals.copy()
    plan: np.ndarray | None = None
    ignored = 0
    iterations = 0
    trace: list[float] | None = None
    real_solution: np.ndarray | None = None
    for pass_no in range(1 + max(0, refine_passes)):
        M, r0 = _linear_system(counts, anchors, target)
        unconstrained = np.linalg.lstsq(M, -r0, rcond=None)[0]
        if pass_no == 0:
            ignored = int(np.sum(unconstrained < -1e-9))
        x0 = np.clip(unconstrained, 0.0, cap)
        x, its, pass_trace = _pgd(M, r0, x0, cap, tol, max_iter, track_objective)
        iterations += its
        if track_objective:
            trace = pass_trace if trace is None else trace + pass_trace
        if pass_no == 0:
            real_solution = x.reshape(counts.shape)
        rounded = _round_largest_remainder(x.reshape(counts.shape), counts)
        polished = _polish_integer(rounded, counts, anchors, target, cd.group_totals)
        new_plan = _guard_strata(polished, cd.group_totals)
        if plan is not None and np.array_equal(new_plan, plan):
            break
        plan = new_plan
        anchors = totals - plan.sum(axis=1)  # next pass anchors, if any

    # M, r0 still hold the system of the last executed pass
    final_residual = float(np.sum((M @ plan.ravel().astype(np.float64) + r0) ** 2))
    return DeletionPlan(
        deletions=plan,
        ignored_negative_requests=ignored,
        residual=final_residual,
        threshold=threshold,
        real_solution=real_solution,
        iterations=iterations,
        objective_trace=trace,
    )


# --- plan application --------------------------------------------------------


def _survivors(cd: ClusteredData, plan: DeletionPlan, seed: int, n: int) -> np.ndarray:
    keep = np.ones(n, dtype=bool)
    for i, side in enumerate((True, False)):
        for j in range(cd.k):
            quota = int(plan.deletions[i, j])
            if quota == 0:
                continue
            cell = np.flatnonzero((cd.protected == side) & (cd.assignment == j))
            if quota > len(cell):
                raise PlanError(
                    f"plan deletes {quota} from a (group, cluster) cell of {len(cell)}"
                )
            rng = np.random.default_rng(np.random.SeedSequence((seed, 6, i, j)))
            drop = rng.choice(cell, size=quota, replace=False)
            keep[drop] = False
    return np.flatnonzero(keep)


def apply_plan(subset: Dataset, cd: ClusteredData, plan: DeletionPlan, seed: int = 0) -> Dataset:
    """Remove exactly the planned number of uniformly-random records from each
    (group, cluster) cell; survivors keep their original values."""
    if np.any(plan.deletions < 0) or np.any(plan.deletions > cd.counts):
        raise PlanError("plan violates the box constraints")
    return subset.take(_survivors(cd, plan, seed, len(subset)))


# --- full pipeline -----------------------------------------------------------


@dataclass
class ClassPlanReport:
    class_label: str
    k: int
    group_totals: list[int]
    deletions: list[list[int]]
    ignored_negative_requests: int
    residual: float
    threshold: float
    deleted_total: int


@dataclass
class FairpickResult:
    dataset: Dataset
    plans: list[ClassPlanReport]

    def deleted_total(self) -> int:
        return sum(p.deleted_total for p in self.plans)


def fairpick_with_diagnostics(
    train: Dataset,
    groups: GroupAssignment,
    threshold: float,
    min_per_cluster: int = 10,
    seed: int = 0,
    refine_passes: int = 5,
) -> FairpickResult:
    """FairPick over every class stratum, returning the reduced dataset plus
    one plan report per class."""
    if len(groups) != len(train):
        raise FairpickError("group labels do not align with the training data")
    labels = train.class_labels()
    keep_global: list[np.ndarray] = []
    plans: list[ClassPlanReport] = []
    for c in range(train.class_count()):
        class_idx = np.flatnonzero(labels == c)
        label = train.decode(train.schema.class_column, c)
        if class_idx.size == 0:
            continue
        sub = train.take(class_idx)
        sub_groups = groups.take(class_idx)
        seed_c = int(
            np.random.SeedSequence((seed, 5, c)).generate_state(1, dtype=np.uint64)[0] >> 1
        )
        try:
            k = choose_k(sub, sub_groups, min_per_cluster, seed_c)
            cd = aggregate_features(sub, sub_groups, k, seed_c)
            plan = solve_deletions(cd, threshold, refine_passes=refine_passes)
            survivors = _survivors(cd, plan, seed_c, len(sub))
        except FairpickError as exc:
            raise FairpickError(f"class {label!r}: {exc}") from exc
        keep_global.append(class_idx[survivors])
        plans.append(
            ClassPlanReport(
                class_label=label,
                k=k,
                group_totals=[int(t) for t in cd.group_totals],
                deletions=plan.deletions.tolist(),
                ignored_negative_requests=plan.ignored_negative_requests,
                residual=plan.residual,
                threshold=threshold,
                deleted_total=int(plan.deletions.sum()),
            )
        )
    kept = np.sort(np.concatenate(keep_global)) if keep_global else np.empty(0, dtype=np.int64)
    return FairpickResult(dataset=train.take(kept), plans=plans)


def fairpick(
    train: Dataset,
    groups: GroupAssignment,
    threshold: float,
    min_per_cluster: int = 10,
    seed: int = 0,
    refine_passes: int = 5,
) -> Dataset:
    """Reduced training set; see :func:`fairpick_with_diagnostics`."""
    return fairpick_with_diagnostics(
        train, groups, threshold, min_per_cluster, seed, refine_passes
    ).dataset


def plan_report_to_dict(report: ClassPlanReport) -> dict:
    return {
        "class_label": report.class_label,
        "k": report.k,
        "group_totals": report.group_totals,
        "deletions": report.deletions,
        "ignored_negative_requests": report.ignored_negative_requests,
        "residual": report.residual,
        "threshold": report.threshold,
        "deleted_total": report.deleted_total,
    }
