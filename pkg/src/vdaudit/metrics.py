"""Fairness metrics for membership inference outcomes.

Vulnerability disparity (VD) is the difference in attack recall between the
protected and unprotected member groups. The per-probability-bin breakdown
normalizes each bin count by the group's member count, so a group's bins sum
to its recall and the per-bin differences sum to VD exactly; this is the
counting that makes the bin decomposition an exact account of where VD
comes from.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

N_BINS = 10


class MetricsError(Exception):
    pass


class EmptyGroupError(MetricsError):
    """A metric conditioned on a group that has no qualifying records."""


@dataclass(frozen=True)
class VdInput:
    """Per-member attack outcomes for one evaluation.

    All arrays are aligned and cover true members only. ``probabilities``
    holds the target model's probability for each record's true class, the
    coordinate used for binning.
    """

    predictions: np.ndarray  # bits, 1 = inferred member
    protected: np.ndarray  # True = protected group
    probabilities: np.ndarray

    def __post_init__(self):
        preds = np.asarray(self.predictions, dtype=np.int64)
        prot = np.asarray(self.protected, dtype=bool)
        probs = np.asarray(self.probabilities, dtype=np.float64)
        if not (len(preds) == len(prot) == len(probs)):
            raise MetricsError("predictions, groups, and probabilities must align")
        if np.any((preds != 0) & (preds != 1)):
            raise MetricsError("predictions must be 0/1 bits")
        if np.any(probs < 0.0) or np.any(probs > 1.0):
            raise MetricsError("probabilities must lie in [0, 1]")
        for name, arr in (("predictions", preds), ("protected", prot), ("probabilities", probs)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.predictions)


@dataclass
class VdReport:
    vd: float
    bin_recalls: np.ndarray  # (N_BINS, 2): column 0 protected, column 1 unprotected
    group_sizes: tuple[int, int]
    no_positives: tuple[bool, bool]
    vd_dp: float | None = None
    change_c: float | None = None

    def bin_edges(self) -> list[tuple[float, float]]:
        return [(r / N_BINS, (r + 1) / N_BINS) for r in range(N_BINS)]


def disparity_di(predictions, truths, groups) -> float:
    """Equal-opportunity gap: Pr(pred=1 | protected, truth=1) minus the same
    for the unprotected group."""
    preds = np.asarray(predictions, dtype=np.int64)
    y = np.asarray(truths, dtype=np.int64)
    g = np.asarray(groups, dtype=bool)
    if not (len(preds) == len(y) == len(g)):
        raise MetricsError("inputs must align")
    rates = []
    for side in (True, False):
        pos = (g == side) & (y == 1)
        if not pos.any():
            raise EmptyGroupError(
                f"{'protected' if side else 'unprotected'} group has no positive-truth records"
            )
        rates.append(float(preds[pos].mean()))
    return rates[0] - rates[1]


def vulnerability_disparity(vd_input: VdInput) -> float:
    """Attack recall of the protected member group minus the unprotected's.

    The same computation yields the disparity under a DP-trained target when
    the predictions come from that pipeline.
    """
    prot = vd_input.protected
    if not prot.any() or prot.all():
        raise EmptyGroupError("both groups must be present among members")
    preds = vd_input.predictions
    return float(preds[prot].mean() - preds[~prot].mean())


def vd_change(vd_before: float, vd_after: float) -> float | None:
    """Relative change (vd_after - vd_before) / vd_before.

    Returns None when the baseline is zero: the change is undefined there and
    callers report that outcome rather than dropping it.
    """
    if vd_before == 0.0:
        return None
    return (vd_after - vd_before) / vd_before


def _bin_index(probabilities: np.ndarray) -> np.ndarray:
    # bins [0,0.1), ..., [0.9,1.0]; the last bin is closed so 1.0 lands in it
    return np.minimum((probabilities * N_BINS).astype(np.int64), N_BINS - 1)


def recall_by_bin(vd_input: VdInput) -> VdReport:
    """Per-bin group recalls plus the overall VD they decompose.

    For bin r and group g, the bin recall is the number of g's members
    predicted member with probability in r, divided by g's member count.
    Summed over bins this returns g's recall, so the per-bin differences sum
    to VD. A group with no positive predictions reports all-zero bins and is
    flagged.
    """
    vd = vulnerability_disparity(vd_input)
    bins = _bin_index(vd_input.probabilities)
    recalls = np.zeros((N_BINS, 2), dtype=np.float64)
    sizes = []
    flags = []
    for col, side in enumerate((True, False)):
        sel = vd_input.protected == side
        n_g = int(sel.sum())
        positives = sel & (vd_input.predictions == 1)
        counts = np.bincount(bins[positives], minlength=N_BINS).astype(np.float64)
        recalls[:, col] = counts / n_g
        sizes.append(n_g)
        flags.append(not positives.any())
    recalls.setflags(write=False)
    return VdReport(
        vd=vd,
        bin_recalls=recalls,
        group_sizes=(sizes[0], sizes[1]),
        no_positives=(flags[0], flags[1]),
    )


# --- serialization -----------------------------------------------------------


def vd_report_to_dict(report: VdReport) -> dict:
    return {
        "vd": report.vd,
        "vd_dp": report.vd_dp,
        "change_c": report.change_c,
        "group_sizes": list(report.group_sizes),
        "no_positives": list(report.no_positives),
        "bins": [
            {
                "bin_lo": lo,
                "bin_hi": hi,
                "protected": report.bin_recalls[r, 0],
                "unprotected": report.bin_recalls[r, 1],
            }
            for r, (lo, hi) in enumerate(report.bin_edges())
        ],
    }


def vd_report_csv_rows(report: VdReport) -> list[tuple[float, float, str, float]]:
    """Plot-ready rows: (bin_lo, bin_hi, group, recall)."""
    rows = []
    for r, (lo, hi) in enumerate(report.bin_edges()):
        rows.append((lo, hi, "protected", float(report.bin_recalls[r, 0])))
        rows.append((lo, hi, "unprotected", float(report.bin_recalls[r, 1])))
    return rows
