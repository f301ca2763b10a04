"""Segmentation overlap and calibration metrics.

Dice uses the both-empty = 1.0 convention. ECE bins per-pixel confidence
(the maximum class probability) into equal-width bins over (0, 1], with
values exactly on an interior edge going to the lower bin; the reported
number is a percentage. Accumulators merge by summing bin counters, so
cases can be scored independently and pooled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .arrays import validate_binary, validate_labels, validate_probabilities
from .errors import ValidationError


@dataclass(frozen=True)
class DiceResult:
    class_id: int
    intersection: int
    pred_size: int
    gt_size: int
    dice: float


def dice(pred, gt, class_id: int) -> DiceResult:
    """Overlap 2|A&B| / (|A|+|B|) for one class; 1.0 when both masks are empty."""
    p = np.asarray(pred)
    g = np.asarray(gt)
    if p.shape != g.shape:
        raise ValidationError(f"pred shape {p.shape} != gt shape {g.shape}")
    pm = p == class_id
    gm = g == class_id
    inter = int(np.count_nonzero(pm & gm))
    psz = int(np.count_nonzero(pm))
    gsz = int(np.count_nonzero(gm))
    if psz + gsz == 0:
        value = 1.0
    else:
        value = 2.0 * inter / (psz + gsz)
    return DiceResult(class_id, inter, psz, gsz, value)


@dataclass(frozen=True)
class ReliabilityBins:
    """Rendered per-bin statistics; empty bins carry NaN confidence/accuracy."""

    n_bins: int
    lowers: np.ndarray
    uppers: np.ndarray
    counts: np.ndarray
    mean_confidence: np.ndarray
    accuracy: np.ndarray


@dataclass(frozen=True)
class CalibrationReport:
    bins: ReliabilityBins
    ece: float  # percent


class CalibrationAccumulator:
    """Mergeable confidence/correctness histogram over (0, 1]."""

    def __init__(self, n_bins: int = 10):
        if n_bins < 1:
            raise ValidationError(f"n_bins must be >= 1, got {n_bins}")
        self.n_bins = n_bins
        # interior edges k/n; digitize(right=True) sends x == edge to the lower bin
        self._edges = np.array([k / n_bins for k in range(1, n_bins)])
        self.counts = np.zeros(n_bins, dtype=np.int64)
        self.confidence_sums = np.zeros(n_bins, dtype=np.float64)
        self.correct_counts = np.zeros(n_bins, dtype=np.int64)

    def add(self, p, gt, *, foreground_only: bool = False):
        """Score one posterior/label pair into the bins."""
        arr = validate_probabilities(p)
        labels = validate_labels(gt, arr.shape[0])
        if labels.shape != arr.shape[1:]:
            raise ValidationError(
                f"label shape {labels.shape} does not match posterior {arr.shape}"
            )
        confidence = arr.max(axis=0).ravel()
        correct = (arr.argmax(axis=0) == labels).ravel()
        if foreground_only:
            keep = (labels > 0).ravel()
            confidence = confidence[keep]
            correct = correct[keep]
        idx = np.digitize(confidence, self._edges, right=True)
        self.counts += np.bincount(idx, minlength=self.n_bins)
        for b in range(self.n_bins):
            sel = idx == b
            if np.any(sel):
                self.confidence_sums[b] += float(np.sum(confidence[sel]))
                self.correct_counts[b] += int(np.count_nonzero(correct[sel]))
        return self

    def merge(self, other: "CalibrationAccumulator"):
        if other.n_bins != self.n_bins:
            raise ValidationError(
                f"cannot merge accumulators with {other.n_bins} and {self.n_bins} bins"
            )
        self.counts += other.counts
        self.confidence_sums += other.confidence_sums
        self.correct_counts += other.correct_counts
        return self

    def report(self) -> CalibrationReport:
        total = int(self.counts.sum())
        if total == 0:
            raise ValidationError("no pixels scored")
        with np.errstate(invalid="ignore"):
            mean_conf = np.where(
                self.counts > 0, self.confidence_sums / self.counts, np.nan
            )
            accuracy = np.where(
                self.counts > 0, self.correct_counts / self.counts, np.nan
            )
        # count_b * |acc_b - conf_b| == |correct_b - conf_sum_b|; summing the
        # raw gaps avoids the intermediate divisions
        gaps = np.abs(self.correct_counts - self.confidence_sums)
        ece = float(gaps[self.counts > 0].sum() * 100.0 / total)
        n = self.n_bins
        bins = ReliabilityBins(
            n_bins=n,
            lowers=np.array([b / n for b in range(n)]),
            uppers=np.array([(b + 1) / n for b in range(n)]),
            counts=self.counts.copy(),
            mean_confidence=mean_conf,
            accuracy=accuracy,
        )
        return CalibrationReport(bins=bins, ece=ece)


def ece(p, gt, n_bins: int = 10, *, foreground_only: bool = False) -> CalibrationReport:
    """Expected calibration error (percent) of one posterior/label pair."""
    return (
        CalibrationAccumulator(n_bins)
        .add(p, gt, foreground_only=foreground_only)
        .report()
    )


def average_entropy(entropy_map, region=None) -> float:
    """Mean entropy over the whole map or a non-empty binary region."""
    h = np.asarray(entropy_map, dtype=np.float64)
    if region is None:
        if h.size == 0:
            raise ValidationError("empty entropy map")
        return float(h.mean())
    mask = validate_binary(region)
    if mask.shape != h.shape:
        raise ValidationError(
            f"region shape {mask.shape} does not match map shape {h.shape}"
        )
    selected = h[mask == 1]
    if selected.size == 0:
        raise ValidationError("region selects no pixels")
    return float(selected.mean())


@dataclass(frozen=True)
class UncertaintyDiceTable:
    """Per-case (score, dice) rows plus their Spearman rank correlation."""

    rows: tuple
    spearman: float | None
    note: str | None = None


def uncertainty_dice_table(cases) -> UncertaintyDiceTable:
    """Pair uncertainty scores with Dice results and rank-correlate them.

    ``cases`` holds (UncertaintyScore, DiceResult) pairs, or plain
    (score, dice) floats. With fewer than 3 cases, or with constant ranks,
    the correlation is omitted with a note.
    """
    rows = tuple(
        (
            float(getattr(s, "score", s)),
            float(getattr(d, "dice", d)),
        )
        for s, d in cases
    )
    if len(rows) < 3:
        return UncertaintyDiceTable(rows, None, "fewer than 3 cases; correlation omitted")
    scores = np.array([r[0] for r in rows])
    dices = np.array([r[1] for r in rows])
    if np.all(scores == scores[0]) or np.all(dices == dices[0]):
        return UncertaintyDiceTable(rows, None, "constant ranks; correlation undefined")
    rho = float(stats.spearmanr(scores, dices).correlation)
    if not np.isfinite(rho):
        return UncertaintyDiceTable(rows, None, "constant ranks; correlation undefined")
    return UncertaintyDiceTable(rows, rho, None)
