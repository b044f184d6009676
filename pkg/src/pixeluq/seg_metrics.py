"""Segmentation quality and calibration: mIoU and ECE.

Both metrics are built on mergeable accumulators so a dataset can be
scored image-by-image (in any order, in parallel) and merged: a single
global confusion matrix for mIoU and a single global set of confidence
bins for ECE (micro-aggregation).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidLabelError, InvalidParameterError, UndefinedMetricError

DEFAULT_ECE_BINS = 15


@dataclass
class ConfusionMatrix:
    """C x C integer counts; rows are ground truth, columns prediction."""

    counts: np.ndarray

    @classmethod
    def zeros(cls, num_classes: int) -> "ConfusionMatrix":
        return cls(counts=np.zeros((num_classes, num_classes), dtype=np.int64))

    @property
    def num_scored(self) -> int:
        return int(self.counts.sum())

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(counts=self.counts + other.counts)

    __add__ = merge


def accumulate_confusion(
    pred_label: np.ndarray,
    gt_label: np.ndarray,
    num_classes: int,
    ignore_index: int,
) -> ConfusionMatrix:
    """Build a confusion matrix for one image.

    Pixels whose ground truth equals ``ignore_index`` contribute
    nothing. Prediction labels outside [0, C), or ground-truth labels
    outside [0, C) that are not the ignore index, raise
    :class:`InvalidLabelError`.
    """
    pred = np.asarray(pred_label)
    gt = np.asarray(gt_label)
    if pred.shape != gt.shape:
        raise InvalidLabelError(f"pred shape {pred.shape} != gt shape {gt.shape}")
    scored = gt != ignore_index
    p = pred[scored].astype(np.int64)
    g = gt[scored].astype(np.int64)
    if p.size and (p.min() < 0 or p.max() >= num_classes):
        raise InvalidLabelError(f"prediction labels outside [0, {num_classes})")
    if g.size and (g.min() < 0 or g.max() >= num_classes):
        raise InvalidLabelError(
            f"ground-truth labels outside [0, {num_classes}) and not ignore_index"
        )
    flat = np.bincount(g * num_classes + p, minlength=num_classes * num_classes)
    return ConfusionMatrix(counts=flat.reshape(num_classes, num_classes))


def per_class_iou(matrix: ConfusionMatrix) -> np.ndarray:
    """IoU per class; NaN where a class is absent from both pred and gt."""
    m = matrix.counts.astype(np.float64)
    tp = np.diag(m)
    union = m.sum(axis=0) + m.sum(axis=1) - tp
    with np.errstate(invalid="ignore"):
        iou = np.where(union > 0, tp / union, np.nan)
    return iou


def miou(matrix: ConfusionMatrix) -> float:
    """Mean IoU over classes present in pred or gt (zero-union classes excluded)."""
    iou = per_class_iou(matrix)
    present = ~np.isnan(iou)
    if not present.any():
        raise UndefinedMetricError("mIoU undefined: every class has zero union")
    return float(iou[present].mean())


@dataclass
class CalibrationBins:
    """Per-bin accumulators for ECE over B equal-width confidence bins.

    Membership follows edge_b < c <= edge_{b+1}, with c = 0 assigned to
    bin 0.
    """

    edges: np.ndarray
    counts: np.ndarray = field(default=None)  # type: ignore[assignment]
    conf_sums: np.ndarray = field(default=None)  # type: ignore[assignment]
    acc_sums: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        b = len(self.edges) - 1
        if self.counts is None:
            self.counts = np.zeros(b, dtype=np.int64)
        if self.conf_sums is None:
            self.conf_sums = np.zeros(b, dtype=np.float64)
        if self.acc_sums is None:
            self.acc_sums = np.zeros(b, dtype=np.float64)

    @classmethod
    def zeros(cls, num_bins: int = DEFAULT_ECE_BINS) -> "CalibrationBins":
        if num_bins < 1:
            raise InvalidParameterError(f"need at least 1 calibration bin, got {num_bins}")
        return cls(edges=np.linspace(0.0, 1.0, num_bins + 1))

    @property
    def num_scored(self) -> int:
        return int(self.counts.sum())

    def merge(self, other: "CalibrationBins") -> "CalibrationBins":
        if not np.array_equal(self.edges, other.edges):
            raise InvalidParameterError("cannot merge calibration bins with different edges")
        return CalibrationBins(
            edges=self.edges,
            counts=self.counts + other.counts,
            conf_sums=self.conf_sums + other.conf_sums,
            acc_sums=self.acc_sums + other.acc_sums,
        )

    __add__ = merge


def accumulate_calibration(
    seg_prob: np.ndarray,
    gt_label: np.ndarray,
    ignore_index: int,
    num_bins: int = DEFAULT_ECE_BINS,
) -> CalibrationBins:
    """Bin one image's confidences (max class probability) and accuracies."""
    bins = CalibrationBins.zeros(num_bins)
    prob = np.asarray(seg_prob, dtype=np.float64)
    gt = np.asarray(gt_label)
    scored = (gt != ignore_index).ravel()
    if not scored.any():
        return bins
    conf = prob.max(axis=0).ravel()[scored]
    correct = (np.argmax(prob, axis=0).ravel()[scored] == gt.ravel()[scored]).astype(np.float64)

    idx = np.searchsorted(bins.edges, conf, side="left") - 1
    idx = np.clip(idx, 0, num_bins - 1)  # c = 0 lands in bin 0; guards 1 + ulp
    bins.counts += np.bincount(idx, minlength=num_bins)
    bins.conf_sums += np.bincount(idx, weights=conf, minlength=num_bins)
    bins.acc_sums += np.bincount(idx, weights=correct, minlength=num_bins)
    return bins


def ece_from_bins(bins: CalibrationBins) -> float:
    """Expected calibration error from accumulated bins."""
    n = bins.num_scored
    if n == 0:
        raise UndefinedMetricError("ECE undefined: no scored pixels")
    occupied = bins.counts > 0
    gaps = np.abs(
        bins.acc_sums[occupied] / bins.counts[occupied]
        - bins.conf_sums[occupied] / bins.counts[occupied]
    )
    return float(np.sum(bins.counts[occupied] / n * gaps))


def ece(
    seg_prob: np.ndarray,
    gt_label: np.ndarray,
    ignore_index: int,
    num_bins: int = DEFAULT_ECE_BINS,
) -> float:
    """One-shot ECE of a single probability field against labels."""
    return ece_from_bins(accumulate_calibration(seg_prob, gt_label, ignore_index, num_bins))
