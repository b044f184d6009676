"""Depth quality: RMSE and threshold-ratio accuracies.

A depth prediction is accurate at threshold t when
``max(pred/gt, gt/pred) < t`` (strictly), with the standard thresholds
1.25, 1.25^2, 1.25^3. Ground-truth pixels equal to the dataset's
invalid-depth marker are excluded from every depth metric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, UndefinedMetricError

DELTA_THRESHOLDS = (1.25, 1.25**2, 1.25**3)


def valid_depth_mask(gt_depth: np.ndarray, invalid_value: float = 0.0) -> np.ndarray:
    """Boolean mask of pixels with usable ground-truth depth."""
    gt = np.asarray(gt_depth)
    return (gt != invalid_value) & np.isfinite(gt)


@dataclass
class RmseAccumulator:
    """Mergeable sum-of-squares + count behind the dataset RMSE."""

    sq_sum: float = 0.0
    count: int = 0

    def merge(self, other: "RmseAccumulator") -> "RmseAccumulator":
        return RmseAccumulator(sq_sum=self.sq_sum + other.sq_sum, count=self.count + other.count)

    __add__ = merge

    def value(self) -> float:
        if self.count == 0:
            raise UndefinedMetricError("RMSE undefined: no valid pixels")
        return float(np.sqrt(self.sq_sum / self.count))


def accumulate_rmse(
    depth: np.ndarray, gt_depth: np.ndarray, valid_mask: np.ndarray
) -> RmseAccumulator:
    d = np.asarray(depth, dtype=np.float64)
    g = np.asarray(gt_depth, dtype=np.float64)
    if d.shape != g.shape:
        raise InvalidInputError(f"depth shape {d.shape} != gt shape {g.shape}")
    err = d[valid_mask] - g[valid_mask]
    return RmseAccumulator(sq_sum=float(np.dot(err, err)), count=int(err.size))


def rmse(depth: np.ndarray, gt_depth: np.ndarray, valid_mask: np.ndarray) -> float:
    """Root mean squared error over valid pixels."""
    return accumulate_rmse(depth, gt_depth, valid_mask).value()


@dataclass(frozen=True)
class DepthAccuracyMask:
    """Per-pixel accuracy decisions; accurate implies valid."""

    accurate: np.ndarray
    valid: np.ndarray

    @property
    def accuracy(self) -> float:
        n = int(self.valid.sum())
        if n == 0:
            raise UndefinedMetricError("delta accuracy undefined: no valid pixels")
        return float(self.accurate.sum() / n)


def delta_accuracy(
    depth: np.ndarray,
    gt_depth: np.ndarray,
    valid_mask: np.ndarray,
    threshold: float = DELTA_THRESHOLDS[0],
) -> DepthAccuracyMask:
    """Mark pixels where ``max(pred/gt, gt/pred) < threshold`` (strict).

    A prediction of exactly 0 against positive ground truth has ratio
    +inf and is therefore inaccurate; gt = 0 cannot occur on valid
    pixels (it is the invalid marker by default).
    """
    if not threshold > 1.0:
        raise InvalidParameterError(f"ratio threshold must exceed 1, got {threshold}")
    d = np.asarray(depth, dtype=np.float64)
    g = np.asarray(gt_depth, dtype=np.float64)
    valid = np.asarray(valid_mask, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.maximum(d / g, g / d)
    ratio = np.where(d == 0.0, np.inf, ratio)  # 0/0 -> inf too; unreachable on valid pixels
    accurate = valid & (ratio < threshold)
    return DepthAccuracyMask(accurate=accurate, valid=valid)
