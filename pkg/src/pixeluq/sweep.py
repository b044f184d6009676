"""Percentile sweep of the uncertainty threshold, with AUC summaries.

For every percentile q in 1..99 the per-image threshold is set to the
q-th percentile (nearest rank) of that image's scored uncertainties, the
joint counts are re-merged over the dataset, and the three conditional
metrics are recorded; undefined values propagate as None. Each curve is
summarized by a span-normalized trapezoidal AUC, so a constant curve c
integrates to exactly c and the number reads as an average metric value.

Counting at all 99 thresholds reuses one sort per image: with the
scored uncertainties sorted and the accuracy flags prefix-summed,
"number of pixels strictly below tau" is a binary search, which makes
every sweep point exactly equal to an independent evaluate call at that
percentile at a fraction of the cost.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidParameterError, UndefinedMetricError
from .pipeline import TASKS, UQ_METRIC_NAMES, PreparedImage
from .uq_metrics import (
    UQCounts,
    _cell_stats,
    p_accurate_given_certain,
    p_uncertain_given_inaccurate,
    pavpu,
)

PERCENTILES = tuple(range(1, 100))


@dataclass(frozen=True)
class SweepResult:
    """Curves[task][metric] is a list of (percentile, value-or-None)."""

    window: int
    curves: dict
    aucs: dict


def _nearest_rank_indices(n: int) -> np.ndarray:
    """0-based order-statistic index for each percentile in 1..99."""
    return np.array([min(max(-(-q * n // 100), 1), n) - 1 for q in PERCENTILES], dtype=np.int64)


@dataclass(frozen=True)
class _SortedUnits:
    """Sorted scoring units of one image/task, ready for fast counting."""

    pixel_sorted_u: np.ndarray  # sorted scored pixel uncertainties (drives tau)
    unit_sorted_u: np.ndarray  # sorted unit uncertainties (pixels, or cell means)
    acc_prefix: np.ndarray  # prefix sums of accuracy flags in unit order
    n_acc_total: int

    @property
    def n_units(self) -> int:
        return int(self.unit_sorted_u.size)

    def counts_at(self, tau: float) -> UQCounts:
        n_certain = int(np.searchsorted(self.unit_sorted_u, tau, side="left"))
        n_ac = int(self.acc_prefix[n_certain])
        n_ic = n_certain - n_ac
        n_au = self.n_acc_total - n_ac
        n_iu = (self.n_units - self.n_acc_total) - n_ic
        return UQCounts(n_ac=n_ac, n_au=n_au, n_ic=n_ic, n_iu=n_iu)


def _sorted_units(img: PreparedImage, task: str, window: int) -> _SortedUnits | None:
    u = np.asarray(img.uncertainty(task), dtype=np.float64)
    scored = img.scored(task)
    accurate = img.accurate(task)
    pixel_u = np.sort(u[scored])
    if pixel_u.size == 0:
        return None  # no threshold derivable; image contributes nothing
    if window == 1:
        unit_u = u[scored]
        unit_acc = accurate[scored]
    else:
        n_scored, n_acc, mean_u = _cell_stats(accurate, scored, u, window)
        live = n_scored > 0
        unit_u = mean_u[live]
        unit_acc = 2 * n_acc[live] >= n_scored[live]
    order = np.argsort(unit_u, kind="stable")
    unit_sorted = unit_u[order]
    acc_sorted = unit_acc[order].astype(np.int64)
    prefix = np.concatenate([[0], np.cumsum(acc_sorted)])
    return _SortedUnits(
        pixel_sorted_u=pixel_u,
        unit_sorted_u=unit_sorted,
        acc_prefix=prefix,
        n_acc_total=int(acc_sorted.sum()),
    )


def sweep_images(images: list[PreparedImage], window: int = 1) -> SweepResult:
    """Sweep all percentiles over a prepared dataset."""
    if window < 1:
        raise InvalidParameterError(f"window must be a positive integer, got {window}")
    if not images:
        raise InvalidParameterError("cannot sweep an empty dataset")

    curves = {task: {name: [] for name in UQ_METRIC_NAMES} for task in TASKS}
    for task in TASKS:
        units = [su for su in (_sorted_units(img, task, window) for img in images) if su]
        taus = [su.pixel_sorted_u[_nearest_rank_indices(su.pixel_sorted_u.size)] for su in units]
        for qi, q in enumerate(PERCENTILES):
            merged = UQCounts()
            for su, tau in zip(units, taus):
                merged = merged + su.counts_at(float(tau[qi]))
            curves[task]["p_accurate_given_certain"].append(
                (q, p_accurate_given_certain(merged))
            )
            curves[task]["p_uncertain_given_inaccurate"].append(
                (q, p_uncertain_given_inaccurate(merged))
            )
            curves[task]["pavpu"].append((q, pavpu(merged)))

    aucs = {
        task: {
            name: _maybe_auc(curves[task][name]) for name in UQ_METRIC_NAMES
        }
        for task in TASKS
    }
    return SweepResult(window=window, curves=curves, aucs=aucs)


def auc(points) -> float:
    """Span-normalized trapezoidal area under a percentile curve.

    Points are (percentile, value-or-None) pairs; the x axis is q/100.
    None points are skipped, with trapezoids spanning the gap, and the
    integral is divided by the covered span so a constant curve c yields
    exactly c. Fewer than 2 non-null points is undefined.
    """
    xs, ys = [], []
    for q, v in points:
        if v is not None:
            xs.append(q / 100.0)
            ys.append(v)
    if len(xs) < 2:
        raise UndefinedMetricError("AUC undefined: fewer than 2 non-null points")
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    if np.any(np.diff(xs) <= 0):
        raise InvalidParameterError("percentiles must be strictly increasing")
    area = float(np.trapezoid(ys, xs))
    return area / float(xs[-1] - xs[0])


def _maybe_auc(points):
    try:
        return auc(points)
    except UndefinedMetricError:
        return None


def midpoint_auc(points) -> float:
    """Composite-midpoint counterpart of :func:`auc` (independent quadrature).

    Integrates pairs of grid intervals with the middle sample as the
    midpoint value; a trapezoid covers any odd tail interval.
    """
    xs = [q / 100.0 for q, v in points if v is not None]
    ys = [v for _, v in points if v is not None]
    if len(xs) < 2:
        raise UndefinedMetricError("AUC undefined: fewer than 2 non-null points")
    area = 0.0
    i = 0
    while i + 2 < len(xs):
        area += (xs[i + 2] - xs[i]) * ys[i + 1]
        i += 2
    for j in range(i, len(xs) - 1):
        area += (xs[j + 1] - xs[j]) * (ys[j] + ys[j + 1]) / 2.0
    return area / (xs[-1] - xs[0])


SWEEP_CSV_COLUMNS = ("task", "metric", "percentile", "value")


def write_sweep_csv(result: SweepResult, path) -> None:
    """Emit the fixed-order curve CSV plus one AUC summary row per curve."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(SWEEP_CSV_COLUMNS)
        for task in TASKS:
            for metric in UQ_METRIC_NAMES:
                for q, value in result.curves[task][metric]:
                    writer.writerow([task, metric, q, "" if value is None else repr(value)])
        for task in TASKS:
            for metric in UQ_METRIC_NAMES:
                a = result.aucs[task][metric]
                writer.writerow([task, metric, "auc", "" if a is None else repr(a)])
