"""Turn a per-image uncertainty map into a binary certain/uncertain mask.

Four threshold strategies over the scored pixels of a single image:

* ``mean``       - arithmetic mean uncertainty (the everyday default),
* ``median``     - lower median,
* ``robust``     - median plus f times a robust standard deviation
                   sigma = median(|x - median|) / 0.6745, where the
                   constant makes sigma agree with the standard
                   deviation of a normal distribution,
* ``percentile`` - nearest-rank q-th percentile.

Pixels are certain iff their uncertainty is strictly below the
threshold; a pixel exactly at the threshold is uncertain. Thresholds are
always per image: two images never share one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidParameterError, UndefinedThresholdError

MAD_CONSISTENCY = 0.6745  # median absolute deviation of N(0,1)

THRESHOLD_KINDS = ("mean", "median", "robust", "percentile")


@dataclass(frozen=True)
class ThresholdSpec:
    """How to derive the per-image threshold.

    ``f`` only applies to the robust kind; negative values collapse the
    threshold below the median (sometimes to 0 or less, marking every
    pixel uncertain) and are rejected unless ``allow_negative_f`` is
    set. ``q`` only applies to the percentile kind and must lie in
    (0, 100).
    """

    kind: str
    f: float = 2.0
    q: float = 50.0
    allow_negative_f: bool = False

    def __post_init__(self):
        if self.kind not in THRESHOLD_KINDS:
            raise InvalidParameterError(
                f"unknown threshold kind {self.kind!r}; expected one of {THRESHOLD_KINDS}"
            )
        if self.kind == "robust" and self.f < 0 and not self.allow_negative_f:
            raise InvalidParameterError(
                "robust threshold with f < 0 is rejected: it is unstable "
                "(the threshold can collapse to 0, marking every pixel "
                "uncertain); pass allow_negative_f to force it"
            )
        if self.kind == "percentile" and not 0.0 < self.q < 100.0:
            raise InvalidParameterError(f"percentile q must be in (0, 100), got {self.q}")

    @classmethod
    def parse(cls, text: str, allow_negative_f: bool = False) -> "ThresholdSpec":
        """Parse the CLI form: ``mean | median | robust:f=F | percentile:q=Q``."""
        kind, _, arg = text.partition(":")
        kind = kind.strip()
        kwargs = {}
        if arg:
            key, _, value = arg.partition("=")
            key = key.strip()
            if key not in ("f", "q") or not value:
                raise InvalidParameterError(f"malformed threshold argument {arg!r}")
            try:
                kwargs[key] = float(value)
            except ValueError as exc:
                raise InvalidParameterError(f"malformed threshold argument {arg!r}") from exc
        if kind == "robust":
            kwargs["allow_negative_f"] = allow_negative_f
        elif kwargs and kind != "percentile" and "f" in kwargs:
            raise InvalidParameterError(f"threshold kind {kind!r} takes no f argument")
        return cls(kind=kind, **kwargs)

    def describe(self) -> dict:
        """Resolved form for reports."""
        out = {"kind": self.kind}
        if self.kind == "robust":
            out["f"] = float(self.f)
        if self.kind == "percentile":
            out["q"] = float(self.q)
        return out


@dataclass(frozen=True)
class CertaintyMask:
    """Boolean certain/uncertain decisions plus the threshold used."""

    certain: np.ndarray  # (H, W); False wherever unscored
    tau: float


def lower_median(values: np.ndarray) -> float:
    """Lower median: the ((n-1)//2)-th order statistic (0-indexed)."""
    n = values.size
    if n == 0:
        raise UndefinedThresholdError("median of empty set")
    k = (n - 1) // 2
    return float(np.partition(values, k)[k])


def robust_sigma(values: np.ndarray) -> float:
    """Outlier-resilient standard deviation: median(|x - median|) / 0.6745."""
    med = lower_median(values)
    return lower_median(np.abs(values - med)) / MAD_CONSISTENCY


def nearest_rank(values: np.ndarray, q: float) -> float:
    """Nearest-rank q-th percentile: the ceil(q/100 * n)-th order statistic.

    The rank is derived with exact rational arithmetic on the IEEE value
    of ``q`` so integer boundaries are never missed by float rounding.
    """
    n = values.size
    if n == 0:
        raise UndefinedThresholdError("percentile of empty set")
    k = math.ceil(Fraction(q) * n / 100)
    k = min(max(k, 1), n)
    return float(np.partition(values, k - 1)[k - 1])


def compute_threshold(u: np.ndarray, scored_mask: np.ndarray, spec: ThresholdSpec) -> float:
    """Per-image threshold over scored pixels only."""
    vals = np.asarray(u, dtype=np.float64)[np.asarray(scored_mask, dtype=bool)]
    if vals.size == 0:
        raise UndefinedThresholdError("no scored pixels to derive a threshold from")
    if spec.kind == "mean":
        return float(vals.mean())
    if spec.kind == "median":
        return lower_median(vals)
    if spec.kind == "robust":
        return lower_median(vals) + spec.f * robust_sigma(vals)
    return nearest_rank(vals, spec.q)


def classify(u: np.ndarray, scored_mask: np.ndarray, tau: float) -> CertaintyMask:
    """Certain iff strictly below tau; unscored pixels are never certain."""
    if not np.isfinite(tau):
        raise InvalidParameterError(f"threshold must be finite, got {tau}")
    scored = np.asarray(scored_mask, dtype=bool)
    certain = scored & (np.asarray(u) < tau)
    return CertaintyMask(certain=certain, tau=float(tau))
