"""Conditional uncertainty-quality metrics over accurate x certain counts.

Every scored unit (pixel, or window cell) falls into exactly one of four
joint events: accurate-certain, accurate-uncertain, inaccurate-certain,
inaccurate-uncertain. From the counts:

* p(accurate | certain)    = n_ac / (n_ac + n_ic)
* p(uncertain | inaccurate) = n_iu / (n_ic + n_iu)
* PAvPU                    = (n_ac + n_iu) / total

Conditionals with a zero denominator are undefined and reported as
``None``, never coerced to 0 or 1.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidParameterError
from .threshold import CertaintyMask


@dataclass(frozen=True)
class UQCounts:
    """Joint accurate/inaccurate x certain/uncertain counts; merge by +."""

    n_ac: int = 0
    n_au: int = 0
    n_ic: int = 0
    n_iu: int = 0

    def merge(self, other: "UQCounts") -> "UQCounts":
        return UQCounts(
            n_ac=self.n_ac + other.n_ac,
            n_au=self.n_au + other.n_au,
            n_ic=self.n_ic + other.n_ic,
            n_iu=self.n_iu + other.n_iu,
        )

    __add__ = merge

    @property
    def total(self) -> int:
        return self.n_ac + self.n_au + self.n_ic + self.n_iu

    def as_dict(self) -> dict:
        return asdict(self)


def _cell_stats(
    accurate: np.ndarray,
    scored: np.ndarray,
    uncertainty: np.ndarray,
    window: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-cell (scored count, accurate count, mean scored uncertainty).

    The image is tiled into window x window cells anchored at (0, 0);
    edge cells may be smaller. Returned arrays are flattened over cells.
    """
    h, w = scored.shape
    row_idx = np.arange(0, h, window)
    col_idx = np.arange(0, w, window)

    def reduce_cells(a):
        out = np.add.reduceat(a, row_idx, axis=0)
        return np.add.reduceat(out, col_idx, axis=1)

    scored_i = scored.astype(np.int64)
    n_scored = reduce_cells(scored_i).ravel()
    n_acc = reduce_cells((accurate & scored).astype(np.int64)).ravel()
    u_sum = reduce_cells(np.where(scored, uncertainty, 0.0).astype(np.float64)).ravel()
    with np.errstate(invalid="ignore"):
        mean_u = np.where(n_scored > 0, u_sum / np.maximum(n_scored, 1), np.nan)
    return n_scored, n_acc, mean_u


def count_joint(
    accurate_mask: np.ndarray,
    certainty_mask: CertaintyMask,
    scored_mask: np.ndarray,
    window: int = 1,
    uncertainty: np.ndarray | None = None,
) -> UQCounts:
    """Count the four joint events over scored units.

    ``window = 1`` counts scored pixels directly. ``window = w > 1``
    tiles the image into w x w cells (edge cells may be smaller); a cell
    is scored when it contains at least one scored pixel, accurate when
    at least half of its scored pixels are accurate (ties count as
    accurate), and certain when its mean scored uncertainty is strictly
    below the image threshold carried by ``certainty_mask`` - i.e. the
    certain/uncertain classification is re-run on cell means, which
    requires the ``uncertainty`` map.
    """
    if window < 1:
        raise InvalidParameterError(f"window must be a positive integer, got {window}")
    accurate = np.asarray(accurate_mask, dtype=bool)
    scored = np.asarray(scored_mask, dtype=bool)
    if accurate.shape != scored.shape or certainty_mask.certain.shape != scored.shape:
        raise InvalidParameterError("accuracy, certainty, and scored masks must share H x W")

    if window == 1:
        certain = certainty_mask.certain
        acc = accurate & scored
        inacc = ~accurate & scored
        n_ac = int(np.count_nonzero(acc & certain))
        n_au = int(np.count_nonzero(acc & ~certain))
        n_ic = int(np.count_nonzero(inacc & certain))
        n_iu = int(np.count_nonzero(inacc & ~certain))
        return UQCounts(n_ac=n_ac, n_au=n_au, n_ic=n_ic, n_iu=n_iu)

    if uncertainty is None:
        raise InvalidParameterError("windowed counting needs the uncertainty map")
    n_scored, n_acc, mean_u = _cell_stats(accurate, scored, np.asarray(uncertainty), window)
    live = n_scored > 0
    cell_acc = 2 * n_acc[live] >= n_scored[live]
    cell_cert = mean_u[live] < certainty_mask.tau
    n_ac = int(np.count_nonzero(cell_acc & cell_cert))
    n_au = int(np.count_nonzero(cell_acc & ~cell_cert))
    n_ic = int(np.count_nonzero(~cell_acc & cell_cert))
    n_iu = int(np.count_nonzero(~cell_acc & ~cell_cert))
    return UQCounts(n_ac=n_ac, n_au=n_au, n_ic=n_ic, n_iu=n_iu)


def p_accurate_given_certain(counts: UQCounts) -> float | None:
    denom = counts.n_ac + counts.n_ic
    return counts.n_ac / denom if denom else None


def p_uncertain_given_inaccurate(counts: UQCounts) -> float | None:
    denom = counts.n_ic + counts.n_iu
    return counts.n_iu / denom if denom else None


def pavpu(counts: UQCounts) -> float | None:
    denom = counts.total
    return (counts.n_ac + counts.n_iu) / denom if denom else None
