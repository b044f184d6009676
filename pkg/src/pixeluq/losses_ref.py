"""Reference implementations of the training losses, with gradients.

These are validation oracles, not a training engine: scalar categorical
cross-entropy, the Gaussian negative log-likelihood over a predicted
mean/variance pair, and an overflow-safe softplus. Gradients are
returned analytically so they can be checked against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InfiniteLossError, InvalidInputError

VAR_FLOOR = 1e-6


@dataclass(frozen=True)
class GnllTerm:
    """One (ground truth, predicted mean, predictive variance) triple.

    The variance is floored at ``VAR_FLOOR`` because the loss is
    singular at zero; ``floored`` records whether the floor fired.
    """

    y: float
    mu: float
    var: float
    floored: bool = field(init=False, default=False)

    def __post_init__(self):
        if not np.isfinite(self.y) or not np.isfinite(self.mu) or not np.isfinite(self.var):
            raise InvalidInputError("GNLL inputs must be finite")
        if self.var < VAR_FLOOR:
            object.__setattr__(self, "var", VAR_FLOOR)
            object.__setattr__(self, "floored", True)


def cross_entropy(probs: np.ndarray, gt_class: int) -> tuple[float, np.ndarray]:
    """Per-pixel categorical cross-entropy and its gradient.

    ``probs`` is one C-vector of class probabilities. The loss is
    ``-ln(probs[gt_class])``; the gradient w.r.t. the probabilities has
    a single nonzero entry, ``-1/probs[gt_class]`` at the target class.
    A zero probability at the target raises :class:`InfiniteLossError`
    instead of silently returning inf.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1:
        raise InvalidInputError(f"probs must be a 1-D class vector, got shape {p.shape}")
    if not 0 <= gt_class < p.size:
        raise InvalidInputError(f"gt_class {gt_class} outside [0, {p.size})")
    if np.isnan(p).any() or p.min() < 0.0:
        raise InvalidInputError("probs must be non-negative and NaN-free")
    if abs(p.sum() - 1.0) > 1e-4:
        raise InvalidInputError("probs must sum to 1 within 1e-4")
    p_gt = float(p[gt_class])
    if p_gt == 0.0:
        raise InfiniteLossError("target class has probability 0; loss would be infinite")
    grad = np.zeros_like(p)
    grad[gt_class] = -1.0 / p_gt
    return -float(np.log(p_gt)), grad


def gnll(term: GnllTerm) -> tuple[float, float, float]:
    """Gaussian negative log-likelihood and gradients w.r.t. mu and var.

    value = 0.5 * ((y - mu)^2 / var + ln var)
    d/dmu = (mu - y) / var
    d/dvar = 0.5 * (1/var - (y - mu)^2 / var^2)
    """
    resid = term.y - term.mu
    value = 0.5 * (resid * resid / term.var + np.log(term.var))
    d_mu = (term.mu - term.y) / term.var
    d_var = 0.5 * (1.0 / term.var - resid * resid / (term.var * term.var))
    return float(value), float(d_mu), float(d_var)


def softplus(x):
    """ln(1 + e^x), overflow-safe at both asymptotes."""
    return np.logaddexp(0.0, x)


def joint_loss(ce_value: float, gnll_value: float, depth_weight: float = 1.0) -> float:
    """Weighted sum of the two task losses."""
    return float(ce_value + depth_weight * gnll_value)
