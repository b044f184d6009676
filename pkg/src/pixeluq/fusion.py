"""Collapse S prediction samples per image into fused predictions and
per-pixel uncertainty maps for both tasks.

Segmentation: the fused class distribution is the arithmetic mean of the
per-sample softmax probabilities; the predicted label is its argmax and
the predictive uncertainty is the entropy of the mean distribution
(natural log). Depth: sample means pass through ReLU first, then the
fused depth is their mean; aleatoric uncertainty is the mean of the
per-sample predictive variances, epistemic uncertainty is the population
variance of the (ReLU'd) sample means, and the total is their sum.

All reductions over the sample axis use a sorted adjacent-pair summation
so that reordering the samples, or duplicating the whole stack (S -> 2S),
cannot change a single rounding step: fused outputs are bit-identical
under both transformations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyStackError, InvalidInputError

PROB_SUM_TOL = 1e-4


@dataclass(frozen=True)
class SegSampleStack:
    """S x C x H x W per-sample class probabilities."""

    probs: np.ndarray

    def validate(self) -> None:
        p = self.probs
        if p.ndim != 4:
            raise InvalidInputError(f"seg stack must be rank 4 (S,C,H,W), got shape {p.shape}")
        if p.shape[0] == 0:
            raise EmptyStackError("seg stack has no samples (S = 0)")
        if np.isnan(p).any():
            raise InvalidInputError("seg stack contains NaN")
        if p.min() < 0.0 or p.max() > 1.0:
            raise InvalidInputError("seg stack probabilities outside [0, 1]")
        sums = p.sum(axis=1, dtype=np.float64)
        if np.abs(sums - 1.0).max() > PROB_SUM_TOL:
            raise InvalidInputError(
                f"per-pixel class probabilities must sum to 1 within {PROB_SUM_TOL}"
            )


@dataclass(frozen=True)
class DepthSampleStack:
    """S x H x W predicted depth means and predictive variances."""

    mu: np.ndarray
    var: np.ndarray

    def validate(self) -> None:
        if self.mu.ndim != 3 or self.var.ndim != 3:
            raise InvalidInputError("depth stack mu/var must be rank 3 (S,H,W)")
        if self.mu.shape != self.var.shape:
            raise InvalidInputError(
                f"mu shape {self.mu.shape} != var shape {self.var.shape}"
            )
        if self.mu.shape[0] == 0:
            raise EmptyStackError("depth stack has no samples (S = 0)")
        if np.isnan(self.mu).any() or np.isnan(self.var).any():
            raise InvalidInputError("depth stack contains NaN")
        if self.var.min() < 0.0:
            raise InvalidInputError("predictive variances must be non-negative")

    @classmethod
    def from_channels(cls, stack: np.ndarray) -> "DepthSampleStack":
        """Split an S x 2 x H x W tensor (channel 0 = mean, 1 = variance)."""
        if stack.ndim != 4 or stack.shape[1] != 2:
            raise InvalidInputError(
                f"depth stack tensor must be rank 4 (S,2,H,W), got shape {stack.shape}"
            )
        return cls(mu=stack[:, 0], var=stack[:, 1])


@dataclass(frozen=True)
class FusedPrediction:
    """Per-pixel fused predictions and uncertainties for one image."""

    seg_prob: np.ndarray  # (C, H, W) mean class probabilities
    seg_label: np.ndarray  # (H, W) int32 argmax labels
    seg_unc: np.ndarray  # (H, W) predictive entropy of the mean
    depth: np.ndarray  # (H, W) fused depth (ReLU before averaging)
    depth_alea: np.ndarray  # (H, W) mean predictive variance
    depth_epi: np.ndarray  # (H, W) population variance of sample means
    depth_unc: np.ndarray  # (H, W) alea + epi

    @property
    def num_classes(self) -> int:
        return int(self.seg_prob.shape[0])


def _pairwise_sum(a: np.ndarray) -> np.ndarray:
    """Adjacent-pair binary reduction along axis 0; odd tail carried up."""
    while a.shape[0] > 1:
        n = a.shape[0]
        m = (n // 2) * 2
        pairs = a[0:m:2] + a[1:m:2]
        a = np.concatenate([pairs, a[m:]], axis=0) if n % 2 else pairs
    return a[0]


def sample_mean(x: np.ndarray) -> np.ndarray:
    """Mean over axis 0 via sorted adjacent-pair reduction (order-canonical)."""
    xs = np.sort(x, axis=0)
    return _pairwise_sum(xs) / x.shape[0]


def sample_mean_popvar(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and population (divide-by-S) variance over axis 0, order-canonical."""
    xs = np.sort(x, axis=0)
    s = x.shape[0]
    mean = _pairwise_sum(xs) / s
    var = _pairwise_sum((xs - mean) ** 2) / s
    return mean, var


def fuse_segmentation(
    stack: SegSampleStack | np.ndarray, normalize_entropy: bool = False
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fuse a segmentation sample stack.

    Returns ``(seg_prob, seg_label, seg_unc)``: the mean probabilities
    (C,H,W), argmax labels with lowest-index tie-break (H,W) int32, and
    the predictive entropy of the mean distribution (H,W). With
    ``normalize_entropy`` the entropy is divided by ln C to land in
    [0, 1] (C = 1 maps to all zeros).
    """
    if not isinstance(stack, SegSampleStack):
        stack = SegSampleStack(probs=np.asarray(stack))
    stack.validate()
    probs = np.asarray(stack.probs, dtype=np.float64)

    seg_prob = sample_mean(probs)
    seg_label = np.argmax(seg_prob, axis=0).astype(np.int32)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(seg_prob > 0.0, seg_prob * np.log(seg_prob), 0.0)
    seg_unc = -np.sum(terms, axis=0)
    if normalize_entropy:
        c = seg_prob.shape[0]
        seg_unc = seg_unc / np.log(c) if c > 1 else np.zeros_like(seg_unc)
    return seg_prob, seg_label, seg_unc


def fuse_depth(
    stack: DepthSampleStack | np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Fuse a depth sample stack.

    Returns ``(depth, depth_alea, depth_epi, depth_unc)``. ReLU is
    applied to the sample means before both the mean and the
    variance-of-means so every statistic describes the same
    post-activation quantity; ``depth_unc`` is exactly
    ``depth_alea + depth_epi``.
    """
    if not isinstance(stack, DepthSampleStack):
        stack = DepthSampleStack.from_channels(np.asarray(stack))
    stack.validate()
    mu = np.asarray(stack.mu, dtype=np.float64)
    var = np.asarray(stack.var, dtype=np.float64)

    rectified = np.maximum(mu, 0.0)
    depth, depth_epi = sample_mean_popvar(rectified)
    depth_alea = sample_mean(var)
    depth_unc = depth_alea + depth_epi
    return depth, depth_alea, depth_epi, depth_unc


def fuse(
    seg_stack: SegSampleStack | np.ndarray,
    depth_stack: DepthSampleStack | np.ndarray,
    normalize_entropy: bool = False,
) -> FusedPrediction:
    """Fuse both stacks of one image into a :class:`FusedPrediction`."""
    seg_prob, seg_label, seg_unc = fuse_segmentation(seg_stack, normalize_entropy)
    depth, alea, epi, unc = fuse_depth(depth_stack)
    if seg_prob.shape[1:] != depth.shape:
        raise InvalidInputError(
            f"seg stack {seg_prob.shape[1:]} and depth stack {depth.shape} disagree on H x W"
        )
    return FusedPrediction(
        seg_prob=seg_prob,
        seg_label=seg_label,
        seg_unc=seg_unc,
        depth=depth,
        depth_alea=alea,
        depth_epi=epi,
        depth_unc=unc,
    )
