"""In-memory bridge to the pixeluq core: call fuse/evaluate/sweep on
arrays directly, without NPY round trips.

The three functions mirror the core operations exactly and never
reimplement any math; identical inputs give identical results to the
file-based CLI path. Any object exposing the standard buffer/array
interface is accepted: C-contiguous arrays of a supported dtype pass
through zero-copy, anything else is converted with an explicit
:class:`ArrayCopyWarning`, never silently. Heavy computation happens
inside vectorized core kernels, which release the interpreter's global
lock while they run.
"""

from __future__ import annotations

import warnings

import numpy as np

from pixeluq import __version__ as _core_version
from pixeluq.errors import InvalidInputError
from pixeluq.fusion import DepthSampleStack, FusedPrediction, SegSampleStack
from pixeluq.fusion import fuse as _core_fuse
from pixeluq.pipeline import evaluate_images as _core_evaluate
from pixeluq.pipeline import prepare_from_fused as _core_prepare
from pixeluq.sweep import sweep_images as _core_sweep
from pixeluq.synth import GroundTruthFrame
from pixeluq.threshold import ThresholdSpec

__version__ = "0.1.0"
CORE_VERSION = _core_version

__all__ = [
    "ArrayCopyWarning",
    "CORE_VERSION",
    "__version__",
    "evaluate",
    "fuse",
    "sweep",
]


class ArrayCopyWarning(UserWarning):
    """Input had to be copied or converted to match the core layout."""


_FLOAT_OK = (np.dtype(np.float32), np.dtype(np.float64))
_INT_OK = (np.dtype(np.int32), np.dtype(np.int64), np.dtype(np.uint8))

_FUSED_FIELDS = (
    "seg_prob",
    "seg_label",
    "seg_unc",
    "depth",
    "depth_alea",
    "depth_epi",
    "depth_unc",
)


def _as_view(x, rank: int, name: str, kind: str = "float") -> np.ndarray:
    """Validate rank and hand the buffer to the core, copying only if needed."""
    arr = np.asarray(x)
    if arr.ndim != rank:
        raise InvalidInputError(f"{name} must have rank {rank}, got rank {arr.ndim}")
    ok_dtypes = _FLOAT_OK if kind == "float" else _INT_OK
    if arr.dtype not in ok_dtypes or not arr.flags.c_contiguous:
        warnings.warn(
            f"{name}: copied to a C-contiguous {ok_dtypes[0]} buffer "
            f"(was dtype={arr.dtype}, contiguous={arr.flags.c_contiguous})",
            ArrayCopyWarning,
            stacklevel=3,
        )
        arr = np.ascontiguousarray(arr, dtype=ok_dtypes[0] if arr.dtype not in ok_dtypes else arr.dtype)
    return arr


def fuse(seg_stack, depth_stack, normalize_entropy: bool = False) -> dict:
    """Fuse one image's sample stacks; mirrors the core fusion exactly.

    ``seg_stack`` is S x C x H x W class probabilities; ``depth_stack``
    is either an S x 2 x H x W tensor (channel 0 = mean, 1 = variance)
    or a (mu, var) pair of S x H x W arrays. Returns a dict with the
    seven fused fields.
    """
    seg = SegSampleStack(probs=_as_view(seg_stack, 4, "seg_stack"))
    if isinstance(depth_stack, (tuple, list)) and len(depth_stack) == 2:
        depth = DepthSampleStack(
            mu=_as_view(depth_stack[0], 3, "depth mu"),
            var=_as_view(depth_stack[1], 3, "depth var"),
        )
    else:
        depth = DepthSampleStack.from_channels(_as_view(depth_stack, 4, "depth_stack"))
    fused = _core_fuse(seg, depth, normalize_entropy=normalize_entropy)
    return {name: getattr(fused, name) for name in _FUSED_FIELDS}


def _to_fused(obj) -> FusedPrediction:
    if isinstance(obj, FusedPrediction):
        return obj
    try:
        return FusedPrediction(**{name: np.asarray(obj[name]) for name in _FUSED_FIELDS})
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(
            f"fused input must be a FusedPrediction or a dict with fields {_FUSED_FIELDS}"
        ) from exc


def _to_gt(obj) -> GroundTruthFrame:
    if isinstance(obj, GroundTruthFrame):
        return GroundTruthFrame(
            labels=_as_view(obj.labels, 2, "gt labels", kind="int"),
            depth=_as_view(obj.depth, 2, "gt depth"),
        )
    if isinstance(obj, (tuple, list)) and len(obj) == 2:
        return GroundTruthFrame(
            labels=_as_view(obj[0], 2, "gt labels", kind="int"),
            depth=_as_view(obj[1], 2, "gt depth"),
        )
    raise InvalidInputError("gt must be a GroundTruthFrame or a (labels, depth) pair")


def _as_pairs(fused, gt) -> list[tuple[FusedPrediction, GroundTruthFrame]]:
    single = isinstance(fused, (dict, FusedPrediction))
    fused_list = [fused] if single else list(fused)
    gt_list = [gt] if single else list(gt)
    if len(fused_list) != len(gt_list):
        raise InvalidInputError(
            f"{len(fused_list)} fused predictions vs {len(gt_list)} ground-truth frames"
        )
    return [(_to_fused(f), _to_gt(g)) for f, g in zip(fused_list, gt_list)]


def _prepare(pairs, ignore_index, depth_invalid_value):
    return [
        _core_prepare(
            f"array_{i:03d}",
            fused,
            gt,
            ignore_index=ignore_index,
            depth_invalid_value=depth_invalid_value,
        )
        for i, (fused, gt) in enumerate(pairs)
    ]


def evaluate(
    fused,
    gt,
    threshold: str | ThresholdSpec = "mean",
    window: int = 1,
    *,
    calibration_bins: int = 15,
    ignore_index: int = 255,
    depth_invalid_value: float = 0.0,
) -> dict:
    """Score fused predictions against ground truth; mirrors the CLI
    evaluate command minus the files.

    ``fused``/``gt`` may be a single prediction and frame or parallel
    sequences of them (one per image). Returns the same report structure
    the CLI writes as JSON.
    """
    spec = threshold if isinstance(threshold, ThresholdSpec) else ThresholdSpec.parse(threshold)
    images = _prepare(_as_pairs(fused, gt), ignore_index, depth_invalid_value)
    report = _core_evaluate(
        images,
        spec,
        window=window,
        calibration_bins=calibration_bins,
        ignore_index=ignore_index,
    )
    report["config"] = {
        "depth_invalid_value": float(depth_invalid_value),
        **report["config"],
    }
    return report


def sweep(
    fused_dataset,
    window: int = 1,
    *,
    ignore_index: int = 255,
    depth_invalid_value: float = 0.0,
) -> list[dict]:
    """Percentile sweep over a dataset of (fused, gt) pairs.

    Returns the curve table as a list of rows with the same columns the
    CLI writes to CSV: task, metric, percentile (1..99 or "auc"), value.
    """
    pairs = [( _to_fused(f), _to_gt(g)) for f, g in fused_dataset]
    images = _prepare(pairs, ignore_index, depth_invalid_value)
    result = _core_sweep(images, window=window)
    rows: list[dict] = []
    for task, metrics in result.curves.items():
        for metric, points in metrics.items():
            for q, value in points:
                rows.append({"task": task, "metric": metric, "percentile": q, "value": value})
    for task, metrics in result.aucs.items():
        for metric, value in metrics.items():
            rows.append({"task": task, "metric": metric, "percentile": "auc", "value": value})
    return rows
