"""Dataset-level evaluation: fuse every image, score both tasks, merge.

Per image: fuse the sample stacks, derive scored masks (segmentation
scores pixels whose ground-truth label is not the ignore index; depth
scores pixels with valid ground-truth depth), compute the per-image
uncertainty threshold, and count the accurate x certain joint events.
Dataset numbers merge the per-image accumulators (micro-aggregation):
one global confusion matrix, one global set of calibration bins, one
global sum of squares, and globally merged joint counts with per-image
thresholds.

Accumulators merge associatively and images are independent, so the
per-image work can run in a thread pool; results are merged in manifest
order, which keeps reports byte-identical for any thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import depth_metrics, seg_metrics, uq_metrics
from .errors import UndefinedMetricError, UndefinedThresholdError
from .fusion import DepthSampleStack, FusedPrediction, SegSampleStack, fuse
from .synth import GroundTruthFrame
from .tensor_io import DatasetManifest, load_manifest, load_tensor
from .threshold import ThresholdSpec, classify, compute_threshold

TASKS = ("segmentation", "depth")
UQ_METRIC_NAMES = ("p_accurate_given_certain", "p_uncertain_given_inaccurate", "pavpu")

try:
    from importlib.metadata import version as _pkg_version

    TOOL_VERSION = _pkg_version("pixeluq")
except Exception:  # pragma: no cover - uninstalled tree
    TOOL_VERSION = "0.1.0"


@dataclass(frozen=True)
class PreparedImage:
    """Everything evaluation needs about one image, fused and masked."""

    image_id: str
    num_classes: int
    fused: FusedPrediction
    gt_label: np.ndarray
    gt_depth: np.ndarray
    seg_scored: np.ndarray  # gt label != ignore_index
    seg_accurate: np.ndarray  # predicted label == gt label (on scored)
    depth_valid: np.ndarray  # gt depth != invalid marker
    depth_accurate: np.ndarray  # ratio test at 1.25 (on valid)
    delta_masks: tuple[depth_metrics.DepthAccuracyMask, ...]

    def scored(self, task: str) -> np.ndarray:
        return self.seg_scored if task == "segmentation" else self.depth_valid

    def accurate(self, task: str) -> np.ndarray:
        return self.seg_accurate if task == "segmentation" else self.depth_accurate

    def uncertainty(self, task: str) -> np.ndarray:
        return self.fused.seg_unc if task == "segmentation" else self.fused.depth_unc


def prepare_from_fused(
    image_id: str,
    fused: FusedPrediction,
    gt: GroundTruthFrame,
    *,
    ignore_index: int,
    depth_invalid_value: float = 0.0,
) -> PreparedImage:
    """Derive masks and accuracy decisions from already-fused predictions."""
    gt_label = np.asarray(gt.labels)
    gt_depth = np.asarray(gt.depth)
    seg_scored = gt_label != ignore_index
    seg_accurate = seg_scored & (fused.seg_label == gt_label)
    depth_valid = depth_metrics.valid_depth_mask(gt_depth, depth_invalid_value)
    delta_masks = tuple(
        depth_metrics.delta_accuracy(fused.depth, gt_depth, depth_valid, thr)
        for thr in depth_metrics.DELTA_THRESHOLDS
    )
    return PreparedImage(
        image_id=image_id,
        num_classes=fused.num_classes,
        fused=fused,
        gt_label=gt_label,
        gt_depth=gt_depth,
        seg_scored=seg_scored,
        seg_accurate=seg_accurate,
        depth_valid=depth_valid,
        depth_accurate=delta_masks[0].accurate,
        delta_masks=delta_masks,
    )


def prepare_image(
    image_id: str,
    seg_stack: SegSampleStack | np.ndarray,
    depth_stack: DepthSampleStack | np.ndarray,
    gt: GroundTruthFrame,
    *,
    ignore_index: int,
    depth_invalid_value: float = 0.0,
    normalize_entropy: bool = False,
) -> PreparedImage:
    fused = fuse(seg_stack, depth_stack, normalize_entropy=normalize_entropy)
    return prepare_from_fused(
        image_id,
        fused,
        gt,
        ignore_index=ignore_index,
        depth_invalid_value=depth_invalid_value,
    )


def _parallel_map(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))  # order preserved


def load_images(
    manifest: DatasetManifest, *, normalize_entropy: bool = False, threads: int = 1
) -> list[PreparedImage]:
    """Load, fuse, and prepare every manifest entry (manifest order)."""

    def _one(entry):
        seg = SegSampleStack(probs=load_tensor(entry.seg_stack_path))
        depth = DepthSampleStack.from_channels(load_tensor(entry.depth_stack_path))
        gt = GroundTruthFrame(
            labels=load_tensor(entry.gt_label_path),
            depth=load_tensor(entry.gt_depth_path),
        )
        return prepare_image(
            entry.image_id,
            seg,
            depth,
            gt,
            ignore_index=manifest.ignore_index,
            depth_invalid_value=manifest.depth_invalid_value,
            normalize_entropy=normalize_entropy,
        )

    return _parallel_map(_one, manifest.entries, threads)


def _image_task_counts(
    img: PreparedImage, task: str, spec: ThresholdSpec, window: int
) -> tuple[float | None, uq_metrics.UQCounts]:
    """Per-image threshold and joint counts for one task.

    An image with no scored pixels for the task has no threshold and
    contributes nothing; its tau is reported as None.
    """
    u = img.uncertainty(task)
    scored = img.scored(task)
    try:
        tau = compute_threshold(u, scored, spec)
    except UndefinedThresholdError:
        return None, uq_metrics.UQCounts()
    mask = classify(u, scored, tau)
    counts = uq_metrics.count_joint(
        img.accurate(task), mask, scored, window=window, uncertainty=u
    )
    return tau, counts


def _ratio_block(counts: uq_metrics.UQCounts) -> dict:
    return {
        "counts": counts.as_dict(),
        "p_accurate_given_certain": uq_metrics.p_accurate_given_certain(counts),
        "p_uncertain_given_inaccurate": uq_metrics.p_uncertain_given_inaccurate(counts),
        "pavpu": uq_metrics.pavpu(counts),
    }


def _maybe(fn):
    try:
        return fn()
    except UndefinedMetricError:
        return None


def evaluate_images(
    images: list[PreparedImage],
    spec: ThresholdSpec,
    *,
    window: int = 1,
    calibration_bins: int = seg_metrics.DEFAULT_ECE_BINS,
    ignore_index: int,
    threads: int = 1,
) -> dict:
    """Score a prepared dataset; returns the report as a plain dict."""

    def _one(img: PreparedImage):
        confusion = seg_metrics.accumulate_confusion(
            img.fused.seg_label, img.gt_label, img.num_classes, ignore_index
        )
        calibration = seg_metrics.accumulate_calibration(
            img.fused.seg_prob, img.gt_label, ignore_index, calibration_bins
        )
        rmse_acc = depth_metrics.accumulate_rmse(img.fused.depth, img.gt_depth, img.depth_valid)
        seg_tau, seg_counts = _image_task_counts(img, "segmentation", spec, window)
        depth_tau, depth_counts = _image_task_counts(img, "depth", spec, window)
        record = {
            "image_id": img.image_id,
            "segmentation": {
                "tau": seg_tau,
                "miou": _maybe(lambda: seg_metrics.miou(confusion)),
                "ece": _maybe(lambda: seg_metrics.ece_from_bins(calibration)),
                **_ratio_block(seg_counts),
            },
            "depth": {
                "tau": depth_tau,
                "rmse": _maybe(rmse_acc.value),
                **{
                    f"delta{i + 1}": _maybe(lambda m=m: m.accuracy)
                    for i, m in enumerate(img.delta_masks)
                },
                **_ratio_block(depth_counts),
            },
        }
        return record, confusion, calibration, rmse_acc, seg_counts, depth_counts

    results = _parallel_map(_one, images, threads)

    # associative merges, applied in manifest order
    per_image = [r[0] for r in results]
    confusion = seg_metrics.ConfusionMatrix.zeros(images[0].num_classes if images else 1)
    calibration = seg_metrics.CalibrationBins.zeros(calibration_bins)
    rmse_acc = depth_metrics.RmseAccumulator()
    seg_counts = uq_metrics.UQCounts()
    depth_counts = uq_metrics.UQCounts()
    delta_acc = [np.int64(0)] * len(depth_metrics.DELTA_THRESHOLDS)
    valid_total = np.int64(0)
    for i, (_, conf, cal, rm, sc, dc) in enumerate(results):
        confusion = confusion + conf
        calibration = calibration + cal
        rmse_acc = rmse_acc + rm
        seg_counts = seg_counts + sc
        depth_counts = depth_counts + dc
        img = images[i]
        valid_total += img.depth_valid.sum()
        for j, mask in enumerate(img.delta_masks):
            delta_acc[j] += mask.accurate.sum()

    from .sweep import sweep_images  # local import; sweep builds on this module

    sweep_aucs = sweep_images(images, window=window).aucs if images else None
    aggregate = {
        "segmentation": {
            "miou": _maybe(lambda: seg_metrics.miou(confusion)),
            "ece": _maybe(lambda: seg_metrics.ece_from_bins(calibration)),
            **_ratio_block(seg_counts),
            "sweep_auc": sweep_aucs["segmentation"] if sweep_aucs else None,
        },
        "depth": {
            "rmse": _maybe(rmse_acc.value),
            **{
                f"delta{j + 1}": (float(delta_acc[j] / valid_total) if valid_total else None)
                for j in range(len(delta_acc))
            },
            **_ratio_block(depth_counts),
            "sweep_auc": sweep_aucs["depth"] if sweep_aucs else None,
        },
    }
    return {
        "tool": {"name": "pixeluq", "version": TOOL_VERSION},
        "config": {
            "threshold": spec.describe(),
            "window": int(window),
            "calibration_bins": int(calibration_bins),
            "ignore_index": int(ignore_index),
            "sweep": {
                "percentiles": "1..99 step 1",
                "auc": "trapezoid normalized by covered span",
            },
        },
        "per_image": per_image,
        "aggregate": aggregate,
    }


def evaluate_manifest(
    manifest_path,
    spec: ThresholdSpec,
    *,
    window: int = 1,
    calibration_bins: int = seg_metrics.DEFAULT_ECE_BINS,
    normalize_entropy: bool = False,
    threads: int = 1,
) -> dict:
    """Full evaluate pipeline from a manifest file."""
    manifest = load_manifest(manifest_path)
    images = load_images(manifest, normalize_entropy=normalize_entropy, threads=threads)
    report = evaluate_images(
        images,
        spec,
        window=window,
        calibration_bins=calibration_bins,
        ignore_index=manifest.ignore_index,
        threads=threads,
    )
    report["config"] = {
        "manifest": str(manifest_path),
        "num_classes": manifest.num_classes,
        "depth_invalid_value": manifest.depth_invalid_value,
        "normalize_entropy": bool(normalize_entropy),
        **report["config"],
    }
    return report


def all_aggregate_metrics_undefined(report: dict) -> bool:
    """True when every dataset-level metric in the report is null."""
    for task_block in report["aggregate"].values():
        for key, value in task_block.items():
            if key == "counts":
                continue
            if isinstance(value, dict):
                if any(v is not None for v in value.values()):
                    return False
            elif value is not None:
                return False
    return True
