"""Synthetic prediction/ground-truth generator with controllable calibration.

Replaces full-scale model training as the substrate for statistical
tests: segmentation sample stacks whose ground truth is drawn from the
emitted mean probabilities (calibrated by construction, ECE -> 0), a
sharpening knob that makes them over- or underconfident, depth samples
whose ground truth is drawn around the fused prediction with the fused
total variance (so Gaussian interval coverage is exact by construction),
a switch that decouples the emitted uncertainty from the actual errors,
and an out-of-domain shift that grows the errors without informing the
emitted uncertainties.

Randomness is counter-based: one Philox stream keyed by (seed, image)
per image, with whole-image vectorized draws, so outputs are
byte-identical regardless of generation order or thread count.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import fusion, tensor_io
from .errors import InvalidParameterError

SEG_CALIBRATION_MODES = ("calibrated", "overconfident", "underconfident")


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    height: int = 64
    width: int = 64
    num_classes: int = 4
    num_samples: int = 5
    num_images: int = 1
    seg_calibration: str = "calibrated"
    gamma: float = 1.0  # probability sharpening exponent for the miscalibrated modes
    logit_scale: float = 1.5
    sample_logit_sd: float = 0.35
    depth_min: float = 2.0
    depth_max: float = 10.0
    depth_noise_sd: float = 0.8
    epistemic_sd: float = 0.1
    uncertainty_informative: bool = True
    ood_shift: float = 0.0
    ignore_index: int = 255
    ignore_fraction: float = 0.02
    invalid_fraction: float = 0.02
    depth_invalid_value: float = 0.0
    blocky: bool = False
    block_size: int = 8

    def __post_init__(self):
        for name in ("height", "width", "num_classes", "num_samples", "num_images"):
            if getattr(self, name) < 1:
                raise InvalidParameterError(f"{name} must be positive")
        if self.seg_calibration not in SEG_CALIBRATION_MODES:
            raise InvalidParameterError(
                f"seg_calibration must be one of {SEG_CALIBRATION_MODES}"
            )
        if not self.gamma > 0:
            raise InvalidParameterError("gamma must be > 0")
        if self.seg_calibration == "overconfident" and not self.gamma > 1:
            raise InvalidParameterError("overconfident mode needs gamma > 1")
        if self.seg_calibration == "underconfident" and not self.gamma < 1:
            raise InvalidParameterError("underconfident mode needs gamma < 1")
        if self.ood_shift < 0:
            raise InvalidParameterError("ood_shift must be >= 0")
        if not 0 <= self.ignore_fraction < 1 or not 0 <= self.invalid_fraction < 1:
            raise InvalidParameterError("mask fractions must lie in [0, 1)")
        if self.depth_noise_sd <= 0 or self.epistemic_sd < 0:
            raise InvalidParameterError("depth_noise_sd must be > 0 and epistemic_sd >= 0")
        if not self.depth_min > 0 or not self.depth_max > self.depth_min:
            raise InvalidParameterError("need 0 < depth_min < depth_max")
        if self.block_size < 1:
            raise InvalidParameterError("block_size must be positive")

    @classmethod
    def from_json(cls, path) -> "SynthConfig":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise InvalidParameterError("synth config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise InvalidParameterError(f"unknown synth config fields: {sorted(unknown)}")
        return cls(**doc)

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class GroundTruthFrame:
    """H x W class labels (with ignore index) and depth (with invalid marker)."""

    labels: np.ndarray  # int32
    depth: np.ndarray  # float32


def _image_rng(seed: int, image_index: int) -> np.random.Generator:
    # Philox is counter-based: streams keyed by (seed, image) are
    # independent, so generation order cannot matter.
    return np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, image_index]))


def _blocky_noise(rng, shape_chw, block):
    c, h, w = shape_chw
    hb = -(-h // block)
    wb = -(-w // block)
    coarse = rng.standard_normal((c, hb, wb))
    return np.repeat(np.repeat(coarse, block, axis=1), block, axis=2)[:, :h, :w]


def _categorical(rng, probs_chw: np.ndarray) -> np.ndarray:
    """Draw one label per pixel from per-pixel class distributions."""
    cdf = np.cumsum(probs_chw, axis=0)
    u = rng.random(probs_chw.shape[1:])
    labels = (u[None, :, :] >= cdf).sum(axis=0)
    return np.minimum(labels, probs_chw.shape[0] - 1).astype(np.int32)


def generate(
    config: SynthConfig, image_index: int = 0
) -> tuple[fusion.SegSampleStack, fusion.DepthSampleStack, GroundTruthFrame]:
    """Generate one image's sample stacks and ground truth.

    Deterministic given (config.seed, image_index). Emitted stacks are
    float32, matching the storage contract, so in-memory use and a file
    round trip see identical bits.
    """
    rng = _image_rng(config.seed, image_index)
    h, w, c, s = config.height, config.width, config.num_classes, config.num_samples

    # --- segmentation -------------------------------------------------
    if config.blocky:
        base_logits = config.logit_scale * _blocky_noise(rng, (c, h, w), config.block_size)
    else:
        base_logits = config.logit_scale * rng.standard_normal((c, h, w))
    sample_logits = base_logits[None] + config.sample_logit_sd * rng.standard_normal((s, c, h, w))
    sample_logits -= sample_logits.max(axis=1, keepdims=True)
    sample_probs = np.exp(sample_logits)
    sample_probs /= sample_probs.sum(axis=1, keepdims=True)

    honest_mean = sample_probs.mean(axis=0)

    if config.seg_calibration == "calibrated":
        emitted = sample_probs
    else:
        # sharpen (gamma > 1) or flatten (gamma < 1) what the model
        # reports; ground truth still follows the honest field
        emitted = sample_probs**config.gamma
        emitted /= emitted.sum(axis=1, keepdims=True)

    if config.uncertainty_informative:
        gt_labels = _categorical(rng, honest_mean)
    else:
        # constant accuracy everywhere: errors carry no relation to the
        # emitted per-pixel uncertainty
        acc_rate = float(honest_mean.max(axis=0).mean())
        top = honest_mean.argmax(axis=0).astype(np.int32)
        miss = rng.random((h, w)) >= acc_rate
        if c > 1:
            other = (top + 1 + rng.integers(0, c - 1, size=(h, w))) % c
            gt_labels = np.where(miss, other, top).astype(np.int32)
        else:
            gt_labels = top

    if config.ood_shift > 0 and c > 1:
        flip_p = min(0.49, 0.25 * config.ood_shift)
        flip = rng.random((h, w)) < flip_p
        shifted = (gt_labels + 1 + rng.integers(0, c - 1, size=(h, w))) % c
        gt_labels = np.where(flip, shifted, gt_labels).astype(np.int32)

    ignore = rng.random((h, w)) < config.ignore_fraction
    gt_labels = np.where(ignore, np.int32(config.ignore_index), gt_labels).astype(np.int32)

    seg_stack = fusion.SegSampleStack(probs=emitted.astype(np.float32))

    # --- depth ---------------------------------------------------------
    true_depth = rng.uniform(config.depth_min, config.depth_max, (h, w))
    alea_sd = config.depth_noise_sd * (0.5 + rng.random((h, w)))
    var = np.broadcast_to((alea_sd**2).astype(np.float32), (s, h, w)).copy()
    mu = (true_depth[None] + config.epistemic_sd * rng.standard_normal((s, h, w))).astype(
        np.float32
    )

    # ground truth is drawn around the fused prediction with the fused
    # total variance, so interval coverage is exact by construction
    fused_depth, _, _, fused_total = fusion.fuse_depth(fusion.DepthSampleStack(mu=mu, var=var))
    eps = rng.standard_normal((h, w))
    if config.uncertainty_informative:
        noise_sd = np.sqrt(fused_total)
    else:
        noise_sd = np.sqrt(float(fused_total.mean()))
    gt_depth = fused_depth + noise_sd * eps
    gt_depth = np.maximum(gt_depth, 1e-3)

    if config.ood_shift > 0:
        mu = mu + np.float32(config.ood_shift)  # bias the predictions, not their variances

    invalid = rng.random((h, w)) < config.invalid_fraction
    gt_depth = np.where(invalid, config.depth_invalid_value, gt_depth).astype(np.float32)

    depth_stack = fusion.DepthSampleStack(mu=mu, var=var)
    return seg_stack, depth_stack, GroundTruthFrame(labels=gt_labels, depth=gt_depth)


def generate_dataset(config: SynthConfig):
    """Yield (image_id, seg_stack, depth_stack, gt) for every image."""
    digits = max(3, len(str(config.num_images - 1)))
    for i in range(config.num_images):
        seg, depth, gt = generate(config, image_index=i)
        yield f"synth_{i:0{digits}d}", seg, depth, gt


def write_dataset(config: SynthConfig, out_dir) -> Path:
    """Materialize the dataset as NPY files plus a manifest; returns its path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for image_id, seg, depth, gt in generate_dataset(config):
        paths = {
            "seg_stack_path": out / f"{image_id}_seg_stack.npy",
            "depth_stack_path": out / f"{image_id}_depth_stack.npy",
            "gt_label_path": out / f"{image_id}_gt_label.npy",
            "gt_depth_path": out / f"{image_id}_gt_depth.npy",
        }
        tensor_io.save_tensor(paths["seg_stack_path"], seg.probs)
        tensor_io.save_tensor(
            paths["depth_stack_path"], np.stack([depth.mu, depth.var], axis=1)
        )
        tensor_io.save_tensor(paths["gt_label_path"], gt.labels)
        tensor_io.save_tensor(paths["gt_depth_path"], gt.depth)
        entries.append(tensor_io.ManifestEntry(image_id=image_id, **paths))
    manifest = tensor_io.DatasetManifest(
        entries=tuple(entries),
        num_classes=config.num_classes,
        ignore_index=config.ignore_index,
        depth_invalid_value=config.depth_invalid_value,
    )
    manifest_path = out / "manifest.json"
    tensor_io.save_manifest(manifest, manifest_path)
    return manifest_path
