"""Command-line surface: fuse, evaluate, sweep, synth.

Every run is a pure function of its input files and flags; repeated runs
produce byte-identical outputs, including report field order. The thread
count only changes scheduling, never numbers, and is deliberately left
out of the report so it cannot perturb the bytes.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 every reported
metric undefined. Errors print one machine-parseable ``error: ...`` line
on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import pipeline, seg_metrics, sweep, synth, tensor_io
from .errors import InputError, IOFailure, PixeluqError, UndefinedMetricError
from .threshold import ThresholdSpec

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_UNDEFINED = 4

EVALUATE_CSV_COLUMNS = ("image_id", "task", "field", "value")
AGGREGATE_ID = "__dataset__"

_UQ_FIELDS = (
    "p_accurate_given_certain",
    "p_uncertain_given_inaccurate",
    "pavpu",
)
_SWEEP_AUC_FIELDS = tuple(f"sweep_auc_{name}" for name in _UQ_FIELDS)

_FIELD_ORDER = {
    "segmentation": ("tau", "miou", "ece", "n_ac", "n_au", "n_ic", "n_iu")
    + _UQ_FIELDS
    + _SWEEP_AUC_FIELDS,
    "depth": ("tau", "rmse", "delta1", "delta2", "delta3", "n_ac", "n_au", "n_ic", "n_iu")
    + _UQ_FIELDS
    + _SWEEP_AUC_FIELDS,
}


def _flatten_task_block(block: dict) -> dict:
    flat = {k: v for k, v in block.items() if k not in ("counts", "sweep_auc")}
    flat.update(block.get("counts", {}))
    aucs = block.get("sweep_auc") or {}
    flat.update({f"sweep_auc_{k}": v for k, v in aucs.items()})
    return flat


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_report_csv(report: dict, path) -> None:
    """Long-format CSV mirror of the JSON report (fixed column order)."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(EVALUATE_CSV_COLUMNS)
        rows = [(AGGREGATE_ID, report["aggregate"])]
        rows += [(rec["image_id"], rec) for rec in report["per_image"]]
        for image_id, record in rows:
            for task in pipeline.TASKS:
                flat = _flatten_task_block(record[task])
                for field in _FIELD_ORDER[task]:
                    if field in flat:
                        writer.writerow([image_id, task, field, _format_value(flat[field])])


def write_report_json(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")


def cmd_fuse(args) -> int:
    manifest = tensor_io.load_manifest(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    images = pipeline.load_images(
        manifest, normalize_entropy=args.normalize_entropy, threads=args.threads
    )
    for img in images:
        fused = img.fused
        fields = {
            "seg_prob": fused.seg_prob.astype(np.float32),
            "seg_label": fused.seg_label.astype(np.int32),
            "seg_unc": fused.seg_unc.astype(np.float32),
            "depth": fused.depth.astype(np.float32),
            "depth_alea": fused.depth_alea.astype(np.float32),
            "depth_epi": fused.depth_epi.astype(np.float32),
            "depth_unc": fused.depth_unc.astype(np.float32),
        }
        for name, arr in fields.items():
            tensor_io.save_tensor(out / f"{img.image_id}_{name}.npy", arr)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    spec = ThresholdSpec.parse(args.threshold, allow_negative_f=args.allow_negative_f)
    report = pipeline.evaluate_manifest(
        args.manifest,
        spec,
        window=args.window,
        calibration_bins=args.bins,
        normalize_entropy=args.normalize_entropy,
        threads=args.threads,
    )
    out = Path(args.out)
    write_report_json(report, out)
    write_report_csv(report, out.with_suffix(".csv"))
    if pipeline.all_aggregate_metrics_undefined(report):
        print(f"error: every aggregate metric is undefined; see {out}", file=sys.stderr)
        return EXIT_UNDEFINED
    return EXIT_OK


def cmd_sweep(args) -> int:
    manifest = tensor_io.load_manifest(args.manifest)
    images = pipeline.load_images(
        manifest, normalize_entropy=args.normalize_entropy, threads=args.threads
    )
    result = sweep.sweep_images(images, window=args.window)
    sweep.write_sweep_csv(result, args.out)
    if all(a is None for task in result.aucs.values() for a in task.values()):
        print(f"error: every sweep AUC is undefined; see {args.out}", file=sys.stderr)
        return EXIT_UNDEFINED
    return EXIT_OK


def cmd_synth(args) -> int:
    config = synth.SynthConfig.from_json(args.config)
    manifest_path = synth.write_dataset(config, args.out)
    print(manifest_path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pixeluq",
        description=(
            "Evaluate pixel-wise predictive uncertainty for joint semantic "
            "segmentation and monocular depth estimation."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_threshold=False):
        p.add_argument("--manifest", required=True, help="dataset manifest JSON")
        if needs_threshold:
            p.add_argument(
                "--threshold",
                default="mean",
                help="mean | median | robust:f=F | percentile:q=Q",
            )
            p.add_argument(
                "--allow-negative-f",
                action="store_true",
                help="permit an unstable negative robust scale factor",
            )
        p.add_argument("--window", type=int, default=1, help="cell size for windowed counting")
        p.add_argument(
            "--bins",
            type=int,
            default=seg_metrics.DEFAULT_ECE_BINS,
            help="number of equal-width calibration bins",
        )
        p.add_argument(
            "--normalize-entropy",
            action="store_true",
            help="divide segmentation entropy by ln C",
        )
        p.add_argument("--threads", type=int, default=1, help="parallel image workers")

    p_fuse = sub.add_parser("fuse", help="write fused prediction tensors per image")
    p_fuse.add_argument("--manifest", required=True)
    p_fuse.add_argument("--normalize-entropy", action="store_true")
    p_fuse.add_argument("--threads", type=int, default=1)
    p_fuse.add_argument("--out", required=True, help="output directory")
    p_fuse.set_defaults(fn=cmd_fuse)

    p_eval = sub.add_parser("evaluate", help="score a dataset and write a report")
    common(p_eval, needs_threshold=True)
    p_eval.add_argument("--out", required=True, help="report JSON path (CSV written alongside)")
    p_eval.set_defaults(fn=cmd_evaluate)

    p_sweep = sub.add_parser("sweep", help="percentile threshold sweep with AUC summary")
    common(p_sweep)
    p_sweep.add_argument("--out", required=True, help="curve CSV path")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--config", required=True, help="synth config JSON")
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.set_defaults(fn=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except UndefinedMetricError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNDEFINED
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (IOFailure, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PixeluqError as exc:  # anything else from this package
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
