"""Bit-exact tensor and manifest I/O.

Tensors travel as NPY v1.0 files (magic ``\\x93NUMPY``, version 1.0,
little-endian, C-order) restricted to the dtypes float32, int32, and
uint8. The reader and writer speak the byte format directly so that
anything other than a well-formed v1.0 payload is rejected with a
precise error instead of being silently coerced.

Datasets are described by a UTF-8 JSON manifest::

    {
      "num_classes": 19,
      "ignore_index": 255,
      "depth_invalid_value": 0.0,
      "entries": [
        {"image_id": "frame_000",
         "seg_stack_path": "frame_000_seg_stack.npy",
         "depth_stack_path": "frame_000_depth_stack.npy",
         "gt_label_path": "frame_000_gt_label.npy",
         "gt_depth_path": "frame_000_gt_depth.npy"}
      ]
    }

Relative paths are resolved against the manifest's directory.
"""

from __future__ import annotations

import ast
import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ManifestError,
    MissingInputError,
    TensorFormatError,
    UnsupportedDtypeError,
)

_MAGIC = b"\x93NUMPY"
_VERSION = b"\x01\x00"

# descr string <-> dtype for the supported storage element types
_DESCR_TO_DTYPE = {
    "<f4": np.dtype("<f4"),
    "<i4": np.dtype("<i4"),
    "|u1": np.dtype("|u1"),
}
_DTYPE_TO_DESCR = {np.dtype(np.float32): "<f4", np.dtype(np.int32): "<i4", np.dtype(np.uint8): "|u1"}

SUPPORTED_DTYPES = tuple(_DTYPE_TO_DESCR)


def _parse_header(f, path) -> tuple[tuple[int, ...], np.dtype, int]:
    """Parse magic + v1.0 header; returns (shape, dtype, data_offset)."""
    start = f.read(6)
    if start != _MAGIC:
        raise TensorFormatError(f"{path}: not an NPY file (bad magic)")
    version = f.read(2)
    if len(version) < 2:
        raise TensorFormatError(f"{path}: truncated header")
    if version != _VERSION:
        raise TensorFormatError(
            f"{path}: unsupported NPY version {version[0]}.{version[1]} (only 1.0 is accepted)"
        )
    raw_len = f.read(2)
    if len(raw_len) < 2:
        raise TensorFormatError(f"{path}: truncated header")
    (header_len,) = struct.unpack("<H", raw_len)
    header = f.read(header_len)
    if len(header) < header_len:
        raise TensorFormatError(f"{path}: truncated header")
    try:
        meta = ast.literal_eval(header.decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise TensorFormatError(f"{path}: malformed header dict") from exc
    if not isinstance(meta, dict) or set(meta) != {"descr", "fortran_order", "shape"}:
        raise TensorFormatError(f"{path}: header keys must be descr/fortran_order/shape")
    descr = meta["descr"]
    if not isinstance(descr, str) or descr not in _DESCR_TO_DTYPE:
        raise UnsupportedDtypeError(
            f"{path}: element type {descr!r} not in supported set {sorted(_DESCR_TO_DTYPE)}"
        )
    if meta["fortran_order"] is not False:
        raise TensorFormatError(f"{path}: fortran_order must be False (C-order contract)")
    shape = meta["shape"]
    if not isinstance(shape, tuple) or not all(isinstance(d, int) and d >= 0 for d in shape):
        raise TensorFormatError(f"{path}: invalid shape {shape!r}")
    return shape, _DESCR_TO_DTYPE[descr], 10 + header_len


def load_tensor(path) -> np.ndarray:
    """Load an NPY v1.0 tensor exactly as stored.

    Returns a read-only C-contiguous array; no value transformation of
    any kind is applied. Raises :class:`TensorFormatError` for malformed
    payloads and :class:`UnsupportedDtypeError` for element types other
    than float32/int32/uint8.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"tensor file not found: {path}")
    with open(path, "rb") as f:
        shape, dtype, _ = _parse_header(f, path)
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * dtype.itemsize
        payload = f.read(nbytes)
        if len(payload) < nbytes:
            raise TensorFormatError(
                f"{path}: truncated payload ({len(payload)} of {nbytes} bytes)"
            )
        if f.read(1):
            raise TensorFormatError(f"{path}: trailing bytes after payload")
    arr = np.frombuffer(payload, dtype=dtype, count=count).reshape(shape)
    return arr  # frombuffer on bytes is already read-only


def peek_tensor(path) -> tuple[tuple[int, ...], str]:
    """Read shape and dtype name without loading the payload.

    Also verifies the file size matches the declared shape, so a
    truncated file fails here too.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"tensor file not found: {path}")
    with open(path, "rb") as f:
        shape, dtype, offset = _parse_header(f, path)
    count = int(np.prod(shape, dtype=np.int64)) if shape else 1
    expected = offset + count * dtype.itemsize
    actual = os.stat(path).st_size
    if actual != expected:
        raise TensorFormatError(f"{path}: file size {actual} != expected {expected}")
    return shape, dtype.name


def save_tensor(path, array) -> None:
    """Write an NPY v1.0 file; the dtype must already be a supported one.

    No implicit casting: converting values is the caller's decision.
    """
    arr = np.ascontiguousarray(array)
    descr = _DTYPE_TO_DESCR.get(arr.dtype)
    if descr is None:
        raise UnsupportedDtypeError(
            f"refusing to save dtype {arr.dtype}; supported: float32, int32, uint8"
        )
    header = "{'descr': %r, 'fortran_order': False, 'shape': %s, }" % (
        descr,
        repr(tuple(int(d) for d in arr.shape)),
    )
    # pad with spaces so magic+version+len+header is a multiple of 64, '\n'-terminated
    pad = 64 - ((10 + len(header) + 1) % 64)
    pad = 0 if pad == 64 else pad
    header = header + " " * pad + "\n"
    if len(header) > 0xFFFF:
        raise TensorFormatError("header exceeds the v1.0 64KiB limit")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(_VERSION)
        f.write(struct.pack("<H", len(header)))
        f.write(header.encode("latin1"))
        f.write(arr.tobytes(order="C"))


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    seg_stack_path: Path
    depth_stack_path: Path
    gt_label_path: Path
    gt_depth_path: Path


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    num_classes: int
    ignore_index: int
    depth_invalid_value: float


_ENTRY_KEYS = ("seg_stack_path", "depth_stack_path", "gt_label_path", "gt_depth_path")


def _validate_entry(entry: ManifestEntry, num_classes: int) -> None:
    """Check existence, parseability, and shape/dtype consistency of one entry."""
    headers = {}
    for key in _ENTRY_KEYS:
        p = getattr(entry, key)
        try:
            headers[key] = peek_tensor(p)
        except MissingInputError as exc:
            raise MissingInputError(f"entry {entry.image_id!r}: {exc}") from exc
        except (TensorFormatError, UnsupportedDtypeError) as exc:
            raise type(exc)(f"entry {entry.image_id!r}: {exc}") from exc

    seg_shape, seg_dtype = headers["seg_stack_path"]
    depth_shape, depth_dtype = headers["depth_stack_path"]
    label_shape, label_dtype = headers["gt_label_path"]
    gtd_shape, gtd_dtype = headers["gt_depth_path"]

    eid = entry.image_id
    if len(seg_shape) != 4:
        raise ManifestError(f"entry {eid!r}: seg stack must be rank 4 (S,C,H,W), got {seg_shape}")
    if seg_dtype != "float32":
        raise ManifestError(f"entry {eid!r}: seg stack must be float32, got {seg_dtype}")
    if seg_shape[1] != num_classes:
        raise ManifestError(
            f"entry {eid!r}: seg stack has {seg_shape[1]} classes, manifest says {num_classes}"
        )
    if len(depth_shape) != 4 or depth_shape[1] != 2:
        raise ManifestError(
            f"entry {eid!r}: depth stack must be rank 4 (S,2,H,W), got {depth_shape}"
        )
    if depth_dtype != "float32":
        raise ManifestError(f"entry {eid!r}: depth stack must be float32, got {depth_dtype}")
    if len(label_shape) != 2:
        raise ManifestError(f"entry {eid!r}: gt labels must be rank 2, got {label_shape}")
    if label_dtype not in ("int32", "uint8"):
        raise ManifestError(f"entry {eid!r}: gt labels must be int32 or uint8, got {label_dtype}")
    if len(gtd_shape) != 2 or gtd_dtype != "float32":
        raise ManifestError(f"entry {eid!r}: gt depth must be rank 2 float32")

    hw = seg_shape[2:]
    for name, shape in (
        ("depth stack", depth_shape[2:]),
        ("gt labels", label_shape),
        ("gt depth", gtd_shape),
    ):
        if tuple(shape) != tuple(hw):
            raise ManifestError(
                f"entry {eid!r}: {name} spatial shape {tuple(shape)} != seg stack {tuple(hw)}"
            )


def load_manifest(path) -> DatasetManifest:
    """Load and fully validate a dataset manifest."""
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ManifestError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ManifestError(f"{path}: top level must be a JSON object")

    try:
        num_classes = int(doc["num_classes"])
        ignore_index = int(doc.get("ignore_index", 255))
        depth_invalid = float(doc.get("depth_invalid_value", 0.0))
        raw_entries = doc["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"{path}: missing or malformed field: {exc}") from exc
    if num_classes < 1:
        raise ManifestError(f"{path}: num_classes must be positive, got {num_classes}")
    if not isinstance(raw_entries, list) or not raw_entries:
        raise ManifestError(f"{path}: entries must be a non-empty list")

    base = path.parent
    entries = []
    seen = set()
    for i, raw in enumerate(raw_entries):
        if not isinstance(raw, dict):
            raise ManifestError(f"{path}: entry #{i} must be an object")
        try:
            image_id = str(raw["image_id"])
            paths = {k: base / raw[k] for k in _ENTRY_KEYS}
        except KeyError as exc:
            raise ManifestError(f"{path}: entry #{i} is missing field {exc}") from exc
        if image_id in seen:
            raise ManifestError(f"{path}: duplicate image_id {image_id!r}")
        seen.add(image_id)
        entries.append(ManifestEntry(image_id=image_id, **paths))

    manifest = DatasetManifest(
        entries=tuple(entries),
        num_classes=num_classes,
        ignore_index=ignore_index,
        depth_invalid_value=depth_invalid,
    )
    for entry in manifest.entries:
        _validate_entry(entry, num_classes)
    return manifest


def save_manifest(manifest: DatasetManifest, path) -> None:
    """Write a manifest JSON with entry paths relative to its directory."""
    path = Path(path)
    base = path.parent

    def rel(p: Path) -> str:
        try:
            return os.path.relpath(p, base)
        except ValueError:  # different drive on some platforms
            return str(p)

    doc = {
        "num_classes": manifest.num_classes,
        "ignore_index": manifest.ignore_index,
        "depth_invalid_value": manifest.depth_invalid_value,
        "entries": [
            {
                "image_id": e.image_id,
                "seg_stack_path": rel(e.seg_stack_path),
                "depth_stack_path": rel(e.depth_stack_path),
                "gt_label_path": rel(e.gt_label_path),
                "gt_depth_path": rel(e.gt_depth_path),
            }
            for e in manifest.entries
        ],
    }
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
