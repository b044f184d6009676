"""Tensor and manifest I/O: bit-exact round trips and precise failures."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pixeluq import tensor_io
from pixeluq.errors import (
    ManifestError,
    MissingInputError,
    TensorFormatError,
    UnsupportedDtypeError,
)


def test_known_2x2_float32_identity(tmp_path):
    path = tmp_path / "t.npy"
    arr = np.array([[1, 2], [3, 4]], dtype=np.float32)
    tensor_io.save_tensor(path, arr)
    out = tensor_io.load_tensor(path)
    assert out.shape == (2, 2)
    assert out.dtype == np.float32
    assert out.tolist() == [[1.0, 2.0], [3.0, 4.0]]


@pytest.mark.parametrize("dtype", [np.float32, np.int32, np.uint8])
@pytest.mark.parametrize("shape", [(3,), (2, 2), (2, 3, 4), (2, 1, 3, 2)])
def test_round_trip_bytes_exact(tmp_path, dtype, shape):
    rng = np.random.default_rng(42)
    if dtype == np.float32:
        arr = rng.standard_normal(shape).astype(dtype)
    else:
        arr = rng.integers(0, 200, size=shape).astype(dtype)
    path = tmp_path / "t.npy"
    tensor_io.save_tensor(path, arr)
    out = tensor_io.load_tensor(path)
    assert out.shape == arr.shape
    assert out.dtype == arr.dtype
    assert out.tobytes() == arr.tobytes()


@settings(max_examples=50, deadline=None)
@given(
    shape=st.lists(st.integers(1, 5), min_size=1, max_size=4).map(tuple),
    dtype=st.sampled_from(["float32", "int32", "uint8"]),
    data=st.data(),
)
def test_round_trip_property(tmp_path_factory, shape, dtype, data):
    n = int(np.prod(shape))
    if dtype == "float32":
        values = data.draw(
            st.lists(
                st.floats(width=32, allow_nan=False, allow_infinity=False),
                min_size=n,
                max_size=n,
            )
        )
    elif dtype == "int32":
        values = data.draw(st.lists(st.integers(-(2**31), 2**31 - 1), min_size=n, max_size=n))
    else:
        values = data.draw(st.lists(st.integers(0, 255), min_size=n, max_size=n))
    arr = np.array(values, dtype=dtype).reshape(shape)
    path = tmp_path_factory.mktemp("npy") / "t.npy"
    tensor_io.save_tensor(path, arr)
    out = tensor_io.load_tensor(path)
    assert out.tobytes() == arr.tobytes()
    assert out.shape == arr.shape and out.dtype == arr.dtype


def test_interop_with_reference_writer(tmp_path):
    # files produced by numpy's own writer must load, and vice versa
    rng = np.random.default_rng(0)
    arr = rng.standard_normal((4, 5)).astype(np.float32)
    theirs = tmp_path / "theirs.npy"
    np.save(theirs, arr)
    assert tensor_io.load_tensor(theirs).tobytes() == arr.tobytes()

    ours = tmp_path / "ours.npy"
    tensor_io.save_tensor(ours, arr)
    assert np.load(ours).tobytes() == arr.tobytes()


def test_loaded_tensor_is_immutable(tmp_path):
    path = tmp_path / "t.npy"
    tensor_io.save_tensor(path, np.zeros((2, 2), dtype=np.float32))
    out = tensor_io.load_tensor(path)
    with pytest.raises(ValueError):
        out[0, 0] = 1.0


def test_truncated_payload_is_format_error(tmp_path):
    path = tmp_path / "t.npy"
    tensor_io.save_tensor(path, np.zeros((4, 4), dtype=np.float32))
    blob = path.read_bytes()
    path.write_bytes(blob[:-7])
    with pytest.raises(TensorFormatError, match="truncated"):
        tensor_io.load_tensor(path)


def test_trailing_garbage_is_format_error(tmp_path):
    path = tmp_path / "t.npy"
    tensor_io.save_tensor(path, np.zeros((2, 2), dtype=np.float32))
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(TensorFormatError, match="trailing"):
        tensor_io.load_tensor(path)


def test_bad_magic_is_format_error(tmp_path):
    path = tmp_path / "t.npy"
    path.write_bytes(b"NOTNPY" + b"\x00" * 64)
    with pytest.raises(TensorFormatError, match="magic"):
        tensor_io.load_tensor(path)


def test_v2_files_are_rejected(tmp_path):
    path = tmp_path / "t.npy"
    tensor_io.save_tensor(path, np.zeros(3, dtype=np.float32))
    blob = bytearray(path.read_bytes())
    blob[6:8] = b"\x02\x00"
    path.write_bytes(bytes(blob))
    with pytest.raises(TensorFormatError, match="version"):
        tensor_io.load_tensor(path)


def test_unsupported_dtype_load(tmp_path):
    path = tmp_path / "t.npy"
    np.save(path, np.zeros(3, dtype=np.float64))
    with pytest.raises(UnsupportedDtypeError):
        tensor_io.load_tensor(path)


def test_unsupported_dtype_save(tmp_path):
    with pytest.raises(UnsupportedDtypeError):
        tensor_io.save_tensor(tmp_path / "t.npy", np.zeros(3, dtype=np.float64))


def test_missing_file(tmp_path):
    with pytest.raises(MissingInputError):
        tensor_io.load_tensor(tmp_path / "nope.npy")


# --- manifests --------------------------------------------------------


def _write_entry_files(d, image_id, s=2, c=3, h=4, w=5):
    rng = np.random.default_rng(abs(hash(image_id)) % 2**32)
    probs = rng.dirichlet(np.ones(c), size=(s, h, w)).transpose(0, 3, 1, 2)
    tensor_io.save_tensor(d / f"{image_id}_seg.npy", probs.astype(np.float32))
    stack = np.stack(
        [rng.uniform(1, 5, (s, h, w)), rng.uniform(0.1, 1, (s, h, w))], axis=1
    )
    tensor_io.save_tensor(d / f"{image_id}_depth.npy", stack.astype(np.float32))
    tensor_io.save_tensor(
        d / f"{image_id}_lab.npy", rng.integers(0, c, (h, w)).astype(np.int32)
    )
    tensor_io.save_tensor(
        d / f"{image_id}_gtd.npy", rng.uniform(1, 5, (h, w)).astype(np.float32)
    )
    return {
        "image_id": image_id,
        "seg_stack_path": f"{image_id}_seg.npy",
        "depth_stack_path": f"{image_id}_depth.npy",
        "gt_label_path": f"{image_id}_lab.npy",
        "gt_depth_path": f"{image_id}_gtd.npy",
    }


def _write_manifest(d, entries, num_classes=3):
    doc = {
        "num_classes": num_classes,
        "ignore_index": 255,
        "depth_invalid_value": 0.0,
        "entries": entries,
    }
    path = d / "manifest.json"
    path.write_text(json.dumps(doc))
    return path


def test_valid_manifest_loads(tmp_path):
    entries = [_write_entry_files(tmp_path, "a"), _write_entry_files(tmp_path, "b")]
    m = tensor_io.load_manifest(_write_manifest(tmp_path, entries))
    assert len(m.entries) == 2
    assert m.num_classes == 3
    assert m.entries[0].image_id == "a"


def test_manifest_missing_file_names_image_id(tmp_path):
    entries = [_write_entry_files(tmp_path, "a")]
    (tmp_path / "a_depth.npy").unlink()
    with pytest.raises(MissingInputError, match="'a'"):
        tensor_io.load_manifest(_write_manifest(tmp_path, entries))


def test_manifest_class_count_mismatch(tmp_path):
    entries = [_write_entry_files(tmp_path, "a", c=3), _write_entry_files(tmp_path, "b", c=4)]
    with pytest.raises(ManifestError, match="classes"):
        tensor_io.load_manifest(_write_manifest(tmp_path, entries, num_classes=3))


def test_manifest_spatial_mismatch_within_entry(tmp_path):
    entry = _write_entry_files(tmp_path, "a", h=4, w=5)
    tensor_io.save_tensor(tmp_path / "a_gtd.npy", np.ones((4, 6), dtype=np.float32))
    with pytest.raises(ManifestError, match="spatial"):
        tensor_io.load_manifest(_write_manifest(tmp_path, [entry]))


def test_manifest_empty_entries_rejected(tmp_path):
    with pytest.raises(ManifestError, match="non-empty"):
        tensor_io.load_manifest(_write_manifest(tmp_path, []))


def test_manifest_save_load_round_trip(tmp_path):
    entries = [_write_entry_files(tmp_path, "a")]
    m = tensor_io.load_manifest(_write_manifest(tmp_path, entries))
    out = tmp_path / "copy" / "manifest.json"
    out.parent.mkdir()
    tensor_io.save_manifest(m, out)
    m2 = tensor_io.load_manifest(out)
    assert m2.num_classes == m.num_classes
    assert [e.image_id for e in m2.entries] == [e.image_id for e in m.entries]
