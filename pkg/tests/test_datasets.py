"""Dataset IO: record formats, validation, synthetic generator."""

import os
import struct

import numpy as np
import pytest

from annzip import gen_synthetic, load_vectors, save_vectors
from annzip.datasets import labels_path
from annzip.errors import DeserializationError


def test_fvecs_hand_written_fixture_roundtrips(tmp_path):
    # two records, D=3, built byte by byte
    raw = b"".join([
        struct.pack("<i", 3), struct.pack("<3f", 1.0, -2.5, 0.25),
        struct.pack("<i", 3), struct.pack("<3f", 4.0, 5.0, 6.0),
    ])
    path = os.path.join(tmp_path, "two.fvecs")
    with open(path, "wb") as f:
        f.write(raw)
    X = load_vectors(path)
    assert X.shape == (2, 3) and X.dtype == np.float32
    assert np.array_equal(X, [[1.0, -2.5, 0.25], [4.0, 5.0, 6.0]])
    out = os.path.join(tmp_path, "copy.fvecs")
    save_vectors(out, X)
    with open(out, "rb") as f:
        assert f.read() == raw


def test_bvecs_values_in_byte_range(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.integers(0, 256, size=(50, 9)).astype(np.uint8)
    path = os.path.join(tmp_path, "x.bvecs")
    save_vectors(path, data)
    X = load_vectors(path)
    assert X.dtype == np.uint8
    assert X.min() >= 0 and X.max() <= 255
    assert np.array_equal(X, data)


def test_ivecs_roundtrip(tmp_path):
    data = np.array([[3, 1, 4], [1, 5, 9]], dtype=np.int32)
    path = os.path.join(tmp_path, "x.ivecs")
    save_vectors(path, data)
    assert np.array_equal(load_vectors(path), data)


def test_inconsistent_dimension_rejected(tmp_path):
    raw = b"".join([
        struct.pack("<i", 2), struct.pack("<2f", 1.0, 2.0),
        struct.pack("<i", 3), struct.pack("<2f", 3.0, 4.0),
    ])
    path = os.path.join(tmp_path, "bad.fvecs")
    with open(path, "wb") as f:
        f.write(raw)
    with pytest.raises(DeserializationError, match="dimension"):
        load_vectors(path)


def test_truncated_file_rejected(tmp_path):
    raw = struct.pack("<i", 3) + struct.pack("<3f", 1, 2, 3)
    path = os.path.join(tmp_path, "trunc.fvecs")
    with open(path, "wb") as f:
        f.write(raw[:-2])
    with pytest.raises(DeserializationError):
        load_vectors(path)


def test_unknown_extension_rejected(tmp_path):
    with pytest.raises(ValueError):
        load_vectors(os.path.join(tmp_path, "x.npy"))


def test_gen_synthetic_shape_and_determinism(tmp_path):
    a = os.path.join(tmp_path, "a.fvecs")
    b = os.path.join(tmp_path, "b.fvecs")
    X1, l1 = gen_synthetic(10**4, 16, 64, seed=5, out=a)
    X2, l2 = gen_synthetic(10**4, 16, 64, seed=5, out=b)
    assert X1.shape == (10**4, 16)
    with open(a, "rb") as fa, open(b, "rb") as fb:
        assert fa.read() == fb.read()
    assert np.array_equal(l1, l2)
    X3, _ = gen_synthetic(10**4, 16, 64, seed=6)
    assert not np.array_equal(X1, X3)


def test_sidecar_labels_match_nearest_center(tmp_path):
    path = os.path.join(tmp_path, "sep.fvecs")
    X, labels = gen_synthetic(5000, 12, 32, spread=0.05, seed=1, out=path)
    stored = load_vectors(labels_path(path)).ravel()
    assert np.array_equal(stored, labels)
    # centers recovered as per-label means; assignment agreement >= 99%
    centers = np.stack([X[labels == c].mean(axis=0) for c in range(32)])
    d = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    assert float(np.mean(np.argmin(d, axis=1) == labels)) >= 0.99
