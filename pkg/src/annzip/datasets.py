"""Dataset files: fvecs/bvecs/ivecs readers and writers plus a synthetic
Gaussian-mixture generator with a known-assignment sidecar.

Record layout is the classic ANN-benchmark convention: a 4-byte
little-endian dimension header followed by D values (4-byte float,
1-byte unsigned, or 4-byte signed int).  Every record must share D.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import DeserializationError

_FORMATS = {
    ".fvecs": (np.dtype("<f4"), 4),
    ".bvecs": (np.dtype("u1"), 1),
    ".ivecs": (np.dtype("<i4"), 4),
}


def _format_for(path: str):
    ext = os.path.splitext(path)[1].lower()
    if ext not in _FORMATS:
        raise ValueError(f"unknown vector file extension {ext!r}")
    return _FORMATS[ext]


def load_vectors(path: str, max_rows: int | None = None) -> np.ndarray:
    """Read an fvecs/bvecs/ivecs file into an (N, D) matrix."""
    dtype, width = _format_for(path)
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size < 4:
        raise DeserializationError(f"{path}: shorter than one dimension header")
    d = int(np.frombuffer(raw[:4].tobytes(), dtype="<i4")[0])
    if d <= 0:
        raise DeserializationError(f"{path}: non-positive dimension {d}")
    rec = 4 + d * width
    if raw.size % rec != 0:
        raise DeserializationError(
            f"{path}: size {raw.size} is not a multiple of the {rec}-byte record"
        )
    rows = raw.size // rec
    if max_rows is not None:
        rows = min(rows, max_rows)
        raw = raw[: rows * rec]
    recs = raw.reshape(rows, rec)
    headers = recs[:, :4].copy().view("<i4").ravel()
    if (headers != d).any():
        bad = int(np.flatnonzero(headers != d)[0])
        raise DeserializationError(
            f"{path}: record {bad} has dimension {int(headers[bad])}, expected {d}"
        )
    body = recs[:, 4:].copy().view(dtype)
    return body.reshape(rows, d)


def save_vectors(path: str, matrix) -> None:
    dtype, width = _format_for(path)
    m = np.ascontiguousarray(matrix)
    if m.ndim != 2:
        raise ValueError("expected an (N, D) matrix")
    m = m.astype(dtype)
    n, d = m.shape
    out = np.empty((n, 4 + d * width), dtype=np.uint8)
    out[:, :4] = np.frombuffer(
        np.full(n, d, dtype="<i4").tobytes(), dtype=np.uint8
    ).reshape(n, 4)
    out[:, 4:] = m.view(np.uint8).reshape(n, d * width)
    out.tofile(path)


def labels_path(dataset_path: str) -> str:
    stem = os.path.splitext(dataset_path)[0]
    return stem + ".labels.ivecs"


def gen_synthetic(n: int, d: int, clusters: int, spread: float = 0.1,
                  seed: int = 0, out: str | None = None):
    """Gaussian mixture with unit-normal centers; deterministic given seed.

    Returns (vectors, labels); when ``out`` is given, also writes the
    fvecs file and a one-column .labels.ivecs sidecar next to it.
    """
    if n < 1 or d < 1 or clusters < 1:
        raise ValueError("n, d and clusters must be >= 1")
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, 1.0, size=(clusters, d)).astype(np.float32)
    labels = rng.integers(0, clusters, size=n)
    X = centers[labels] + rng.normal(0.0, spread, size=(n, d)).astype(np.float32)
    X = X.astype(np.float32)
    if out is not None:
        save_vectors(out, X)
        save_vectors(labels_path(out), labels.reshape(-1, 1))
    return X, labels.astype(np.int64)
