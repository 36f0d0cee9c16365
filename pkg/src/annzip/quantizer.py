"""Vector quantization: k-means coarse quantizer, product quantization,
and asymmetric-distance (ADC) lookup tables.

Distances are squared L2 throughout.  Training is deterministic for a
fixed seed: initialization samples points without replacement and empty
clusters are repaired by splitting the largest one at its farthest
member.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_ASSIGN_CHUNK = 16384


def squared_l2(queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    """(Q, N) matrix of squared distances, float32; fast inner-product form."""
    q = np.asarray(queries, dtype=np.float32)
    p = np.asarray(points, dtype=np.float32)
    qq = (q * q).sum(axis=1, keepdims=True)
    pp = (p * p).sum(axis=1)
    d = qq + pp - 2.0 * (q @ p.T)
    np.maximum(d, 0.0, out=d)
    return d


def row_squared_l2(query: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Squared distances of one query row against points, direct form.

    Exactly zero for identical rows and bit-reproducible per row, which the
    scan paths rely on for backend-equivalence and oracle comparisons.
    """
    diff = np.asarray(points, dtype=np.float32) - np.asarray(query, dtype=np.float32)
    return (diff * diff).sum(axis=1)


def assign_nearest(vectors: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the nearest centroid per row, ties to the lower index."""
    out = np.empty(len(vectors), dtype=np.int64)
    for s in range(0, len(vectors), _ASSIGN_CHUNK):
        chunk = vectors[s:s + _ASSIGN_CHUNK]
        out[s:s + _ASSIGN_CHUNK] = np.argmin(squared_l2(chunk, centroids), axis=1)
    return out


def kmeans_train(vectors, K: int, iters: int = 25, seed: int = 0,
                 sample: int | None = None) -> np.ndarray:
    """Lloyd's k-means, L2, returning (K, D) float32 centroids.

    ``sample`` caps the number of training points (drawn without
    replacement) so million-scale corpora can train on a subset.
    """
    X = np.ascontiguousarray(vectors, dtype=np.float32)
    if K > len(X):
        raise ValueError(f"K={K} exceeds the number of vectors {len(X)}")
    if K < 1 or iters < 1:
        raise ValueError("K and iters must be >= 1")
    rng = np.random.default_rng(seed)
    if sample is not None and sample < len(X):
        X = X[np.sort(rng.choice(len(X), max(sample, K), replace=False))]
    centroids = X[np.sort(rng.choice(len(X), K, replace=False))].copy()
    for _ in range(iters):
        assign = assign_nearest(X, centroids)
        counts = np.bincount(assign, minlength=K)
        sums = np.zeros((K, X.shape[1]), dtype=np.float64)
        np.add.at(sums, assign, X)
        nonempty = counts > 0
        centroids[nonempty] = (
            sums[nonempty] / counts[nonempty, None]
        ).astype(np.float32)
        for k in np.flatnonzero(~nonempty):
            big = int(np.argmax(counts))
            members = np.flatnonzero(assign == big)
            far = members[int(np.argmax(squared_l2(X[members], centroids[big:big + 1])[:, 0]))]
            centroids[k] = X[far]
            counts[big] -= 1
            counts[k] += 1
    return centroids


@dataclass(frozen=True)
class PqCodebook:
    """m subquantizers of b bits over contiguous D/m-dimensional slices."""

    m: int
    b: int
    centroids: np.ndarray  # (m, 2**b, D/m) float32

    @property
    def num_centroids(self) -> int:
        return 1 << self.b

    @property
    def sub_dim(self) -> int:
        return self.centroids.shape[2]

    @property
    def dim(self) -> int:
        return self.m * self.sub_dim

    @property
    def code_bits(self) -> int:
        return self.m * self.b

    def code_dtype(self):
        return np.uint8 if self.b <= 8 else np.uint16


def pq_train(vectors, m: int, b: int, seed: int = 0, iters: int = 25) -> PqCodebook:
    X = np.ascontiguousarray(vectors, dtype=np.float32)
    D = X.shape[1]
    if m < 1 or b < 1:
        raise ValueError("m and b must be >= 1")
    if D % m != 0:
        raise ValueError(f"dimension {D} not divisible by m={m}")
    M = 1 << b
    if M > len(X):
        raise ValueError(f"2**b={M} centroids need at least that many vectors")
    sub = D // m
    cents = np.empty((m, M, sub), dtype=np.float32)
    for j in range(m):
        cents[j] = kmeans_train(X[:, j * sub:(j + 1) * sub], M, iters, seed + j)
    return PqCodebook(m, b, cents)


def pq_encode(codebook: PqCodebook, vectors) -> np.ndarray:
    """(N, m) code matrix of nearest sub-centroids."""
    X = np.atleast_2d(np.asarray(vectors, dtype=np.float32))
    if X.shape[1] != codebook.dim:
        raise ValueError("vector dimension does not match the codebook")
    sub = codebook.sub_dim
    codes = np.empty((len(X), codebook.m), dtype=codebook.code_dtype())
    for j in range(codebook.m):
        codes[:, j] = assign_nearest(X[:, j * sub:(j + 1) * sub], codebook.centroids[j])
    return codes


def pq_decode(codebook: PqCodebook, codes) -> np.ndarray:
    C = np.atleast_2d(np.asarray(codes))
    if C.shape[1] != codebook.m:
        raise ValueError("code width does not match the codebook")
    out = np.empty((len(C), codebook.dim), dtype=np.float32)
    sub = codebook.sub_dim
    for j in range(codebook.m):
        out[:, j * sub:(j + 1) * sub] = codebook.centroids[j][C[:, j]]
    return out


def adc_tables(codebook: PqCodebook, query) -> np.ndarray:
    """(m, 2**b) per-subspace squared distances from the query."""
    q = np.asarray(query, dtype=np.float32).reshape(-1)
    if q.size != codebook.dim:
        raise ValueError("query dimension does not match the codebook")
    sub = codebook.sub_dim
    tables = np.empty((codebook.m, codebook.num_centroids), dtype=np.float32)
    for j in range(codebook.m):
        diff = codebook.centroids[j] - q[j * sub:(j + 1) * sub]
        tables[j] = (diff * diff).sum(axis=1)
    return tables


def adc_distance(tables: np.ndarray, code_row) -> float:
    code = np.asarray(code_row)
    return float(tables[np.arange(tables.shape[0]), code].sum(dtype=np.float64))


def adc_scan(tables: np.ndarray, codes: np.ndarray) -> np.ndarray:
    """ADC distances for a whole (n, m) code matrix, float32."""
    return tables[np.arange(tables.shape[0])[None, :], codes].sum(
        axis=1, dtype=np.float32
    )
