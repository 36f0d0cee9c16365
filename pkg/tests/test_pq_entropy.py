"""Adaptive code-column coder vs the direct summation oracle."""

import math

import numpy as np
import pytest

from annzip import (
    cluster_codes_decode,
    cluster_codes_encode,
    code_column_decode,
    code_column_encode,
)
from annzip.errors import CorruptionError
from annzip.pq_entropy import (
    cluster_bits_per_element,
    model_cross_entropy_bits,
    stream_bits,
)


def oracle_bits(column, M=256):
    counts = {}
    total = 0.0
    for i, x in enumerate(column):
        total -= math.log2((1 + counts.get(x, 0)) / (M + i))
        counts[x] = counts.get(x, 0) + 1
    return total


class TestColumnCodec:
    def test_constant_column(self):
        col = np.full(1000, 42, dtype=np.int64)
        blob = code_column_encode(col)
        assert np.array_equal(code_column_decode(blob, 1000), col)
        oracle = oracle_bits(col.tolist())
        bits = stream_bits(blob)
        assert abs(bits - oracle) <= 0.01 * 1000 + 32
        assert bits / 1000 <= 1.0

    def test_uniform_random(self):
        rng = np.random.default_rng(0)
        col = rng.integers(0, 256, 10**4)
        blob = code_column_encode(col)
        assert np.array_equal(code_column_decode(blob, col.size), col)
        bpe = stream_bits(blob) / col.size
        assert 7.9 <= bpe <= 8.1
        oracle = model_cross_entropy_bits(col)
        assert abs(stream_bits(blob) - oracle) <= 0.01 * col.size + 32

    def test_first_element_costs_log_m(self):
        blob = code_column_encode([17])
        assert 8 <= stream_bits(blob) <= 9

    def test_roundtrip_fuzz(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            n = int(rng.integers(1, 3000))
            spread = int(rng.integers(2, 257))
            col = rng.integers(0, spread, n)
            blob = code_column_encode(col)
            assert np.array_equal(code_column_decode(blob, n), col)

    def test_wrong_length_flagged(self):
        col = np.arange(100) % 7
        blob = code_column_encode(col)
        with pytest.raises(CorruptionError):
            code_column_decode(blob, 99)

    def test_empty_column(self):
        assert code_column_encode([]) == b""
        assert code_column_decode(b"", 0).size == 0

    def test_non_byte_alphabet(self):
        rng = np.random.default_rng(2)
        col = rng.integers(0, 1024, 500)
        blob = code_column_encode(col, M=1024)
        assert np.array_equal(code_column_decode(blob, 500, M=1024), col)

    def test_entry_out_of_range(self):
        with pytest.raises(ValueError):
            code_column_encode([256], M=256)


class TestClusterCodes:
    def test_concentrated_clusters_compress(self):
        rng = np.random.default_rng(3)
        base = int(rng.integers(0, 240))
        codes = base + rng.choice(16, size=(1000, 8))
        blobs = cluster_codes_encode(codes)
        assert np.array_equal(cluster_codes_decode(blobs, 1000), codes)
        assert cluster_bits_per_element(blobs, 1000) < 5.0

    def test_iid_uniform_does_not_compress(self):
        rng = np.random.default_rng(4)
        codes = rng.integers(0, 256, size=(4000, 4))
        blobs = cluster_codes_encode(codes)
        bpe = cluster_bits_per_element(blobs, 4000)
        assert bpe >= 7.9

    def test_measured_tracks_oracle_per_column(self):
        rng = np.random.default_rng(5)
        codes = rng.integers(0, 64, size=(2000, 3))
        blobs = cluster_codes_encode(codes)
        for j, blob in enumerate(blobs):
            oracle = model_cross_entropy_bits(codes[:, j])
            assert abs(stream_bits(blob) - oracle) <= 0.01 * 2000 + 32
