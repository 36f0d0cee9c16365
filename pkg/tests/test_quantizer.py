"""Quantizers: k-means, PQ, ADC tables vs brute-force oracles."""

import numpy as np
import pytest

from annzip import (
    adc_distance,
    adc_tables,
    kmeans_train,
    pq_decode,
    pq_encode,
    pq_train,
)
from annzip.quantizer import adc_scan, assign_nearest, squared_l2


def two_blobs(rng, n=1000, d=8, gap=20.0):
    labels = rng.integers(0, 2, n)
    X = rng.normal(0, 1.0, (n, d)).astype(np.float32)
    X[labels == 1] += gap
    return X, labels


class TestKmeans:
    def test_k_equals_n_zero_distortion(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(40, 4)).astype(np.float32)
        cents = kmeans_train(X, 40, iters=5, seed=1)
        assign = assign_nearest(X, cents)
        dists = squared_l2(X, cents)[np.arange(40), assign]
        assert float(dists.max()) < 1e-5  # inner-product form: zero up to roundoff

    def test_separated_blobs_recovered(self):
        rng = np.random.default_rng(1)
        X, labels = two_blobs(rng)
        cents = kmeans_train(X, 2, seed=2)
        assign = assign_nearest(X, cents)
        agreement = max(
            float(np.mean(assign == labels)), float(np.mean(assign != labels))
        )
        assert agreement >= 0.99

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(500, 8)).astype(np.float32)
        a = kmeans_train(X, 16, seed=7)
        b = kmeans_train(X, 16, seed=7)
        assert np.array_equal(a, b)
        c = kmeans_train(X, 16, seed=8)
        assert not np.array_equal(a, c)

    def test_k_larger_than_n_rejected(self):
        with pytest.raises(ValueError):
            kmeans_train(np.zeros((3, 2), np.float32), 4)


class TestPq:
    def test_fixed_point_reconstruction(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(600, 8)).astype(np.float32)
        cb = pq_train(X, m=2, b=4, seed=0)
        # vectors assembled from centroids reconstruct exactly
        v = np.concatenate([cb.centroids[0][3], cb.centroids[1][9]])
        codes = pq_encode(cb, v[None, :])
        assert np.array_equal(codes[0], [3, 9])
        assert np.array_equal(pq_decode(cb, codes)[0], v)

    def test_reconstruction_error_decreases_with_b(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(3000, 8)).astype(np.float32)
        errs = []
        for b in (4, 6, 8):
            cb = pq_train(X, m=2, b=b, seed=0)
            rec = pq_decode(cb, pq_encode(cb, X))
            errs.append(float(((X - rec) ** 2).sum(axis=1).mean()))
        assert errs[0] > errs[1] > errs[2]

    def test_degenerate_configs_rejected(self):
        X = np.zeros((10, 4), np.float32)
        with pytest.raises(ValueError):
            pq_train(X, m=1, b=0)
        with pytest.raises(ValueError):
            pq_train(X, m=3, b=2)  # 4 % 3 != 0

    def test_code_dtype_switches(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(2100, 4)).astype(np.float32)
        assert pq_train(X, 2, 8, iters=2).code_dtype() == np.uint8
        assert pq_train(X, 2, 10, iters=2).code_dtype() == np.uint16


class TestAdc:
    def test_query_at_code_is_zero(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(500, 8)).astype(np.float32)
        cb = pq_train(X, 4, 4, seed=0)
        code = pq_encode(cb, X[:1])[0]
        decoded = pq_decode(cb, code[None, :])[0]
        assert adc_distance(adc_tables(cb, decoded), code) <= 1e-5

    def test_matches_decoded_l2_oracle(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(2000, 16)).astype(np.float32)
        cb = pq_train(X, 4, 6, seed=1)
        codes = pq_encode(cb, X)
        decoded = pq_decode(cb, codes)
        for _ in range(1000):
            qi, ci = rng.integers(0, 2000, 2)
            q = X[qi]
            d_adc = adc_distance(adc_tables(cb, q), codes[ci])
            d_ref = float(((q - decoded[ci]) ** 2).sum(dtype=np.float64))
            assert d_adc == pytest.approx(d_ref, rel=1e-4, abs=1e-5)

    def test_scan_matches_per_row(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(800, 8)).astype(np.float32)
        cb = pq_train(X, 2, 5, seed=2)
        codes = pq_encode(cb, X)
        tables = adc_tables(cb, X[0])
        scan = adc_scan(tables, codes[:50])
        for i in range(50):
            assert scan[i] == pytest.approx(adc_distance(tables, codes[i]), rel=1e-5)

    def test_b10_tables_4x_larger_than_b8(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(2100, 4)).astype(np.float32)
        t8 = adc_tables(pq_train(X, 2, 8, iters=2), X[0])
        t10 = adc_tables(pq_train(X, 2, 10, iters=2), X[0])
        assert t10.size == 4 * t8.size
