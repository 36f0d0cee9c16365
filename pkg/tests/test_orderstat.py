"""Order-statistic set against a sorted-list oracle."""

import bisect
import time

import numpy as np
import pytest

from annzip import OrderStatSet


class SortedOracle:
    def __init__(self):
        self.items = []

    def insert(self, v):
        bisect.insort(self.items, v)

    def remove(self, v):
        self.items.pop(bisect.bisect_left(self.items, v))

    def rank(self, v):
        return bisect.bisect_left(self.items, v)

    def select(self, j):
        return self.items[j]


def test_worked_examples():
    s = OrderStatSet(8)
    for v in (1, 4, 6):
        s.insert(v)
    assert len(s) == 3
    assert s.rank(4) == 1
    assert s.rank(0) == 0
    assert s.rank(7) == 3
    assert s.select(0) == 1
    assert s.select(2) == 6
    s.remove(4)
    assert s.rank(6) == 1


def test_select_rank_inverse():
    rng = np.random.default_rng(0)
    s = OrderStatSet(5000)
    members = rng.choice(5000, 700, replace=False)
    for v in members:
        s.insert(int(v))
    for v in members:
        assert s.select(s.rank(int(v))) == int(v)


def test_bulk_insert_matches_oracle():
    rng = np.random.default_rng(1)
    values = rng.choice(1 << 16, 10000, replace=False)
    s = OrderStatSet(1 << 16)
    oracle = SortedOracle()
    for v in values:
        s.insert(int(v))
        oracle.insert(int(v))
    probe = rng.integers(0, 1 << 16, 2000)
    for v in probe:
        assert s.rank(int(v)) == oracle.rank(int(v))
    for j in rng.integers(0, len(values), 2000):
        assert s.select(int(j)) == oracle.select(int(j))


def test_interleaved_workload_matches_oracle():
    rng = np.random.default_rng(2)
    universe = 1 << 12
    s = OrderStatSet(universe)
    oracle = SortedOracle()
    present = set()
    for _ in range(100000):
        op = rng.integers(0, 4)
        if op == 0 or not present:
            v = int(rng.integers(0, universe))
            if v not in present:
                s.insert(v)
                oracle.insert(v)
                present.add(v)
        elif op == 1:
            v = next(iter(present))
            s.remove(v)
            oracle.remove(v)
            present.remove(v)
        elif op == 2:
            v = int(rng.integers(0, universe + 1))
            assert s.rank(v) == oracle.rank(v)
        else:
            j = int(rng.integers(0, len(present)))
            assert s.select(j) == oracle.select(j)
    assert len(s) == len(present)


def test_errors():
    s = OrderStatSet(10)
    s.insert(3)
    with pytest.raises(ValueError, match="duplicate"):
        s.insert(3)
    with pytest.raises(ValueError, match="absent"):
        s.remove(4)
    with pytest.raises(IndexError):
        s.select(1)
    with pytest.raises(ValueError):
        s.insert(10)


def test_throughput_report_only(capsys):
    s = OrderStatSet(10**6)
    rng = np.random.default_rng(3)
    values = rng.choice(10**6, 20000, replace=False)
    t0 = time.perf_counter()
    for v in values:
        s.insert(int(v))
    for v in values:
        s.rank(int(v))
    for j in range(len(values)):
        s.select(j)
    per_op = (time.perf_counter() - t0) / (3 * len(values)) * 1e6
    with capsys.disabled():
        print(f"\n[report-only] orderstat universe=1e6: {per_op:.2f} us/op")
