"""Benchmark machinery: timing protocol and report rendering.

Timing follows a fixed protocol: one untimed warm-up run, then the
median wall time over the requested number of runs on a monotonic clock.
Reports are line-oriented key=value pairs (diffable; timing noise only in
keys marked time_*) followed by a rendered table.
"""

from __future__ import annotations

import platform
import statistics
import sys
import time

import numpy as np
import numba


def timed_median(fn, runs: int = 100, warmup: int = 1) -> float:
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(runs):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def machine_header() -> list:
    return [
        f"platform={platform.platform()}",
        f"python={sys.version.split()[0]}",
        f"numpy={np.__version__}",
        f"numba={numba.__version__}",
    ]


def render_table(headers: list, rows: list) -> str:
    cols = [max(len(str(h)), *(len(str(r[i])) for r in rows)) if rows else len(str(h))
            for i, h in enumerate(headers)]
    def fmt(row):
        return "  ".join(str(v).rjust(c) for v, c in zip(row, cols))
    sep = "-" * (sum(cols) + 2 * (len(cols) - 1))
    return "\n".join([fmt(headers), sep] + [fmt(r) for r in rows])
