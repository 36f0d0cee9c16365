"""Compressing an unordered set of vector ids.

An inverted list stores *which* ids belong to a cluster; their order is
meaningless to search.  A sequence of n ids costs n*log2(N) bits, but a
set is log2(n!) bits cheaper.  This demo compares the four block codecs
on one list and sweeps the cluster size to show where the savings come
from.
"""

import math

import numpy as np

from annzip import compact_encode, ef_encode, roc_encode, theoretical_savings, unc_encode
from annzip.set_codecs import roc_decode

rng = np.random.default_rng(1)
N = 10**6

print(f"one inverted list, N = {N:,}, n = 1000 ids")
ids = rng.choice(N, 1000, replace=False)
print(f"{'codec':>8}  {'bits/id':>8}")
for name, codec in [("unc", unc_encode), ("compact", compact_encode),
                    ("ef", ef_encode), ("roc", roc_encode)]:
    blk = codec(ids, N)
    print(f"{name:>8}  {blk.bits_used / 1000:8.2f}")

ideal = math.log2(N) - theoretical_savings(1000) / 1000
print(f"{'ideal':>8}  {ideal:8.2f}   (log2 N - log2(n!)/n)")

blk = roc_encode(ids, N)
back = roc_decode(blk, N)
assert np.array_equal(back, np.sort(ids))
print("\nroc roundtrip exact; members come back ascending")

# order insensitivity: the payload is a function of the set alone
assert roc_encode(ids[::-1], N).payload == blk.payload
assert ef_encode(ids[::-1], N).payload == ef_encode(ids, N).payload
print("payloads identical under permuted input order")

# sweep: larger lists save more per element
print(f"\n{'n':>6}  {'roc bits/id':>11}  {'savings/id':>10}")
for n in (64, 256, 1024, 4096, 16384):
    ids = rng.choice(N, n, replace=False)
    blk = roc_encode(ids, N)
    print(f"{n:>6}  {blk.bits_used / n:11.2f}  {theoretical_savings(n) / n:10.2f}")
