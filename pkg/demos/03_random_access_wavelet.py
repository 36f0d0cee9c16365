"""Full random access to ids through a wavelet tree.

Instead of storing each cluster's id list, index the assignment sequence
S (id -> cluster).  select(k, o) recovers the o-th member of cluster k
in O(log K), so a search can track (cluster, offset) pairs and resolve
only the handful of ids that make the final top-k.
"""

import numpy as np

from annzip.wavelet_tree import COMPRESSED, FLAT, wt_build

rng = np.random.default_rng(2)
N, K = 10**5, 1024
S = rng.integers(0, K, N)

flat = wt_build(S, K, FLAT)
comp = wt_build(S, K, COMPRESSED)
print(f"assignment sequence: N = {N:,}, K = {K}")
print(f"flat      : {flat.bits_per_id():6.2f} bits/id "
      f"(payload exactly {flat.payload_bits() / N:.0f})")
print(f"compressed: {comp.bits_per_id():6.2f} bits/id")

# select = deferred id resolution
k = 37
members = np.flatnonzero(S == k)
print(f"\ncluster {k} has {members.size} members")
for occ in (0, 1, members.size - 1):
    got = flat.select(k, occ)
    print(f"  select({k}, {occ}) = {got}  (oracle {members[occ]})")
    assert got == members[occ] == comp.select(k, occ)

# access / rank round out the sequence interface
i = int(members[5])
assert flat.access(i) == k
assert flat.rank(k, i) == 5
print(f"access({i}) = {k}, rank({k}, {i}) = 5: consistent with the oracle")

# a skewed sequence: the compressed bitvectors start to win
sorted_S = np.sort(S)
flat_s = wt_build(sorted_S, K, FLAT)
comp_s = wt_build(sorted_S, K, COMPRESSED)
print(f"\nsame symbols, sorted (skewed level bits):")
print(f"flat      : {flat_s.bits_per_id():6.2f} bits/id")
print(f"compressed: {comp_s.bits_per_id():6.2f} bits/id  <- run-length structure pays off")
