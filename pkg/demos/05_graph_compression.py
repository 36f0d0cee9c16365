"""Friend lists online, and the whole graph offline.

Online: each node's friend list is its own compressed block, decoded when
the search visits the node.  Offline: the entire edge set goes into one
stream (Random Edge Coding), which amortizes the initial bits once and
recovers log2(|E|!) bits from the edge order, beating per-list coding.
"""

import math

from annzip import gen_synthetic, graph_build, graph_search, graph_stats
from annzip.graph_index import graph_export_rec, graph_import_rec, with_friend_backend
from annzip.rec_graph import rec_stream_bits

X, _ = gen_synthetic(8000, 12, 64, seed=6)
idx = graph_build(X, R=24, seed=6)
E = idx.num_edges
print(f"graph: N = {idx.N:,}, |E| = {E:,}, mean degree {E / idx.N:.1f}, "
      f"entry = medoid {idx.entry}")

Q, _ = gen_synthetic(50, 12, 64, seed=7)
reference = graph_search(idx, Q, k=5, beam=16)
for backend in ("compact", "ef", "roc"):
    other = with_friend_backend(idx, backend)
    assert graph_search(other, Q, k=5, beam=16) == reference
print("search identical under compact/ef/roc friend-list storage")

st = graph_stats(idx)
print(f"\nonline (per-list) bits per stored id:")
for backend, bits in st["bits_per_id"].items():
    print(f"  {backend:>8}: {bits:6.2f}")
print(f"  theoretical per-list savings: "
      f"{st['theoretical_savings_bits'] / E:.2f} bits/id")

blob = graph_export_rec(idx)
rec_bits = rec_stream_bits(blob)
print(f"\noffline single stream: {rec_bits / E:.2f} bits/edge "
      f"(vs per-list roc {st['bits_per_id']['roc']:.2f}); "
      f"2*log2(N) - log2(E!)/E = "
      f"{2 * math.log2(idx.N) - sum(math.log2(i) for i in range(2, E + 1)) / E:.2f}")

back = graph_import_rec(blob, X)
assert graph_search(back, Q, k=5, beam=16) == reference
print("re-imported graph searches identically")
