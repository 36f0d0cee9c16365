"""Squeezing quantization codes by conditioning on the cluster.

Globally, PQ codes are close to uniform (8 bits of entropy per byte) and
will not compress.  Restricted to one IVF cluster they are concentrated,
and an adaptive occurrence-count model recovers that slack while keeping
per-cluster random access.
"""

import numpy as np

from annzip import gen_synthetic, pq_encode, pq_train
from annzip.pq_entropy import cluster_bits_per_element, cluster_codes_encode
from annzip.quantizer import assign_nearest, kmeans_train

X, _ = gen_synthetic(3 * 10**4, 32, 256, spread=0.15, seed=8)

codebook = pq_train(X, m=8, b=8, seed=8)
codes = pq_encode(codebook, X).astype(np.int64)

# unconditioned: one adaptive stream over everything
global_bpe = cluster_bits_per_element(cluster_codes_encode(codes[:4000]), 4000)
print(f"unconditioned code entropy: {global_bpe:.3f} bits/element "
      f"(maximum is 8.0; nothing to gain)")

# conditioned: per-cluster streams
centroids = kmeans_train(X, 64, seed=8)
assign = assign_nearest(X, centroids)
total_bits = 0
total_elems = 0
for k in range(64):
    members = np.flatnonzero(assign == k)
    blobs = cluster_codes_encode(codes[members])
    total_bits += sum(
        cluster_bits_per_element([b], members.size) * members.size for b in blobs
    )
    total_elems += members.size * codes.shape[1]
cond_bpe = total_bits / total_elems
print(f"cluster-conditioned        : {cond_bpe:.3f} bits/element "
      f"({(1 - cond_bpe / 8) * 100:.1f}% below the 8-bit codes)")
print("\n(the gain grows when cluster geometry aligns with the PQ sub-spaces;"
      "\n codes from featureless data stay near 8.0)")
