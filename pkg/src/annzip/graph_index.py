"""Graph-based ANN index with compressed friend lists.

The builder is a simplified pruned-kNN construction: exact nearest
neighbors (brute force at desk scale, sampled candidates above) filtered
by the occlusion rule, with the medoid as the search entry point and a
reconnection pass that guarantees every node is reachable from it.  The
point of the index is storage, not construction quality: compression
depends only on the node count and degree distribution.

Friend lists are stored per node under any of the streaming id backends,
ascending; search is greedy best-first with a beam, and its results do
not depend on the backend.  For the offline setting the whole edge set
can be exported as a single Random Edge Coding stream and re-imported
without changing search behavior.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field

import numpy as np

from . import set_codecs
from .container import (
    SEC_FRIEND_BLOCKS,
    SEC_METADATA,
    SEC_VECTORS,
    read_container,
    write_container,
)
from .errors import DeserializationError
from .ivf_index import SearchResult, _pack_blocks, _unpack_blocks
from .orderstat import OrderStatSet
from .quantizer import row_squared_l2, squared_l2
from .rec_graph import DirectedGraph, VertexModel, rec_decode, rec_encode
from .set_codecs import decode_ids, encode_ids

FRIEND_BACKENDS = ("unc", "compact", "ef", "roc")

DEFAULT_BEAM = 16
_BRUTE_LIMIT = 20000


@dataclass
class GraphIndex:
    vectors: np.ndarray       # (N, D) float32, stored uncompressed
    blocks: list              # per-node CompressedIdBlock friend lists
    entry: int                # medoid id
    max_degree: int
    backend: str
    _scratch: OrderStatSet | None = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return len(self.vectors)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def num_edges(self) -> int:
        return int(sum(blk.n for blk in self.blocks))

    def friends(self, u: int) -> np.ndarray:
        blk = self.blocks[u]
        if blk.codec_tag == set_codecs.TAG_ROC:
            if self._scratch is None:
                self._scratch = OrderStatSet(self.N)
            return set_codecs.roc_decode(blk, self.N, self._scratch)
        return decode_ids(blk, self.N)

    def out_degrees(self) -> np.ndarray:
        return np.array([blk.n for blk in self.blocks], dtype=np.int64)


def medoid(vectors: np.ndarray) -> int:
    """argmin_i sum_j ||x_i - x_j||^2, exact in O(ND) via expansion."""
    X = np.asarray(vectors, dtype=np.float64)
    sq = (X * X).sum(axis=1)
    totals = len(X) * sq + sq.sum() - 2.0 * (X @ X.sum(axis=0))
    return int(np.argmin(totals))


def _candidate_lists(X: np.ndarray, count: int, seed: int) -> np.ndarray:
    """(N, count) nearest-neighbor candidates per node, self excluded."""
    N = len(X)
    if N <= _BRUTE_LIMIT:
        cands = np.empty((N, count), dtype=np.int64)
        chunk = max(1, (1 << 24) // max(N, 1))
        for s in range(0, N, chunk):
            d = squared_l2(X[s:s + chunk], X)
            for r in range(d.shape[0]):
                d[r, s + r] = np.inf
            part = np.argpartition(d, count - 1, axis=1)[:, :count]
            for r in range(d.shape[0]):
                row = part[r]
                order = np.lexsort((row, d[r, row]))
                cands[s + r] = row[order]
        return cands
    # sampled candidate pools above desk scale
    rng = np.random.default_rng(seed)
    pool_size = min(N - 1, max(4 * count, 512))
    cands = np.empty((N, count), dtype=np.int64)
    for u in range(N):
        pool = rng.choice(N - 1, pool_size, replace=False)
        pool[pool >= u] += 1
        d = squared_l2(X[u:u + 1], X[pool])[0]
        order = np.lexsort((pool, d))[:count]
        cands[u] = pool[order]
    return cands


def _occlusion_prune(X, u: int, candidates, R: int) -> list:
    """Keep c unless a kept neighbor n has dist(n, c) < dist(u, c)."""
    du = squared_l2(X[u:u + 1], X[candidates])[0]
    cross = squared_l2(X[candidates], X[candidates])
    order = np.lexsort((candidates, du))
    kept_idx = []
    for idx in order:
        dc = float(du[idx])
        ok = True
        for n_idx in kept_idx:
            if cross[n_idx, idx] < dc:
                ok = False
                break
        if ok:
            kept_idx.append(idx)
            if len(kept_idx) >= R:
                break
    return [int(candidates[i]) for i in kept_idx]


def _bfs_reached(neighbors: list, entry: int, N: int) -> np.ndarray:
    reached = np.zeros(N, dtype=bool)
    reached[entry] = True
    stack = [entry]
    while stack:
        u = stack.pop()
        for v in neighbors[u]:
            if not reached[v]:
                reached[v] = True
                stack.append(v)
    return reached


def _nearest_pair(X, sources, targets):
    """Closest (source, target) pair, ties to the lower source then target."""
    best = (np.inf, -1, -1)
    chunk = max(1, (1 << 22) // max(sources.size, 1))
    for s in range(0, targets.size, chunk):
        d = squared_l2(X[targets[s:s + chunk]], X[sources])
        for r in range(d.shape[0]):
            j = int(np.argmin(d[r]))
            cand = (float(d[r, j]), int(sources[j]), int(targets[s + r]))
            if cand < best:
                best = cand
    return best[1], best[2]


def _expand(neighbors, reached, start: int) -> None:
    stack = [start]
    reached[start] = True
    while stack:
        u = stack.pop()
        for v in neighbors[u]:
            if not reached[v]:
                reached[v] = True
                stack.append(v)


def _reconnect(X, neighbors, entry: int, R: int) -> None:
    """Add edges from reached nodes until everything is reachable.

    Each round scans once for the nearest spare-degree reached node of
    every unreached node, then attaches components in ascending-distance
    order; the reached set grows monotonically, so the loop terminates.
    Eviction happens only if every reached node is full, which pruned kNN
    graphs do not produce in practice.
    """
    N = len(X)
    reached = _bfs_reached(neighbors, entry, N)
    evictions = 0
    while not reached.all():
        rr = np.flatnonzero(reached)
        ur = np.flatnonzero(~reached)
        degs = np.array([len(neighbors[int(r)]) for r in rr])
        spare = rr[degs < R]
        pool = spare if spare.size else rr
        best_src = np.empty(ur.size, dtype=np.int64)
        best_d = np.empty(ur.size, dtype=np.float64)
        chunk = max(1, (1 << 22) // max(pool.size, 1))
        for s in range(0, ur.size, chunk):
            d = squared_l2(X[ur[s:s + chunk]], X[pool])
            arg = np.argmin(d, axis=1)  # first min: lowest pool id wins ties
            best_src[s:s + chunk] = pool[arg]
            best_d[s:s + chunk] = d[np.arange(d.shape[0]), arg]
        progressed = False
        for idx in np.lexsort((ur, best_src, best_d)):
            dst = int(ur[idx])
            if reached[dst]:
                continue
            src = int(best_src[idx])
            if len(neighbors[src]) >= R:
                continue  # filled up during this round; rescan next round
            neighbors[src] = sorted(neighbors[src] + [dst])
            _expand(neighbors, reached, dst)
            progressed = True
        if not progressed:
            # every candidate is at capacity: evict one farthest friend
            src, dst = _nearest_pair(X, rr, np.flatnonzero(~reached))
            lst = neighbors[src]
            dists = squared_l2(X[src:src + 1], X[lst])[0]
            drop = int(np.lexsort((-np.array(lst), -dists))[0])
            lst.pop(drop)
            neighbors[src] = sorted(lst + [dst])
            reached = _bfs_reached(neighbors, entry, N)
            evictions += 1
            if evictions > N:
                raise RuntimeError("reconnection did not converge")


def graph_build(vectors, R: int, seed: int = 0) -> GraphIndex:
    if R < 2:
        raise ValueError("max degree R must be >= 2")
    X = np.ascontiguousarray(vectors, dtype=np.float32)
    N = len(X)
    count = min(N - 1, max(2 * R, 16))
    cands = _candidate_lists(X, count, seed)
    neighbors = [sorted(_occlusion_prune(X, u, cands[u], R)) for u in range(N)]
    entry = medoid(X)

    _reconnect(X, neighbors, entry, R)

    blocks = [encode_ids("unc", np.array(lst, dtype=np.int64), N) for lst in neighbors]
    return GraphIndex(X, blocks, entry, R, "unc")


def with_friend_backend(index: GraphIndex, backend: str) -> GraphIndex:
    if backend not in FRIEND_BACKENDS:
        raise ValueError(f"unknown friend-list backend {backend!r}")
    blocks = [
        encode_ids(backend, index.friends(u), index.N) for u in range(index.N)
    ]
    return GraphIndex(index.vectors, blocks, index.entry, index.max_degree, backend)


def graph_search(index: GraphIndex, query, k: int = 10,
                 beam: int = DEFAULT_BEAM) -> SearchResult:
    """Greedy best-first beam search from the medoid; deterministic ties."""
    Q = np.atleast_2d(np.asarray(query, dtype=np.float32))
    k_eff = min(k, max(beam, 1))
    out_ids = np.full((len(Q), k), -1, dtype=np.int64)
    out_d = np.full((len(Q), k), np.inf, dtype=np.float32)
    for qi, q in enumerate(Q):
        d0 = float(row_squared_l2(q, index.vectors[index.entry:index.entry + 1])[0])
        visited = {index.entry}
        frontier = [(d0, index.entry)]
        results = [(-d0, -index.entry)]  # max-heap on (distance, id)
        while frontier:
            d, u = heapq.heappop(frontier)
            worst = (-results[0][0], -results[0][1])
            if len(results) >= beam and (d, u) > worst:
                break
            friends = index.friends(u)
            fresh = [v for v in friends.tolist() if v not in visited]
            if not fresh:
                continue
            visited.update(fresh)
            dv = row_squared_l2(q, index.vectors[fresh])
            for v, dist in zip(fresh, dv.tolist()):
                worst = (-results[0][0], -results[0][1])
                if len(results) < beam or (dist, v) < worst:
                    heapq.heappush(results, (-dist, -v))
                    if len(results) > beam:
                        heapq.heappop(results)
                    heapq.heappush(frontier, (dist, v))
        found = sorted((-nd, -nv) for nd, nv in results)[:k_eff]
        for j, (dist, v) in enumerate(found):
            out_ids[qi, j] = v
            out_d[qi, j] = dist
    return SearchResult(out_ids, out_d)


def graph_stats(index: GraphIndex, backends=FRIEND_BACKENDS) -> dict:
    """Per-backend friend-list bits per stored id, plus theoretical savings."""
    degs = index.out_degrees()
    E = int(degs.sum())
    maxdeg = int(degs.max()) if index.N else 0
    logfact = np.zeros(maxdeg + 1, dtype=np.float64)
    if maxdeg >= 1:
        np.cumsum(np.log2(np.arange(1, maxdeg + 1)), out=logfact[1:])
    report = {
        "N": index.N,
        "edges": E,
        "max_degree": maxdeg,
        "mean_degree": E / max(index.N, 1),
        "theoretical_savings_bits": float(logfact[degs].sum()),
        "bits_per_id": {},
    }
    adjacency = [index.friends(u) for u in range(index.N)]
    for backend in backends:
        total = sum(
            encode_ids(backend, lst, index.N).bits_used for lst in adjacency
        )
        report["bits_per_id"][backend] = total / max(E, 1)
    return report


def graph_export_rec(index: GraphIndex,
                     model: VertexModel = VertexModel()) -> bytes:
    """Flatten the friend lists and compress the whole edge set in one stream."""
    adjacency = [index.friends(u) for u in range(index.N)]
    return rec_encode(DirectedGraph.from_adjacency(adjacency, index.N), model)


def graph_import_rec(blob: bytes, vectors, backend: str = "unc") -> GraphIndex:
    """Rebuild an index from an offline stream; friend lists come back
    ascending, which the search invariance makes harmless."""
    g = rec_decode(blob)
    X = np.ascontiguousarray(vectors, dtype=np.float32)
    if len(X) != g.N:
        raise ValueError("vector count does not match the encoded graph")
    edges = g.canonical_edges()
    degs = np.bincount(edges[:, 0], minlength=g.N) if edges.size else np.zeros(g.N, int)
    offsets = np.zeros(g.N + 1, dtype=np.int64)
    np.cumsum(degs, out=offsets[1:])
    blocks = [
        encode_ids(backend, edges[offsets[u]:offsets[u + 1], 1], g.N)
        for u in range(g.N)
    ]
    return GraphIndex(X, blocks, medoid(X), int(degs.max()) if g.N else 0, backend)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def save_graph_index(index: GraphIndex, path: str) -> None:
    meta = {
        "type": "graph",
        "N": index.N,
        "D": index.dim,
        "entry": index.entry,
        "max_degree": index.max_degree,
        "backend": index.backend,
    }
    write_container(path, {
        SEC_METADATA: json.dumps(meta).encode(),
        SEC_VECTORS: index.vectors.astype("<f4").tobytes(),
        SEC_FRIEND_BLOCKS: _pack_blocks(index.blocks),
    })


def load_graph_index(path: str) -> GraphIndex:
    sections = read_container(path)
    meta = json.loads(sections[SEC_METADATA].decode())
    if meta.get("type") != "graph":
        raise DeserializationError("container does not hold a graph index")
    vectors = np.frombuffer(sections[SEC_VECTORS], dtype="<f4").reshape(
        meta["N"], meta["D"]
    ).copy()
    blocks = _unpack_blocks(sections[SEC_FRIEND_BLOCKS])
    return GraphIndex(vectors, blocks, meta["entry"], meta["max_degree"],
                      meta["backend"])
