"""Inverted-file index with pluggable id storage and code storage.

Vectors are partitioned by a k-means coarse quantizer; each cluster
stores its member ids (under any of the six id backends) and the
member vectors or their PQ codes, aligned with the ids in ascending-id
order.  All backends are lossless, so search results are identical no
matter which one is selected; that equivalence is the contract the test
suite enforces byte for byte.

Two search paths are provided.  ``ivf_search`` materializes the ids of
every probed cluster during the scan (the online setting).  With a
wavelet-tree backend (or Elias-Fano, which supports positional access)
``ivf_search_deferred`` instead tracks (cluster, offset) tuples through
the scan and resolves only the ids that survive into the final top-k via
select on the assignment sequence; ties at the k-th distance are resolved
before truncation so the output matches the streaming path exactly.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from . import set_codecs, pq_entropy
from .container import (
    SEC_CENTROIDS,
    SEC_CODEBOOK,
    SEC_CODES,
    SEC_ID_BLOCKS,
    SEC_METADATA,
    SEC_SIZES,
    SEC_WAVELET,
    read_container,
    write_container,
)
from .errors import CapabilityError, DeserializationError
from .orderstat import OrderStatSet
from .quantizer import (
    PqCodebook,
    adc_scan,
    adc_tables,
    assign_nearest,
    kmeans_train,
    pq_encode,
    pq_train,
    row_squared_l2,
    squared_l2,
)
from .set_codecs import CompressedIdBlock, EfAccessor, decode_ids, encode_ids
from .util import pack_fixed_width, unpack_fixed_width
from .wavelet_tree import COMPRESSED, FLAT, WaveletTree, wt_build

ID_BACKENDS = ("unc", "compact", "ef", "roc", "wt", "wt1")
STREAMING_BACKENDS = ("unc", "compact", "ef", "roc")
DEFERRED_BACKENDS = ("wt", "wt1", "ef")

DEFAULT_NPROBE = 16
DEFAULT_K = 10


@dataclass(frozen=True)
class CodeConfig:
    """Code storage: 'flat' vectors, 'pq' codes, or 'pq-cond' entropy-coded."""

    kind: str = "flat"
    m: int = 0
    b: int = 8

    def __post_init__(self):
        if self.kind not in ("flat", "pq", "pq-cond"):
            raise ValueError(f"unknown code storage {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "CodeConfig":
        if text == "flat":
            return cls("flat")
        m = re.fullmatch(r"(pq|pq-cond)(\d+)x(\d+)", text)
        if not m:
            raise ValueError(
                f"bad code spec {text!r}: expected flat, pq<M>x<B> or pq-cond<M>x<B>"
            )
        return cls(m.group(1), int(m.group(2)), int(m.group(3)))

    def __str__(self) -> str:
        return self.kind if self.kind == "flat" else f"{self.kind}{self.m}x{self.b}"


@dataclass
class SearchResult:
    """Top-k per query: distance-ascending, ties broken by ascending id."""

    ids: np.ndarray        # (Q, k) int64, -1 padding when fewer candidates
    distances: np.ndarray  # (Q, k) float32, +inf padding
    resolutions: np.ndarray | None = None  # deferred path: ids resolved per query

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SearchResult)
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.distances, other.distances)
        )


@dataclass
class IvfIndex:
    centroids: np.ndarray          # (K, D) float32
    sizes: np.ndarray              # (K,) int64
    id_backend: str
    id_blocks: list | None         # per-cluster CompressedIdBlock (streaming)
    wavelet: WaveletTree | None    # wt/wt1 backends
    code_config: CodeConfig
    codebook: PqCodebook | None
    flat_vectors: np.ndarray | None    # cluster-ordered rows (flat)
    codes: np.ndarray | None           # cluster-ordered (N, m) codes (pq)
    cond_blocks: list | None           # per-cluster list of column blobs (pq-cond)
    N: int
    seed: int = 0
    _scratch: OrderStatSet | None = field(default=None, repr=False)
    _ef_cache: dict = field(default_factory=dict, repr=False)

    @property
    def K(self) -> int:
        return len(self.centroids)

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    @property
    def offsets(self) -> np.ndarray:
        off = np.zeros(self.K + 1, dtype=np.int64)
        np.cumsum(self.sizes, out=off[1:])
        return off

    # -- id materialization -------------------------------------------------

    def cluster_ids(self, k: int) -> np.ndarray:
        """Ascending member ids of cluster k, decoded from the backend."""
        if self.wavelet is not None:
            n = int(self.sizes[k])
            return np.fromiter(
                (self.wavelet.select(k, o) for o in range(n)), np.int64, n
            )
        block = self.id_blocks[k]
        if block.codec_tag == set_codecs.TAG_ROC:
            if self._scratch is None:
                self._scratch = OrderStatSet(self.N)
            return set_codecs.roc_decode(block, self.N, self._scratch)
        return decode_ids(block, self.N)

    def all_cluster_ids(self) -> list:
        return [self.cluster_ids(k) for k in range(self.K)]

    # -- distances ----------------------------------------------------------

    def _cluster_distances(self, query: np.ndarray, k: int) -> np.ndarray:
        off = self.offsets
        lo, hi = int(off[k]), int(off[k + 1])
        if self.code_config.kind == "flat":
            return row_squared_l2(query, self.flat_vectors[lo:hi])
        tables = adc_tables(self.codebook, query)
        codes = self._cluster_codes(k, lo, hi)
        return adc_scan(tables, codes)

    def _cluster_codes(self, k: int, lo: int, hi: int) -> np.ndarray:
        if self.code_config.kind == "pq":
            return self.codes[lo:hi]
        decoded = pq_entropy.cluster_codes_decode(
            self.cond_blocks[k], hi - lo, 1 << self.code_config.b
        )
        return decoded.astype(self.codebook.code_dtype())


def _probe_order(index: IvfIndex, query: np.ndarray, nprobe: int) -> np.ndarray:
    cd = squared_l2(query[None, :], index.centroids)[0]
    order = np.lexsort((np.arange(index.K), cd))
    return order[:nprobe]


def _select_topk(dists: np.ndarray, ids: np.ndarray, k: int):
    order = np.lexsort((ids, dists))[:k]
    out_ids = np.full(k, -1, dtype=np.int64)
    out_d = np.full(k, np.inf, dtype=np.float32)
    out_ids[: order.size] = ids[order]
    out_d[: order.size] = dists[order]
    return out_ids, out_d


def ivf_build(
    vectors,
    K: int,
    id_backend: str = "roc",
    code_backend: CodeConfig | str = "flat",
    seed: int = 0,
    kmeans_iters: int = 25,
    train_sample: int | None = None,
) -> IvfIndex:
    X = np.ascontiguousarray(vectors, dtype=np.float32)
    if isinstance(code_backend, str):
        code_backend = CodeConfig.parse(code_backend)
    if id_backend not in ID_BACKENDS:
        raise ValueError(f"unknown id backend {id_backend!r}")
    N = len(X)
    centroids = kmeans_train(X, K, kmeans_iters, seed, sample=train_sample)
    assign = assign_nearest(X, centroids)
    return _assemble(X, centroids, assign, id_backend, code_backend, seed)


def _assemble(X, centroids, assign, id_backend, code_backend, seed) -> IvfIndex:
    N = len(X)
    K = len(centroids)
    sizes = np.bincount(assign, minlength=K).astype(np.int64)
    order = np.argsort(assign, kind="stable")  # ascending id inside clusters
    offsets = np.zeros(K + 1, dtype=np.int64)
    np.cumsum(sizes, out=offsets[1:])

    id_blocks = None
    wavelet = None
    if id_backend in ("wt", "wt1"):
        wavelet = wt_build(assign, K, FLAT if id_backend == "wt" else COMPRESSED)
    else:
        id_blocks = [
            encode_ids(id_backend, order[offsets[k]:offsets[k + 1]], N)
            for k in range(K)
        ]

    codebook = None
    flat_vectors = None
    codes = None
    cond_blocks = None
    if code_backend.kind == "flat":
        flat_vectors = X[order]
    else:
        codebook = pq_train(X, code_backend.m, code_backend.b, seed)
        all_codes = pq_encode(codebook, X)[order]
        if code_backend.kind == "pq":
            codes = all_codes
        else:
            M = 1 << code_backend.b
            cond_blocks = [
                pq_entropy.cluster_codes_encode(
                    all_codes[offsets[k]:offsets[k + 1]].astype(np.int64), M
                )
                for k in range(K)
            ]
    return IvfIndex(
        centroids=centroids, sizes=sizes, id_backend=id_backend,
        id_blocks=id_blocks, wavelet=wavelet, code_config=code_backend,
        codebook=codebook, flat_vectors=flat_vectors, codes=codes,
        cond_blocks=cond_blocks, N=N, seed=seed,
    )


def with_id_backend(index: IvfIndex, id_backend: str) -> IvfIndex:
    """Same index content under a different id backend (re-encoded)."""
    if id_backend not in ID_BACKENDS:
        raise ValueError(f"unknown id backend {id_backend!r}")
    off = index.offsets
    assign = np.empty(index.N, dtype=np.int64)
    order = np.empty(index.N, dtype=np.int64)
    pos = 0
    for k in range(index.K):
        ids = index.cluster_ids(k)
        assign[ids] = k
        order[pos:pos + ids.size] = ids
        pos += ids.size
    id_blocks = None
    wavelet = None
    if id_backend in ("wt", "wt1"):
        wavelet = wt_build(assign, index.K, FLAT if id_backend == "wt" else COMPRESSED)
    else:
        id_blocks = [
            encode_ids(id_backend, order[off[k]:off[k + 1]], index.N)
            for k in range(index.K)
        ]
    return IvfIndex(
        centroids=index.centroids, sizes=index.sizes, id_backend=id_backend,
        id_blocks=id_blocks, wavelet=wavelet, code_config=index.code_config,
        codebook=index.codebook, flat_vectors=index.flat_vectors,
        codes=index.codes, cond_blocks=index.cond_blocks, N=index.N,
        seed=index.seed,
    )


def ivf_search(index: IvfIndex, queries, k: int = DEFAULT_K,
               nprobe: int = DEFAULT_NPROBE) -> SearchResult:
    """Scan nprobe clusters per query, decoding ids during the scan."""
    if k < 1 or nprobe < 1:
        raise ValueError("k and nprobe must be >= 1")
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float32))
    out_ids = np.empty((len(Q), k), dtype=np.int64)
    out_d = np.empty((len(Q), k), dtype=np.float32)
    for qi, q in enumerate(Q):
        probes = _probe_order(index, q, nprobe)
        dist_parts = []
        id_parts = []
        for c in probes:
            c = int(c)
            if index.sizes[c] == 0:
                continue
            dist_parts.append(index._cluster_distances(q, c))
            id_parts.append(index.cluster_ids(c))
        if dist_parts:
            dists = np.concatenate(dist_parts)
            ids = np.concatenate(id_parts)
        else:
            dists = np.zeros(0, dtype=np.float32)
            ids = np.zeros(0, dtype=np.int64)
        out_ids[qi], out_d[qi] = _select_topk(dists, ids, k)
    return SearchResult(out_ids, out_d)


def ivf_search_deferred(index: IvfIndex, queries, k: int = DEFAULT_K,
                        nprobe: int = DEFAULT_NPROBE) -> SearchResult:
    """Track (cluster, offset) tuples; resolve ids only for the final top-k."""
    if k < 1 or nprobe < 1:
        raise ValueError("k and nprobe must be >= 1")
    if index.id_backend not in DEFERRED_BACKENDS:
        raise CapabilityError(
            f"backend {index.id_backend!r} has no positional access; "
            "deferred resolution needs wt, wt1 or ef"
        )
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float32))
    out_ids = np.empty((len(Q), k), dtype=np.int64)
    out_d = np.empty((len(Q), k), dtype=np.float32)
    resolutions = np.zeros(len(Q), dtype=np.int64)
    for qi, q in enumerate(Q):
        probes = _probe_order(index, q, nprobe)
        dist_parts, cl_parts, off_parts = [], [], []
        for c in probes:
            c = int(c)
            n = int(index.sizes[c])
            if n == 0:
                continue
            dist_parts.append(index._cluster_distances(q, c))
            cl_parts.append(np.full(n, c, dtype=np.int64))
            off_parts.append(np.arange(n, dtype=np.int64))
        if not dist_parts:
            out_ids[qi] = -1
            out_d[qi] = np.inf
            continue
        dists = np.concatenate(dist_parts)
        cls = np.concatenate(cl_parts)
        offs = np.concatenate(off_parts)
        if dists.size > k:
            kth = np.partition(dists, k - 1)[k - 1]
            keep = dists <= kth  # boundary ties resolved after id lookup
            dists, cls, offs = dists[keep], cls[keep], offs[keep]
        ids = np.empty(dists.size, dtype=np.int64)
        for i in range(dists.size):
            ids[i] = _resolve(index, int(cls[i]), int(offs[i]))
        resolutions[qi] = dists.size
        out_ids[qi], out_d[qi] = _select_topk(dists, ids, k)
    return SearchResult(out_ids, out_d, resolutions)


def _resolve(index: IvfIndex, cluster: int, offset: int) -> int:
    if index.wavelet is not None:
        return index.wavelet.select(cluster, offset)
    acc = index._ef_cache.get(cluster)
    if acc is None:
        acc = EfAccessor(index.id_blocks[cluster], index.N)
        index._ef_cache[cluster] = acc
    return acc.access(offset)


def ivf_stats(index: IvfIndex) -> dict:
    """Bits-per-id accounting plus the theoretical reordering savings."""
    N, K = index.N, index.K
    sizes = index.sizes
    logfact = np.zeros(int(sizes.max()) + 1 if K else 1, dtype=np.float64)
    if logfact.size > 2:
        np.cumsum(np.log2(np.arange(1, logfact.size)), out=logfact[1:])
    theoretical = float(logfact[sizes].sum())
    report = {
        "N": N,
        "K": K,
        "id_backend": index.id_backend,
        "code_backend": str(index.code_config),
        "cluster_size_min": int(sizes.min()) if K else 0,
        "cluster_size_max": int(sizes.max()) if K else 0,
        "theoretical_savings_bits": theoretical,
        "theoretical_savings_bits_per_id": theoretical / max(N, 1),
    }
    if index.wavelet is not None:
        total = index.wavelet.total_bits()
        report["bits_per_id"] = total / max(N, 1)
        report["payload_bits"] = index.wavelet.payload_bits()
    else:
        per_cluster = np.array(
            [blk.bits_used for blk in index.id_blocks], dtype=np.float64
        )
        report["bits_per_id"] = float(per_cluster.sum()) / max(N, 1)
        report["per_cluster_bits"] = per_cluster
        if index.id_backend == "roc":
            ideal = sizes * np.log2(max(N, 2)) - logfact[sizes]
            report["measured_savings_bits"] = float(
                (sizes * np.log2(max(N, 2)) - per_cluster).sum()
            )
            report["per_cluster_overhead_bits"] = per_cluster - ideal
    if index.code_config.kind == "pq":
        report["code_bits_per_element"] = float(index.code_config.b)
    elif index.code_config.kind == "pq-cond":
        off = index.offsets
        total = sum(
            pq_entropy.stream_bits(b)
            for blobs in index.cond_blocks
            for b in blobs
        )
        report["code_bits_per_element"] = total / max(N * index.code_config.m, 1)
    else:
        report["code_bits_per_element"] = 32.0 * index.dim / max(index.dim, 1)
    return report


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _pack_blocks(blocks: list) -> bytes:
    out = bytearray()
    out += len(blocks).to_bytes(4, "little")
    for blk in blocks:
        raw = blk.to_bytes()
        out += len(raw).to_bytes(4, "little")
        out += int(blk.bits_used).to_bytes(8, "little")
        out += raw
    return bytes(out)


def _unpack_blocks(data: bytes) -> list:
    count = int.from_bytes(data[:4], "little")
    blocks = []
    pos = 4
    for _ in range(count):
        ln = int.from_bytes(data[pos:pos + 4], "little")
        bits = int.from_bytes(data[pos + 4:pos + 12], "little")
        pos += 12
        blocks.append(CompressedIdBlock.from_bytes(data[pos:pos + ln], bits))
        pos += ln
    return blocks


def _pack_codebook(cb: PqCodebook) -> bytes:
    out = bytearray()
    out += cb.m.to_bytes(4, "little")
    out += cb.b.to_bytes(4, "little")
    out += cb.sub_dim.to_bytes(4, "little")
    out += cb.centroids.astype("<f4").tobytes()
    return bytes(out)


def _unpack_codebook(data: bytes) -> PqCodebook:
    m = int.from_bytes(data[0:4], "little")
    b = int.from_bytes(data[4:8], "little")
    sub = int.from_bytes(data[8:12], "little")
    cents = np.frombuffer(data, dtype="<f4", offset=12).reshape(m, 1 << b, sub)
    return PqCodebook(m, b, cents.copy())


def save_index(index: IvfIndex, path: str) -> None:
    meta = {
        "type": "ivf",
        "N": index.N,
        "K": index.K,
        "D": index.dim,
        "id_backend": index.id_backend,
        "code_backend": str(index.code_config),
        "seed": index.seed,
    }
    sections = {
        SEC_METADATA: json.dumps(meta).encode(),
        SEC_CENTROIDS: index.centroids.astype("<f4").tobytes(),
        SEC_SIZES: index.sizes.astype("<i8").tobytes(),
    }
    if index.wavelet is not None:
        sections[SEC_WAVELET] = index.wavelet.to_bytes()
    else:
        sections[SEC_ID_BLOCKS] = _pack_blocks(index.id_blocks)
    cfg = index.code_config
    if cfg.kind == "flat":
        sections[SEC_CODES] = index.flat_vectors.astype("<f4").tobytes()
    else:
        sections[SEC_CODEBOOK] = _pack_codebook(index.codebook)
        if cfg.kind == "pq":
            if cfg.b % 8 == 0:
                payload = index.codes.astype("<u2" if cfg.b > 8 else "u1").tobytes()
            else:
                payload = pack_fixed_width(index.codes.ravel(), cfg.b)
            sections[SEC_CODES] = payload
        else:
            out = bytearray()
            for blobs in index.cond_blocks:
                out += len(blobs).to_bytes(4, "little")
                for b in blobs:
                    out += len(b).to_bytes(4, "little")
                    out += b
            sections[SEC_CODES] = bytes(out)
    write_container(path, sections)


def load_index(path: str) -> IvfIndex:
    sections = read_container(path)
    meta = json.loads(sections[SEC_METADATA].decode())
    if meta.get("type") != "ivf":
        raise DeserializationError("container does not hold an IVF index")
    N, K, D = meta["N"], meta["K"], meta["D"]
    cfg = CodeConfig.parse(meta["code_backend"])
    centroids = np.frombuffer(sections[SEC_CENTROIDS], dtype="<f4").reshape(K, D).copy()
    sizes = np.frombuffer(sections[SEC_SIZES], dtype="<i8").astype(np.int64)
    wavelet = None
    id_blocks = None
    if meta["id_backend"] in ("wt", "wt1"):
        wavelet = WaveletTree.from_bytes(sections[SEC_WAVELET])
    else:
        id_blocks = _unpack_blocks(sections[SEC_ID_BLOCKS])
    codebook = flat_vectors = codes = cond_blocks = None
    if cfg.kind == "flat":
        flat_vectors = np.frombuffer(sections[SEC_CODES], dtype="<f4").reshape(N, D).copy()
    else:
        codebook = _unpack_codebook(sections[SEC_CODEBOOK])
        if cfg.kind == "pq":
            if cfg.b % 8 == 0:
                dt = "<u2" if cfg.b > 8 else "u1"
                codes = np.frombuffer(sections[SEC_CODES], dtype=dt).reshape(
                    N, cfg.m
                ).astype(codebook.code_dtype())
            else:
                codes = unpack_fixed_width(
                    sections[SEC_CODES], N * cfg.m, cfg.b
                ).reshape(N, cfg.m).astype(codebook.code_dtype())
        else:
            cond_blocks = []
            data = sections[SEC_CODES]
            pos = 0
            for _ in range(K):
                cnt = int.from_bytes(data[pos:pos + 4], "little")
                pos += 4
                blobs = []
                for _ in range(cnt):
                    ln = int.from_bytes(data[pos:pos + 4], "little")
                    pos += 4
                    blobs.append(bytes(data[pos:pos + ln]))
                    pos += ln
                cond_blocks.append(blobs)
    return IvfIndex(
        centroids=centroids, sizes=sizes, id_backend=meta["id_backend"],
        id_blocks=id_blocks, wavelet=wavelet, code_config=cfg,
        codebook=codebook, flat_vectors=flat_vectors, codes=codes,
        cond_blocks=cond_blocks, N=N, seed=meta.get("seed", 0),
    )
