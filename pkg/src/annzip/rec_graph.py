"""Whole-graph compression of directed graphs via edge-order invariance.

A directed graph is a set of (u, v) pairs; the order in which edges are
listed carries log2(|E|!) bits that search structures never use.  The
encoder treats that order as a bits-back latent: for i = |E|..1 it samples
an index j in [i) from the coder state, emits the j-th edge in canonical
lexicographic order among the remaining ones (endpoint v first, then u,
so the decoder sees u first), and removes it.  The decoder mirrors the
process, re-encoding each edge's canonical rank, and must land exactly on
the initial coder state.  Everything goes through one state, so the
initial bits are paid once per graph rather than once per adjacency list.

Endpoints are coded under a pluggable vertex model: UNIFORM over [N)
(exact for near-regular search graphs) or a Polya urn whose mass for v is
proportional to count(v) + alpha (suited to heavy-tailed degree
distributions), quantized at precision 2**30.

A delta+varint adjacency-list baseline is included for reference
comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import ans
from .ans import RANS_L, _pmf_pop, _pmf_push, _uniform_pop, _uniform_push
from .errors import CorruptionError, DeserializationError
from .orderstat import _fen_prefix, _fen_select, _fen_update
from .util import read_varint, write_varint

_MAGIC = b"RECG"
_VERSION = 1
_POLYA_BITS = 30

MODEL_UNIFORM = 0
MODEL_POLYA = 1


@dataclass(frozen=True)
class VertexModel:
    kind: str = "uniform"
    polya_alpha: int = 1

    def __post_init__(self):
        if self.kind not in ("uniform", "polya"):
            raise ValueError(f"unknown vertex model {self.kind!r}")
        if self.kind == "polya" and (
            not isinstance(self.polya_alpha, int) or self.polya_alpha < 1
        ):
            # integer pseudo-counts keep the quantized model exactly
            # reproducible on the decode side
            raise ValueError("polya_alpha must be a positive integer")

    @property
    def code(self) -> int:
        return MODEL_UNIFORM if self.kind == "uniform" else MODEL_POLYA


@dataclass
class DirectedGraph:
    """Edge-set semantics: equality ignores edge order."""

    N: int
    edges: np.ndarray  # (E, 2) int64 rows (u, v)

    def __post_init__(self):
        edges = np.ascontiguousarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if edges.min() < 0 or edges.max() >= self.N:
                raise ValueError(f"edge endpoints must lie in [0, {self.N})")
            if (edges[:, 0] == edges[:, 1]).any():
                raise ValueError("self-loops are not allowed")
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        canon = edges[order]
        if canon.shape[0] > 1 and (np.diff(canon, axis=0) == 0).all(axis=1).any():
            raise ValueError("duplicate edges are not allowed")
        self.edges = edges

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    def canonical_edges(self) -> np.ndarray:
        order = np.lexsort((self.edges[:, 1], self.edges[:, 0]))
        return self.edges[order]

    def out_degrees(self) -> np.ndarray:
        return np.bincount(self.edges[:, 0], minlength=self.N).astype(np.int64)

    def to_adjacency(self) -> list:
        adj = [[] for _ in range(self.N)]
        for u, v in self.canonical_edges():
            adj[int(u)].append(int(v))
        return adj

    @classmethod
    def from_adjacency(cls, neighbors, N: int | None = None) -> "DirectedGraph":
        N = len(neighbors) if N is None else N
        us, vs = [], []
        for u, lst in enumerate(neighbors):
            us.extend([u] * len(lst))
            vs.extend(int(v) for v in lst)
        edges = np.column_stack(
            [np.asarray(us, dtype=np.int64), np.asarray(vs, dtype=np.int64)]
        ) if us else np.zeros((0, 2), dtype=np.int64)
        return cls(N, edges)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, DirectedGraph)
            and self.N == other.N
            and np.array_equal(self.canonical_edges(), other.canonical_edges())
        )


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _build_fenwick(values):
    fen = np.zeros(values.size + 1, dtype=np.int64)
    for i in range(values.size):
        fen[i + 1] += values[i]
        j = (i + 1) + ((i + 1) & -(i + 1))
        if j <= values.size:
            fen[j] += fen[i + 1]
    return fen


@njit(cache=True)
def _log2_floor(n):
    b = 0
    while (1 << (b + 1)) <= n:
        b += 1
    return b


@njit(cache=True)
def _polya_push(head, tail, tlen, w, fen, total, log2n):
    lo = _fen_prefix(fen, w)
    hi = lo + (_fen_prefix(fen, w + 1) - lo)
    r2 = np.int64(1) << _POLYA_BITS
    c = (lo * r2) // total
    p = (hi * r2) // total - c
    return _pmf_push(head, tail, tlen, np.uint64(p), np.uint64(c), _POLYA_BITS)


@njit(cache=True)
def _polya_pop(head, tail, tlen, fen, total, log2n):
    r2 = np.int64(1) << _POLYA_BITS
    t = np.int64(head & np.uint64((1 << _POLYA_BITS) - 1))
    target = ((t + 1) * total - 1) >> _POLYA_BITS
    w = _fen_select(fen, target, log2n)
    lo = _fen_prefix(fen, w)
    hi = _fen_prefix(fen, w + 1)
    c = (lo * r2) // total
    p = (hi * r2) // total - c
    head, tlen = _pmf_pop(head, tail, tlen, np.uint64(p), np.uint64(c), _POLYA_BITS)
    return w, head, tlen


@njit(cache=True)
def _rec_encode_kernel(us, vs, N, model_kind, mass_fen, total_mass, tail):
    E = us.size
    pos_fen = np.zeros(E + 1, dtype=np.int64)
    for i in range(1, E + 1):
        pos_fen[i] = i & (-i)
    log2e = _log2_floor(max(E, 1))
    log2n = _log2_floor(max(N, 1))
    head = np.uint64(RANS_L)
    tlen = 0
    total = total_mass
    for i in range(E, 0, -1):
        j, head, tlen = _uniform_pop(head, tail, tlen, np.uint64(i))
        pos = _fen_select(pos_fen, np.int64(j), log2e)
        _fen_update(pos_fen, pos, -1)
        u = us[pos]
        v = vs[pos]
        if model_kind == MODEL_UNIFORM:
            head, tlen = _uniform_push(head, tail, tlen, np.uint64(v), np.uint64(N))
            head, tlen = _uniform_push(head, tail, tlen, np.uint64(u), np.uint64(N))
        else:
            _fen_update(mass_fen, v, -1)
            total -= 1
            head, tlen = _polya_push(head, tail, tlen, v, mass_fen, total, log2n)
            _fen_update(mass_fen, u, -1)
            total -= 1
            head, tlen = _polya_push(head, tail, tlen, u, mass_fen, total, log2n)
    return head, tlen


@njit(cache=True)
def _arena_insert(starts, lens, caps, buf, free_ptr, u, v):
    """Sorted insert of v into u's neighbor list; returns (rank, free_ptr, status)."""
    m = lens[u]
    s = starts[u]
    lo, hi = 0, m
    while lo < hi:
        mid = (lo + hi) // 2
        if buf[s + mid] < v:
            lo = mid + 1
        else:
            hi = mid
    if lo < m and buf[s + lo] == v:
        return -1, free_ptr, 1  # duplicate edge
    if m == caps[u]:
        newcap = 8 if caps[u] == 0 else caps[u] * 2
        if free_ptr + newcap > buf.size:
            return -1, free_ptr, 2  # arena exhausted
        for k in range(m):
            buf[free_ptr + k] = buf[s + k]
        starts[u] = free_ptr
        caps[u] = newcap
        free_ptr += newcap
        s = starts[u]
    for k in range(m, lo, -1):
        buf[s + k] = buf[s + k - 1]
    buf[s + lo] = v
    lens[u] = m + 1
    return lo, free_ptr, 0


@njit(cache=True)
def _rec_decode_kernel(head, tail, tlen, N, E, model_kind, mass_fen, total_mass,
                       out_u, out_v, starts, lens, caps, buf):
    deg_fen = np.zeros(N + 1, dtype=np.int64)
    log2n = _log2_floor(max(N, 1))
    free_ptr = 0
    total = total_mass
    for i in range(1, E + 1):
        if model_kind == MODEL_UNIFORM:
            u64, head, tlen = _uniform_pop(head, tail, tlen, np.uint64(N))
            u = np.int64(u64)
            v64, head, tlen = _uniform_pop(head, tail, tlen, np.uint64(N))
            v = np.int64(v64)
        else:
            u, head, tlen = _polya_pop(head, tail, tlen, mass_fen, total, log2n)
            _fen_update(mass_fen, u, 1)
            total += 1
            v, head, tlen = _polya_pop(head, tail, tlen, mass_fen, total, log2n)
            _fen_update(mass_fen, v, 1)
            total += 1
        if u == v:
            return 1, i - 1  # self-loop: corrupt
        local, free_ptr, status = _arena_insert(starts, lens, caps, buf, free_ptr, u, v)
        if status != 0:
            return status + 2, i - 1
        out_u[i - 1] = u
        out_v[i - 1] = v
        rank = _fen_prefix(deg_fen, u) + local
        _fen_update(deg_fen, u, 1)
        head, tlen = _uniform_push(head, tail, tlen, np.uint64(rank), np.uint64(i))
    if head != np.uint64(RANS_L) or tlen != 0:
        return 2, E
    return 0, E


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

def _polya_fenwick(g_or_n, model: VertexModel, endpoint_counts=None):
    N = g_or_n
    counts = np.full(N, model.polya_alpha, dtype=np.int64)
    if endpoint_counts is not None:
        counts += endpoint_counts
    total = int(counts.sum())
    if total > (1 << _POLYA_BITS):
        raise ValueError("graph too large for the Polya model precision")
    return _build_fenwick(counts), total


def rec_encode(g: DirectedGraph, model: VertexModel = VertexModel()) -> bytes:
    edges = g.canonical_edges()
    E = edges.shape[0]
    us = np.ascontiguousarray(edges[:, 0])
    vs = np.ascontiguousarray(edges[:, 1])
    if model.code == MODEL_POLYA:
        endpoint_counts = (
            np.bincount(us, minlength=g.N) + np.bincount(vs, minlength=g.N)
        ).astype(np.int64) if E else np.zeros(g.N, dtype=np.int64)
        mass_fen, total = _polya_fenwick(g.N, model, endpoint_counts)
    else:
        mass_fen, total = np.zeros(1, dtype=np.int64), 0
    # 2*32 bits per edge upper-bounds the spills
    tail = np.zeros(2 * E + 8, dtype=np.uint32)
    head, tlen = _rec_encode_kernel(us, vs, g.N, model.code, mass_fen, total, tail)
    state = ans.AnsState(int(head), tail, tlen)
    out = bytearray()
    out += _MAGIC
    out.append(_VERSION)
    out += g.N.to_bytes(8, "little")
    out += E.to_bytes(8, "little")
    out.append(model.code)
    write_varint(out, model.polya_alpha if model.code == MODEL_POLYA else 0)
    out += ans.flush(state)
    return bytes(out)


def rec_stream_bits(blob: bytes) -> int:
    """Content bits of the coder state inside an encoded graph blob."""
    _, _, _, state = _parse_rec(blob)
    return state.bit_count


def _parse_rec(blob: bytes):
    if blob[:4] != _MAGIC:
        raise DeserializationError("not a REC graph blob")
    if blob[4] != _VERSION:
        raise DeserializationError(f"unsupported REC version {blob[4]}")
    N = int.from_bytes(blob[5:13], "little")
    E = int.from_bytes(blob[13:21], "little")
    kind = blob[21]
    alpha, off = read_varint(blob, 22)
    model = VertexModel("uniform") if kind == MODEL_UNIFORM else VertexModel("polya", alpha)
    return N, E, model, ans.unflush(blob[off:])


def rec_decode(blob: bytes) -> DirectedGraph:
    N, E, model, state = _parse_rec(blob)
    if model.code == MODEL_POLYA:
        mass_fen, total = _polya_fenwick(N, model)
    else:
        mass_fen, total = np.zeros(1, dtype=np.int64), 0
    tail = np.zeros(state._tlen + 2 * E + 8, dtype=np.uint32)
    tail[: state._tlen] = state.tail_words
    out_u = np.empty(E, dtype=np.int64)
    out_v = np.empty(E, dtype=np.int64)
    starts = np.zeros(N, dtype=np.int64)
    lens = np.zeros(N, dtype=np.int64)
    caps = np.zeros(N, dtype=np.int64)
    buf = np.empty(4 * E + 16 * N + 64, dtype=np.int32)
    status, done = _rec_decode_kernel(
        np.uint64(state.head), tail, state._tlen, N, E, model.code,
        mass_fen, total, out_u, out_v, starts, lens, caps, buf,
    )
    if status == 1:
        raise CorruptionError(f"REC stream decoded a self-loop at edge {done}")
    if status == 3:
        raise CorruptionError(f"REC stream decoded a duplicate edge at {done}")
    if status == 4:
        raise CorruptionError("REC arena exhausted: stream inconsistent")
    if status == 2:
        raise CorruptionError("REC stream did not return to the initial state")
    return DirectedGraph(N, np.column_stack([out_u, out_v]))


# ---------------------------------------------------------------------------
# delta + varint reference baseline
# ---------------------------------------------------------------------------

_DELTA_MAGIC = b"DVG1"


def baseline_delta_encode(g: DirectedGraph) -> bytes:
    """Per-node ascending neighbors as gap-1 varints; first value absolute."""
    out = bytearray()
    out += _DELTA_MAGIC
    out += g.N.to_bytes(8, "little")
    edges = g.canonical_edges()
    degs = np.bincount(edges[:, 0], minlength=g.N) if edges.size else np.zeros(g.N, int)
    offsets = np.zeros(g.N + 1, dtype=np.int64)
    np.cumsum(degs, out=offsets[1:])
    vs = edges[:, 1] if edges.size else np.zeros(0, dtype=np.int64)
    for u in range(g.N):
        lst = vs[offsets[u]:offsets[u + 1]]
        write_varint(out, lst.size)
        prev = None
        for v in lst:
            v = int(v)
            write_varint(out, v if prev is None else v - prev - 1)
            prev = v
    return bytes(out)


def baseline_delta_decode(blob: bytes) -> DirectedGraph:
    if blob[:4] != _DELTA_MAGIC:
        raise DeserializationError("not a delta+varint graph blob")
    N = int.from_bytes(blob[4:12], "little")
    off = 12
    neighbors = []
    for _ in range(N):
        m, off = read_varint(blob, off)
        lst = []
        prev = None
        for _ in range(m):
            g, off = read_varint(blob, off)
            v = g if prev is None else prev + 1 + g
            lst.append(v)
            prev = v
        neighbors.append(lst)
    return DirectedGraph.from_adjacency(neighbors, N)
