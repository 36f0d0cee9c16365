"""Codecs for an unordered list of distinct ids drawn from [0, N).

Four interchangeable block codecs:

* UNC      ids as raw 64-bit words (uncompressed baseline)
* COMPACT  ids bit-packed to ceil(log2 N) bits each, in presentation order
* EF       Elias-Fano: per-id low bits plus a unary-coded stream of the
           gaps between successive high parts, over the ascending order
* ROC      bits-back sampling-without-replacement: element order is
           treated as a latent permutation, recovering ~log2(n!) bits
           against the compact cost of n*log2(N)

Block layout is one tag byte, a varint element count, then the payload;
``bits_used`` reports payload content bits only (headers and padding are
container overhead and excluded, so rates are comparable across codecs).
Blocks are set-valued: every decoder returns the members in ascending
order no matter how they were presented.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import ans
from .ans import RANS_L, _uniform_pop, _uniform_push
from .errors import CorruptionError, DeserializationError
from .orderstat import OrderStatSet, _fen_prefix, _fen_select, _fen_update
from .util import pack_fixed_width, read_varint, unpack_fixed_width, write_varint

TAG_UNC = 0
TAG_COMPACT = 1
TAG_EF = 2
TAG_ROC = 3

_TAG_NAMES = {TAG_UNC: "unc", TAG_COMPACT: "compact", TAG_EF: "ef", TAG_ROC: "roc"}


@dataclass(frozen=True)
class CompressedIdBlock:
    codec_tag: int
    n: int
    payload: bytes
    bits_used: int

    @property
    def codec_name(self) -> str:
        return _TAG_NAMES[self.codec_tag]

    def to_bytes(self) -> bytes:
        out = bytearray([self.codec_tag])
        write_varint(out, self.n)
        out += self.payload
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes, bits_used: int = -1) -> "CompressedIdBlock":
        if not data:
            raise DeserializationError("empty id block")
        tag = data[0]
        if tag not in _TAG_NAMES:
            raise DeserializationError(f"unknown codec tag {tag}")
        n, off = read_varint(data, 1)
        return cls(tag, n, bytes(data[off:]), bits_used)


def _as_id_array(ids, N: int) -> np.ndarray:
    arr = np.asarray(ids, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError("ids must be one-dimensional")
    if arr.size and (arr.min() < 0 or arr.max() >= N):
        raise ValueError(f"ids must lie in [0, {N})")
    if np.unique(arr).size != arr.size:
        raise ValueError("ids must be distinct")
    return arr


def theoretical_savings(n: int) -> float:
    """log2(n!) by direct summation; the reordering gain for an n-element set."""
    return float(np.sum(np.log2(np.arange(2, n + 1, dtype=np.float64))))


# ---------------------------------------------------------------------------
# UNC / COMPACT
# ---------------------------------------------------------------------------

def unc_encode(ids, N: int) -> CompressedIdBlock:
    arr = _as_id_array(ids, N)
    return CompressedIdBlock(TAG_UNC, arr.size, arr.astype("<u8").tobytes(),
                             64 * arr.size)


def unc_decode(block: CompressedIdBlock, N: int) -> np.ndarray:
    ids = np.frombuffer(block.payload, dtype="<u8", count=block.n).astype(np.int64)
    return np.sort(ids)


def compact_width(N: int) -> int:
    # ceil(log2 N) via integers: exact at power-of-two boundaries
    return (N - 1).bit_length() if N > 1 else 0


def compact_encode(ids, N: int) -> CompressedIdBlock:
    """Fixed-width packing: exactly n * ceil(log2 N) payload bits."""
    arr = _as_id_array(ids, N)
    w = compact_width(N)
    return CompressedIdBlock(TAG_COMPACT, arr.size, pack_fixed_width(arr, w),
                             w * arr.size)


def compact_decode(block: CompressedIdBlock, N: int) -> np.ndarray:
    ids = unpack_fixed_width(block.payload, block.n, compact_width(N))
    if ids.size and ids.max() >= N:
        raise CorruptionError("compact block decodes an id outside the universe")
    return np.sort(ids)


# ---------------------------------------------------------------------------
# Elias-Fano
# ---------------------------------------------------------------------------

def ef_low_width(N: int, n: int) -> int:
    """Low-bit width for an n-element block over [0, N).

    Starts from ceil(log2(N/n)) and also considers one bit less, keeping
    whichever minimizes n*l + n + ((N-1) >> l), the exact block size under
    the worst-case top high part.  The choice depends only on (N, n), so
    the decoder re-derives it; ties keep the canonical ceil width.
    """
    if n == 0:
        return 0
    c = ((N + n - 1) // n - 1).bit_length()  # exact ceil(log2(N/n))
    if c == 0:
        return 0
    cost_c = n * c + n + ((N - 1) >> c)
    cost_below = n * (c - 1) + n + ((N - 1) >> (c - 1))
    return c - 1 if cost_below < cost_c else c


def ef_encode(ids, N: int) -> CompressedIdBlock:
    arr = np.sort(_as_id_array(ids, N))
    n = arr.size
    if n == 0:
        return CompressedIdBlock(TAG_EF, 0, b"", 0)
    l = ef_low_width(N, n)
    highs = arr >> l
    # one set bit per element at position high + index: equivalently the
    # gaps between successive highs in unary, ~2n bits total
    upper_nbits = int(highs[-1]) + n
    upper = np.zeros(upper_nbits, dtype=np.uint8)
    upper[highs + np.arange(n)] = 1
    upper_bytes = np.packbits(upper).tobytes()
    low_bytes = pack_fixed_width(arr & ((1 << l) - 1), l)
    payload = bytearray()
    write_varint(payload, upper_nbits)
    payload += upper_bytes
    payload += low_bytes
    return CompressedIdBlock(TAG_EF, n, bytes(payload), upper_nbits + n * l)


def _ef_parse(block: CompressedIdBlock, N: int):
    n = block.n
    l = ef_low_width(N, n)
    upper_nbits, off = read_varint(block.payload, 0)
    upper_len = (upper_nbits + 7) // 8
    upper = np.unpackbits(
        np.frombuffer(block.payload, np.uint8, upper_len, off), count=upper_nbits
    )
    lows = unpack_fixed_width(block.payload[off + upper_len:], n, l)
    return l, upper, lows


def ef_decode(block: CompressedIdBlock, N: int) -> np.ndarray:
    if block.n == 0:
        return np.zeros(0, dtype=np.int64)
    l, upper, lows = _ef_parse(block, N)
    ones = np.flatnonzero(upper)
    highs = ones - np.arange(block.n)
    return (highs.astype(np.int64) << l) | lows


def ef_access(block: CompressedIdBlock, i: int, N: int) -> int:
    """The i-th smallest member. Parses the block; use EfAccessor for bulk."""
    return int(EfAccessor(block, N).access(i))


class EfAccessor:
    """Positional access into one EF block via select on the upper stream."""

    def __init__(self, block: CompressedIdBlock, N: int):
        if block.codec_tag != TAG_EF:
            raise ValueError("not an EF block")
        self.n = block.n
        if self.n:
            self._l, upper, self._lows = _ef_parse(block, N)
            self._ones = np.flatnonzero(upper)

    def access(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError(f"access({i}) on a block of {self.n} elements")
        high = int(self._ones[i]) - i
        return (high << self._l) | int(self._lows[i])


# ---------------------------------------------------------------------------
# ROC
# ---------------------------------------------------------------------------

@njit(cache=True)
def _roc_encode_kernel(sorted_ids, N, tail):
    """Interleaved bits-back encode over the positions of the sorted ids.

    For i = n..1: sample j in [i) from the state, select the j-th smallest
    remaining element, encode it under the uniform-over-[N) model, remove
    it.  The position Fenwick makes select O(log n).
    """
    n = sorted_ids.size
    fen = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):  # all-ones Fenwick: node i covers i & -i leaves
        fen[i] = i & (-i)
    log2n = 0
    while (1 << (log2n + 1)) <= n:
        log2n += 1
    head = np.uint64(RANS_L)
    tlen = 0
    for i in range(n, 0, -1):
        j, head, tlen = _uniform_pop(head, tail, tlen, np.uint64(i))
        pos = _fen_select(fen, np.int64(j), log2n)
        _fen_update(fen, pos, -1)
        head, tlen = _uniform_push(
            head, tail, tlen, np.uint64(sorted_ids[pos]), np.uint64(N)
        )
    return head, tlen


@njit(cache=True)
def _roc_decode_kernel(head, tail, tlen, n, N, fen, member, out):
    """Inverse pass: decode each id, then re-encode its rank in the growing
    set under uniform-over-[i).  Returns 0 on success; the scratch Fenwick
    and membership bitmap are restored to empty before returning."""
    status = 0
    for i in range(1, n + 1):
        z64, head, tlen = _uniform_pop(head, tail, tlen, np.uint64(N))
        z = np.int64(z64)
        if member[z]:
            status = 1  # duplicate id: corrupt stream
            out = out[:i - 1]
            break
        member[z] = 1
        _fen_update(fen, z, 1)
        out[i - 1] = z
        j = _fen_prefix(fen, z)
        head, tlen = _uniform_push(head, tail, tlen, np.uint64(j), np.uint64(i))
    if status == 0 and (head != np.uint64(RANS_L) or tlen != 0):
        status = 2  # final state mismatch
    for k in range(out.size):
        member[out[k]] = 0
        _fen_update(fen, out[k], -1)
    return status


def roc_encode(ids, N: int) -> CompressedIdBlock:
    arr = np.sort(_as_id_array(ids, N))
    n = arr.size
    if n == 0:
        return CompressedIdBlock(TAG_ROC, 0, b"", 0)
    tail = np.zeros(n + 8, dtype=np.uint32)
    head, tlen = _roc_encode_kernel(arr, N, tail)
    state = ans.AnsState(int(head), tail, tlen)
    return CompressedIdBlock(TAG_ROC, n, ans.flush(state), state.bit_count)


@njit(cache=True)
def _roc_bits_many(flat_sorted_ids, offsets, N, tail):
    """Encoded size in bits of each list, by running the real encoder."""
    out = np.empty(offsets.size - 1, dtype=np.int64)
    for i in range(offsets.size - 1):
        ids = flat_sorted_ids[offsets[i]:offsets[i + 1]]
        head, tlen = _roc_encode_kernel(ids, N, tail)
        bits = 0
        while head > 0:
            head >>= np.uint64(1)
            bits += 1
        out[i] = bits + 32 * tlen
    return out


def roc_bits_per_list(lists_flat, offsets, N: int) -> np.ndarray:
    """Measured ROC bits for many lists at once (ids sorted within lists)."""
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    flat = np.ascontiguousarray(lists_flat, dtype=np.int64)
    max_n = int(np.diff(offsets).max()) if offsets.size > 1 else 0
    tail = np.zeros(max_n + 8, dtype=np.uint32)
    return _roc_bits_many(flat, offsets, N, tail)


def roc_decode(block: CompressedIdBlock, N: int,
               scratch: OrderStatSet | None = None) -> np.ndarray:
    """Decode a ROC block; ``scratch`` is a reusable OrderStatSet over [N)."""
    n = block.n
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    if scratch is None:
        scratch = OrderStatSet(N)
    elif scratch.universe_size < N or scratch.size != 0:
        raise ValueError("scratch must be an empty OrderStatSet over >= N values")
    state = ans.unflush(block.payload)
    tail = np.zeros(state._tlen + n + 8, dtype=np.uint32)
    tail[: state._tlen] = state.tail_words
    out = np.empty(n, dtype=np.int64)
    status = _roc_decode_kernel(
        np.uint64(state.head), tail, state._tlen, n, N,
        scratch._tree, scratch._member, out,
    )
    if status == 1:
        raise CorruptionError("ROC stream decoded a duplicate id")
    if status == 2:
        raise CorruptionError("ROC stream did not return to the initial state")
    return np.sort(out)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

_ENCODERS = {
    TAG_UNC: unc_encode,
    TAG_COMPACT: compact_encode,
    TAG_EF: ef_encode,
    TAG_ROC: roc_encode,
}
_DECODERS = {
    TAG_UNC: unc_decode,
    TAG_COMPACT: compact_decode,
    TAG_EF: ef_decode,
    TAG_ROC: lambda block, N, scratch=None: roc_decode(block, N, scratch),
}
TAG_BY_NAME = {v: k for k, v in _TAG_NAMES.items()}


def encode_ids(name: str, ids, N: int) -> CompressedIdBlock:
    return _ENCODERS[TAG_BY_NAME[name]](ids, N)


def decode_ids(block: CompressedIdBlock, N: int,
               scratch: OrderStatSet | None = None) -> np.ndarray:
    if block.codec_tag == TAG_ROC:
        return roc_decode(block, N, scratch)
    return _DECODERS[block.codec_tag](block, N)
