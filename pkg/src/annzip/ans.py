"""Streaming range-variant ANS coder with stack (LIFO) semantics.

The coder state is a pair (head, tail): ``head`` is an unsigned 64-bit
integer and ``tail`` is a stack of spilled 32-bit words.  Between
operations the head stays inside the renormalization interval
[RANS_L, RANS_L << 32) whenever the tail is non-empty; encoding spills at
most one word per symbol and decoding pulls it back, so
decode(encode(s, x)) restores head and tail exactly.

Models are quantized to a power-of-two total mass r = 2**r_bits with
r_bits <= 32.  Power-of-two totals are required for the spill/pull rules
to be exact inverses (the renormalization thresholds must divide the
interval bounds).  Uniform distributions over an arbitrary bound b are
supported through an implicit model at precision 2**32 whose CDF is
computed by multiplication and division, never by table lookup, so the
alphabet may be as large as 2**32.

Because decoding with a model *removes* bits from the state, a state can
act as an invertible sampler: ``decode_uniform`` draws a sample and
``encode_uniform`` puts it back, restoring the state bit-exactly.  That
property is the basis of the bits-back set and graph codecs built on top.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DeserializationError, TruncatedStreamError

RANS_L = 1 << 32          # lower bound of the renormalization interval
TAIL_WORD_BITS = 32
UNIFORM_BITS = 64 - TAIL_WORD_BITS  # precision used for implicit uniform models

_MAGIC = b"ANS1"
_VERSION = 1
_HEADER_LEN = 4 + 1 + 8


# ---------------------------------------------------------------------------
# jit primitives
#
# States cross the numba boundary as (head: uint64, tail: uint32[:], tlen).
# Every primitive spills or pulls at most one word, so callers must leave
# one free slot in ``tail`` before a push.  All head arithmetic is uint64;
# the bounds proofs rely on r_bits <= 32 and RANS_L == 2**32.
# ---------------------------------------------------------------------------

@njit(cache=True)
def _pmf_push(head, tail, tlen, p, c, r_bits):
    p = np.uint64(p)
    c = np.uint64(c)
    rb = np.uint64(r_bits)
    r = np.uint64(1) << rb
    if p < r and head >= (p << (np.uint64(64) - rb)):
        tail[tlen] = np.uint32(head & np.uint64(0xFFFFFFFF))
        tlen += 1
        head >>= np.uint64(32)
    head = ((head // p) << rb) + c + head % p
    return head, tlen


@njit(cache=True)
def _pmf_pop(head, tail, tlen, p, c, r_bits):
    p = np.uint64(p)
    c = np.uint64(c)
    rb = np.uint64(r_bits)
    t = head & ((np.uint64(1) << rb) - np.uint64(1))
    head = p * (head >> rb) + (t - c)
    while head < np.uint64(RANS_L) and tlen > 0:
        tlen -= 1
        head = (head << np.uint64(32)) | np.uint64(tail[tlen])
    return head, tlen


@njit(cache=True)
def _uniform_mass(j, bound):
    # mass/cumulative of j under the implicit uniform model at precision 2**32
    j = np.uint64(j)
    bound = np.uint64(bound)
    lo = (j << np.uint64(32)) // bound
    hi = ((j + np.uint64(1)) << np.uint64(32)) // bound
    return hi - lo, lo


@njit(cache=True)
def _uniform_push(head, tail, tlen, j, bound):
    if bound == np.uint64(1):
        return head, tlen
    p, c = _uniform_mass(j, bound)
    if head >= (p << np.uint64(32)):
        tail[tlen] = np.uint32(head & np.uint64(0xFFFFFFFF))
        tlen += 1
        head >>= np.uint64(32)
    head = ((head // p) << np.uint64(32)) + c + head % p
    return head, tlen


@njit(cache=True)
def _uniform_pop(head, tail, tlen, bound):
    if bound == np.uint64(1):
        return np.uint64(0), head, tlen
    bound = np.uint64(bound)
    t = head & np.uint64(0xFFFFFFFF)
    j = ((t + np.uint64(1)) * bound - np.uint64(1)) >> np.uint64(32)
    p, c = _uniform_mass(j, bound)
    head = p * (head >> np.uint64(32)) + (t - c)
    while head < np.uint64(RANS_L) and tlen > 0:
        tlen -= 1
        head = (head << np.uint64(32)) | np.uint64(tail[tlen])
    return j, head, tlen


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantizedPmf:
    """A probability model quantized to a power-of-two total mass.

    ``masses[x]`` is the integer mass of symbol x and ``cumulatives[x]``
    the exclusive prefix sum, so the slot interval of x is
    [cumulatives[x], cumulatives[x] + masses[x]).  Symbols with zero mass
    cannot be encoded.
    """

    precision_r: int
    masses: np.ndarray
    cumulatives: np.ndarray = field(default=None)

    def __post_init__(self):
        r = self.precision_r
        if r < 2 or (r & (r - 1)) != 0 or r > (1 << 32):
            raise ValueError(
                f"precision must be a power of two in [2, 2**32], got {r}"
            )
        masses = np.ascontiguousarray(self.masses, dtype=np.int64)
        if masses.ndim != 1 or masses.size == 0:
            raise ValueError("masses must be a non-empty 1-d sequence")
        if (masses < 0).any():
            raise ValueError("masses must be non-negative")
        if int(masses.sum()) != r:
            raise ValueError("masses must sum to the precision")
        cum = np.zeros(masses.size, dtype=np.int64)
        np.cumsum(masses[:-1], out=cum[1:])
        given = self.cumulatives
        if given is not None and not np.array_equal(
            np.asarray(given, dtype=np.int64), cum
        ):
            raise ValueError("cumulatives inconsistent with masses")
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "cumulatives", cum)

    @property
    def r_bits(self) -> int:
        return self.precision_r.bit_length() - 1

    @property
    def alphabet_size(self) -> int:
        return self.masses.size

    def slot_to_symbol(self, t: int) -> int:
        """Inverse CDF: the unique x with c_x <= t < c_x + p_x."""
        x = int(np.searchsorted(self.cumulatives, t, side="right")) - 1
        while self.masses[x] == 0:  # zero-mass symbols share a cumulative
            x -= 1
        return x

    @classmethod
    def quantize(cls, weights, precision_r: int) -> "QuantizedPmf":
        """Quantize positive weights to integer masses summing to precision_r.

        Every positive weight gets mass >= 1; the floor residue is handed
        to the lowest-indexed positive symbols, which keeps the rule O(M)
        and deterministic for a decoder that re-derives the model.
        """
        w = np.asarray(weights, dtype=np.float64)
        if (w < 0).any() or w.sum() <= 0:
            raise ValueError("weights must be non-negative with positive sum")
        masses = np.floor(w * (precision_r / w.sum())).astype(np.int64)
        masses[(w > 0) & (masses == 0)] = 1
        short = precision_r - int(masses.sum())
        pos = np.flatnonzero(w > 0)
        if short > 0:
            masses[pos[:short]] += 1
        elif short < 0:
            # take the excess back from the largest masses
            for i in np.argsort(-masses, kind="stable"):
                if short == 0:
                    break
                take = min(masses[i] - 1, -short)
                masses[i] -= take
                short += take
            if short != 0:
                raise ValueError("precision too small for this alphabet")
        return cls(precision_r, masses)


def uniform_pmf(bound: int, precision_r: int = 1 << 32) -> QuantizedPmf:
    """Materialized uniform model over [bound); for small alphabets only."""
    if bound < 1:
        raise ValueError("bound must be >= 1")
    edges = (np.arange(bound + 1, dtype=np.int64) * precision_r) // bound
    return QuantizedPmf(precision_r, np.diff(edges))


# ---------------------------------------------------------------------------
# state
# ---------------------------------------------------------------------------

class AnsState:
    """Mutable coder state: uint64 head plus a stack of spilled words.

    The module-level operations mutate the state in place and return it,
    so call sites read like the functional encode/decode equations while
    staying allocation-free.
    """

    __slots__ = ("head", "_tail", "_tlen")

    def __init__(self, head: int = RANS_L, tail=None, tlen: int = 0):
        self.head = int(head)
        self._tail = (
            tail if tail is not None else np.zeros(16, dtype=np.uint32)
        )
        self._tlen = int(tlen)

    # -- container plumbing ------------------------------------------------

    def _reserve(self, extra: int = 1) -> None:
        if self._tlen + extra > self._tail.size:
            grown = np.zeros(
                max(2 * self._tail.size, self._tlen + extra), dtype=np.uint32
            )
            grown[: self._tlen] = self._tail[: self._tlen]
            self._tail = grown

    @property
    def tail_words(self) -> np.ndarray:
        return self._tail[: self._tlen]

    @property
    def bit_count(self) -> int:
        """log2 of the state: head bits plus 32 bits per tail word."""
        return self.head.bit_length() + TAIL_WORD_BITS * self._tlen

    def copy(self) -> "AnsState":
        return AnsState(self.head, self._tail[: self._tlen].copy(), self._tlen)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, AnsState)
            and self.head == other.head
            and self._tlen == other._tlen
            and bool(np.array_equal(self.tail_words, other.tail_words))
        )

    def __repr__(self) -> str:
        return f"AnsState(head={self.head:#x}, tail_words={self._tlen})"


def state_init(seed_bits: int = 0) -> AnsState:
    """Deterministic state at the renormalization lower bound.

    ``seed_bits`` (up to 32 bits) are mixed into the head so independent
    streams can start from distinct, reproducible constants.  The result
    never exceeds 64 bits.
    """
    return AnsState(RANS_L | (int(seed_bits) & 0xFFFFFFFF))


def bit_count(state: AnsState) -> int:
    return state.bit_count


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def encode_symbol(state: AnsState, x: int, model: QuantizedPmf) -> AnsState:
    """Push symbol x; the head map is r * (s // p_x) + c_x + s mod p_x."""
    p = int(model.masses[x])
    if p == 0:
        raise ValueError(f"symbol {x} has zero mass and cannot be encoded")
    state._reserve(1)
    state.head, state._tlen = _pmf_push(
        np.uint64(state.head), state._tail, state._tlen,
        p, int(model.cumulatives[x]), model.r_bits,
    )
    state.head = int(state.head)
    return state


def decode_symbol(state: AnsState, model: QuantizedPmf):
    """Pop the most recently encoded symbol; exact inverse of encode_symbol."""
    t = state.head & (model.precision_r - 1)
    x = model.slot_to_symbol(t)
    state.head, state._tlen = _pmf_pop(
        np.uint64(state.head), state._tail, state._tlen,
        int(model.masses[x]), int(model.cumulatives[x]), model.r_bits,
    )
    state.head = int(state.head)
    return x, state


def encode_uniform(state: AnsState, j: int, bound: int) -> AnsState:
    """Push j under the implicit uniform model over [bound)."""
    if bound < 1:
        raise ValueError("bound must be >= 1")
    if not 0 <= j < bound:
        raise ValueError(f"index {j} out of range [0, {bound})")
    state._reserve(1)
    state.head, state._tlen = _uniform_push(
        np.uint64(state.head), state._tail, state._tlen,
        np.uint64(j), np.uint64(bound),
    )
    state.head = int(state.head)
    return state


def decode_uniform(state: AnsState, bound: int):
    """Pop an index in [bound), spending ~log2(bound) bits of the state.

    On a high-entropy state the result is an (almost exactly) uniform
    sample; re-encoding it with encode_uniform restores the state, which
    is what makes the pair usable for bits-back coding.
    """
    if bound < 1:
        raise ValueError("bound must be >= 1")
    j, head, tlen = _uniform_pop(
        np.uint64(state.head), state._tail, state._tlen, np.uint64(bound)
    )
    state.head = int(head)
    state._tlen = tlen
    return int(j), state


# ---------------------------------------------------------------------------
# serialization
#
# Layout (little-endian): 4-byte magic, 1-byte version, 8-byte bit length,
# minimal head bytes, then tail words bottom-of-stack first.  The bit
# length pins the head width: tail words are whole 32-bit words and a
# non-empty tail forces head >= 2**32, so head_bits is recoverable as the
# unique value in [33, 64] congruent to bit_length mod 32 (or bit_length
# itself when <= 64).
# ---------------------------------------------------------------------------

def flush(state: AnsState) -> bytes:
    nbits = state.bit_count
    head_bits = state.head.bit_length()
    out = bytearray()
    out += _MAGIC
    out.append(_VERSION)
    out += nbits.to_bytes(8, "little")
    out += state.head.to_bytes((head_bits + 7) // 8, "little")
    out += state.tail_words.astype("<u4").tobytes()
    return bytes(out)


def unflush(data: bytes) -> AnsState:
    if len(data) < _HEADER_LEN:
        raise TruncatedStreamError("stream shorter than the fixed header")
    if data[:4] != _MAGIC:
        raise DeserializationError("bad magic")
    if data[4] != _VERSION:
        raise DeserializationError(f"unsupported version {data[4]}")
    nbits = int.from_bytes(data[5:13], "little")
    if nbits <= 64:
        head_bits = nbits
    else:
        head_bits = 33 + (nbits - 33) % 32
    head_len = (head_bits + 7) // 8
    nwords, rem = divmod(nbits - head_bits, 32)
    body = len(data) - _HEADER_LEN
    if rem != 0 or body != head_len + 4 * nwords:
        raise DeserializationError("bit length inconsistent with payload size")
    head = int.from_bytes(data[_HEADER_LEN:_HEADER_LEN + head_len], "little")
    if head.bit_length() != head_bits:
        raise DeserializationError("head width disagrees with bit length")
    tail = np.frombuffer(
        data, dtype="<u4", count=nwords, offset=_HEADER_LEN + head_len
    ).astype(np.uint32)
    return AnsState(head, tail, nwords)
