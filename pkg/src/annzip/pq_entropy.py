"""Cluster-conditioned lossless coding of quantization-code columns.

Each column of a cluster's code matrix is coded under an adaptive
occurrence-count model: position i assigns symbol x the probability
(1 + count of x among positions < i) / (M + i), i.e. uniform 1/M at the
first position.  Codes from one cluster are much more concentrated than
the global code distribution, which is where the compression comes from;
without conditioning the columns are nearly incompressible.

The coder is the stack-ordered ANS core, so encoding runs in two passes:
a forward pass records the quantized (mass, cumulative) pair of every
position's symbol, then a backward pass pushes them in reverse.  The
decoder replays the model forward, re-deriving the same quantized tables
from its own running counts.  Models are quantized to precision 2**16
with every mass >= 1, so any symbol stays decodable; that caps column
length at 65280 elements per block.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from . import ans
from .ans import RANS_L, _pmf_pop, _pmf_push
from .errors import CorruptionError

_R_BITS = 16
_R = 1 << _R_BITS
MAX_COLUMN = _R - 256  # total raw mass M + i must stay <= 2**16


@njit(cache=True)
def _quantized_pc(counts, M, i, x):
    """(mass, cumulative) of symbol x at position i, and the leftover rule.

    Raw weights are 1 + counts; floors are scaled to sum <= 2**16 and the
    residue is handed to the lowest-indexed symbols, one unit each.
    """
    total = M + i
    flo_sum = 0
    c_x = 0
    f_x = 0
    for y in range(M):
        f = ((1 + counts[y]) << _R_BITS) // total
        if y < x:
            c_x += f
        elif y == x:
            f_x = f
        flo_sum += f
    d = _R - flo_sum
    if x < d:
        c_x += x
        f_x += 1
    else:
        c_x += d
    return f_x, c_x


@njit(cache=True)
def _column_encode_kernel(column, M, tail):
    n = column.size
    counts = np.zeros(M, dtype=np.int64)
    ps = np.empty(n, dtype=np.int64)
    cs = np.empty(n, dtype=np.int64)
    for i in range(n):
        p, c = _quantized_pc(counts, M, i, column[i])
        ps[i] = p
        cs[i] = c
        counts[column[i]] += 1
    head = np.uint64(RANS_L)
    tlen = 0
    for i in range(n - 1, -1, -1):
        head, tlen = _pmf_push(head, tail, tlen, np.uint64(ps[i]), np.uint64(cs[i]),
                               _R_BITS)
    return head, tlen


@njit(cache=True)
def _column_decode_kernel(head, tail, tlen, n, M, out):
    counts = np.zeros(M, dtype=np.int64)
    for i in range(n):
        total = M + i
        flo_sum = 0
        for y in range(M):
            flo_sum += ((1 + counts[y]) << _R_BITS) // total
        d = _R - flo_sum
        t = np.int64(head & np.uint64(_R - 1))
        cum = 0
        x = -1
        p = 0
        for y in range(M):
            m = ((1 + counts[y]) << _R_BITS) // total
            if y < d:
                m += 1
            if t < cum + m:
                x = y
                p = m
                break
            cum += m
        head, tlen = _pmf_pop(head, tail, tlen, np.uint64(p), np.uint64(cum), _R_BITS)
        counts[x] += 1
        out[i] = x
    if head != np.uint64(RANS_L) or tlen != 0:
        return 2
    return 0


def code_column_encode(column, M: int = 256) -> bytes:
    """Entropy-code one column of code entries in [0, M)."""
    col = np.ascontiguousarray(column, dtype=np.int64)
    if col.size == 0:
        return b""
    if col.min() < 0 or col.max() >= M:
        raise ValueError(f"code entries must lie in [0, {M})")
    if col.size > MAX_COLUMN:
        raise ValueError(f"column longer than {MAX_COLUMN}; split into blocks")
    tail = np.zeros(col.size + 8, dtype=np.uint32)
    head, tlen = _column_encode_kernel(col, M, tail)
    return ans.flush(ans.AnsState(int(head), tail, tlen))


def code_column_decode(blob: bytes, n: int, M: int = 256) -> np.ndarray:
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    state = ans.unflush(blob)
    tail = np.zeros(state._tlen + n + 8, dtype=np.uint32)
    tail[: state._tlen] = state.tail_words
    out = np.empty(n, dtype=np.int64)
    status = _column_decode_kernel(np.uint64(state.head), tail, state._tlen, n, M, out)
    if status != 0:
        raise CorruptionError(
            "column stream did not return to the initial state (wrong n or corrupt data)"
        )
    return out


def stream_bits(blob: bytes) -> int:
    """Content bits added by a column block beyond the initial state."""
    if not blob:
        return 0
    return ans.bit_count(ans.unflush(blob)) - ans.bit_count(ans.state_init(0))


def cluster_codes_encode(codes, M: int = 256) -> list:
    """Encode an (n, m) cluster code matrix column by column."""
    C = np.atleast_2d(np.asarray(codes))
    return [code_column_encode(C[:, j], M) for j in range(C.shape[1])]


def cluster_codes_decode(blobs, n: int, M: int = 256) -> np.ndarray:
    cols = [code_column_decode(b, n, M) for b in blobs]
    return np.column_stack(cols) if cols else np.zeros((n, 0), dtype=np.int64)


def cluster_bits_per_element(blobs, n: int) -> float:
    if n == 0 or not blobs:
        return 0.0
    return sum(stream_bits(b) for b in blobs) / (n * len(blobs))


def model_cross_entropy_bits(column, M: int = 256) -> float:
    """Direct summation of -log2 Pr(x_i | x_<i) under the unquantized model."""
    counts = np.zeros(M, dtype=np.int64)
    total = 0.0
    for i, x in enumerate(np.asarray(column, dtype=np.int64)):
        total += -np.log2((1 + counts[x]) / (M + i))
        counts[x] += 1
    return float(total)
