"""Static wavelet tree over the cluster-assignment sequence.

The tree indexes a sequence S in [0, K)^N and answers access, rank and
select in O(log K) bitvector operations.  Levels are stored pointerless:
one concatenated bitvector per level, with node boundaries recomputed
from the symbol counts.  Two bitvector representations are supported:

* FLAT: plain bits plus a two-level rank directory (512-bit blocks inside
  32768-bit superblocks), ~3.3% overhead.
* COMPRESSED: RRR-style blocks of 63 bits stored as a 6-bit popcount
  class plus a ceil(log2 C(63, class))-bit offset (the combinadic rank of
  the block among blocks of its class), with rank/offset samples every 32
  blocks.

select on the id-assignment sequence is what resolves a (cluster, offset)
candidate back to a vector id after a deferred-resolution search.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .errors import DeserializationError

FLAT = "flat"
COMPRESSED = "compressed"

_RRR_B = 63                 # RRR block length in bits
_RRR_SAMPLE = 32            # blocks per rank/offset sample
_FLAT_BLOCK = 512           # bits per rank block
_FLAT_SUPER = 32768         # bits per superblock (64 blocks, fits uint16 rel)


def _binomials(nmax: int = _RRR_B + 1) -> np.ndarray:
    c = np.zeros((nmax, nmax), dtype=np.uint64)
    for i in range(nmax):
        c[i, 0] = 1
        for j in range(1, i + 1):
            c[i, j] = c[i - 1, j - 1] + c[i - 1, j]
    return c


_BINOM = _binomials()
_RRR_WIDTH = np.array(
    [int(_BINOM[_RRR_B, c]- 1).bit_length() for c in range(_RRR_B + 1)],
    dtype=np.int64,
)


@njit(cache=True)
def _popcount(v):
    v = np.uint64(v)
    v = v - ((v >> np.uint64(1)) & np.uint64(0x5555555555555555))
    v = (v & np.uint64(0x3333333333333333)) + (
        (v >> np.uint64(2)) & np.uint64(0x3333333333333333)
    )
    v = (v + (v >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return np.int64((v * np.uint64(0x0101010101010101)) >> np.uint64(56))


@njit(cache=True)
def _word_select(word, j):
    # position of the j-th (0-based) set bit of a uint64
    w = np.uint64(word)
    for pos in range(64):
        if (w >> np.uint64(pos)) & np.uint64(1):
            if j == 0:
                return pos
            j -= 1
    return -1


@njit(cache=True)
def _pack_bits(bits):
    nw = (bits.size + 63) // 64
    words = np.zeros(nw, dtype=np.uint64)
    for i in range(bits.size):
        if bits[i]:
            words[i >> 6] |= np.uint64(1) << np.uint64(i & 63)
    return words


# -- flat directories --------------------------------------------------------

@njit(cache=True)
def _flat_build_dirs(words, n, sb_rank, blk_rank):
    nblk = (n + _FLAT_BLOCK - 1) // _FLAT_BLOCK
    total = 0
    sb_base = 0
    for b in range(nblk):
        if b % (_FLAT_SUPER // _FLAT_BLOCK) == 0:
            sb_rank[b // (_FLAT_SUPER // _FLAT_BLOCK)] = total
            sb_base = total
        blk_rank[b] = total - sb_base
        w0 = b * (_FLAT_BLOCK // 64)
        w1 = min(w0 + _FLAT_BLOCK // 64, words.size)
        for w in range(w0, w1):
            total += _popcount(words[w])
    sb_rank[sb_rank.size - 1] = total
    return total


@njit(cache=True)
def _flat_rank1(words, sb_rank, blk_rank, i):
    b = i // _FLAT_BLOCK
    r = sb_rank[i // _FLAT_SUPER] + blk_rank[b]
    w0 = b * (_FLAT_BLOCK // 64)
    wi = i >> 6
    for w in range(w0, wi):
        r += _popcount(words[w])
    rem = i & 63
    if rem:
        r += _popcount(words[wi] & ((np.uint64(1) << np.uint64(rem)) - np.uint64(1)))
    return r


@njit(cache=True)
def _flat_select(words, sb_rank, blk_rank, n, o, ones):
    # position of the o-th set bit when ones=1, o-th zero bit when ones=0
    blocks_per_sb = _FLAT_SUPER // _FLAT_BLOCK
    nblk = (n + _FLAT_BLOCK - 1) // _FLAT_BLOCK
    lo, hi = 0, sb_rank.size - 1
    while lo < hi:  # last superblock s with count-before <= o
        mid = (lo + hi + 1) // 2
        cnt = sb_rank[mid] if ones else mid * _FLAT_SUPER - sb_rank[mid]
        if cnt <= o:
            lo = mid
        else:
            hi = mid - 1
    sb = lo
    rel = o - (sb_rank[sb] if ones else sb * _FLAT_SUPER - sb_rank[sb])
    b = sb * blocks_per_sb
    b_hi = min(b + blocks_per_sb, nblk)
    while b + 1 < b_hi:
        cnt = blk_rank[b + 1] if ones else (b + 1 - sb * blocks_per_sb) * _FLAT_BLOCK - blk_rank[b + 1]
        if cnt <= rel:
            b += 1
        else:
            b_hi = b + 1
    rel -= blk_rank[b] if ones else (b - sb * blocks_per_sb) * _FLAT_BLOCK - blk_rank[b]
    w = b * (_FLAT_BLOCK // 64)
    while True:
        word = words[w] if ones else ~words[w]
        c = _popcount(word)
        if c <= rel:
            rel -= c
            w += 1
        else:
            return w * 64 + _word_select(word, rel)


# -- RRR blocks ---------------------------------------------------------------

@njit(cache=True)
def _rrr_rank_of_block(word, cls, binom):
    # combinadic rank of a 63-bit block among those with ``cls`` set bits
    off = np.uint64(0)
    j = 1
    for p in range(_RRR_B):
        if (word >> np.uint64(p)) & np.uint64(1):
            off += binom[p, j]
            j += 1
    return off


@njit(cache=True)
def _rrr_unrank_block(off, cls, binom):
    word = np.uint64(0)
    j = cls
    p = _RRR_B - 1
    rem = off
    while j > 0:
        while binom[p, j] > rem:
            p -= 1
        word |= np.uint64(1) << np.uint64(p)
        rem -= binom[p, j]
        j -= 1
        p -= 1
    return word


@njit(cache=True)
def _get_bits(stream, pos, width):
    # read ``width`` (< 64) bits starting at absolute bit position ``pos``
    if width == 0:
        return np.uint64(0)
    w = pos >> 6
    r = np.uint64(pos & 63)
    out = stream[w] >> r
    if int(r) + width > 64:
        out |= stream[w + 1] << (np.uint64(64) - r)
    if width < 64:
        out &= (np.uint64(1) << np.uint64(width)) - np.uint64(1)
    return out


@njit(cache=True)
def _set_bits(stream, pos, width, value):
    if width == 0:
        return
    w = pos >> 6
    r = np.uint64(pos & 63)
    stream[w] |= value << r
    if int(r) + width > 64:
        stream[w + 1] |= value >> (np.uint64(64) - r)


@njit(cache=True)
def _rrr_expand(classes, offsets, widths, binom, n, bits):
    pos = 0
    for b in range(classes.size):
        cls = classes[b]
        word = _rrr_unrank_block(_get_bits(offsets, pos, widths[cls]), cls, binom)
        pos += widths[cls]
        blen = min(_RRR_B, n - b * _RRR_B)
        for k in range(blen):
            bits[b * _RRR_B + k] = (word >> np.uint64(k)) & np.uint64(1)
    return pos


@njit(cache=True)
def _rrr_build(words, n, binom, widths, classes, offsets, samples_rank, samples_pos):
    nblk = (n + _RRR_B - 1) // _RRR_B
    bitpos = 0
    rank = 0
    for b in range(nblk):
        if b % _RRR_SAMPLE == 0:
            samples_rank[b // _RRR_SAMPLE] = rank
            samples_pos[b // _RRR_SAMPLE] = bitpos
        blen = min(_RRR_B, n - b * _RRR_B)
        word = np.uint64(0)
        for k in range(blen):
            i = b * _RRR_B + k
            if (words[i >> 6] >> np.uint64(i & 63)) & np.uint64(1):
                word |= np.uint64(1) << np.uint64(k)
        cls = _popcount(word)
        classes[b] = cls
        _set_bits(offsets, bitpos, widths[cls], _rrr_rank_of_block(word, cls, binom))
        bitpos += widths[cls]
        rank += cls
    samples_rank[samples_rank.size - 1] = rank
    samples_pos[samples_pos.size - 1] = bitpos
    return bitpos, rank


@njit(cache=True)
def _rrr_rank1(classes, offsets, samples_rank, samples_pos, widths, binom, n, i):
    b = i // _RRR_B
    s = b // _RRR_SAMPLE
    rank = samples_rank[s]
    bitpos = samples_pos[s]
    for bb in range(s * _RRR_SAMPLE, b):
        rank += classes[bb]
        bitpos += widths[classes[bb]]
    rem = i - b * _RRR_B
    if rem:
        cls = classes[b]
        word = _rrr_unrank_block(_get_bits(offsets, bitpos, widths[cls]), cls, binom)
        rank += _popcount(word & ((np.uint64(1) << np.uint64(rem)) - np.uint64(1)))
    return rank


@njit(cache=True)
def _rrr_select(classes, offsets, samples_rank, samples_pos, widths, binom, n, o, ones):
    nblk = classes.size
    lo, hi = 0, samples_rank.size - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        cnt = samples_rank[mid] if ones else min(mid * _RRR_SAMPLE * _RRR_B, n) - samples_rank[mid]
        if cnt <= o:
            lo = mid
        else:
            hi = mid - 1
    b = lo * _RRR_SAMPLE
    rel = o - (samples_rank[lo] if ones else min(b * _RRR_B, n) - samples_rank[lo])
    bitpos = samples_pos[lo]
    while b < nblk:
        blen = min(_RRR_B, n - b * _RRR_B)
        cnt = classes[b] if ones else blen - classes[b]
        if cnt <= rel:
            rel -= cnt
            bitpos += widths[classes[b]]
            b += 1
        else:
            break
    cls = classes[b]
    word = _rrr_unrank_block(_get_bits(offsets, bitpos, widths[cls]), cls, binom)
    if not ones:
        word = ~word
    return b * _RRR_B + _word_select(word, rel)


class RsBitvector:
    """Immutable bitvector with rank1/select1/select0."""

    def __init__(self, bits, mode: str = FLAT, _from_words=None, _n=None):
        self.mode = mode
        if _from_words is not None:
            words, n = _from_words, _n
        else:
            bits = np.ascontiguousarray(bits, dtype=np.uint8)
            n = bits.size
            words = _pack_bits(bits)
        self.n = int(n)
        if mode == FLAT:
            self._words = words
            nblk = max(1, (self.n + _FLAT_BLOCK - 1) // _FLAT_BLOCK)
            nsb = (nblk * _FLAT_BLOCK + _FLAT_SUPER - 1) // _FLAT_SUPER
            self._sb = np.zeros(nsb + 1, dtype=np.int64)
            self._blk = np.zeros(nblk, dtype=np.uint16)
            self.ones = int(_flat_build_dirs(words, self.n, self._sb, self._blk))
        elif mode == COMPRESSED:
            nblk = max(1, (self.n + _RRR_B - 1) // _RRR_B)
            self._classes = np.zeros(nblk, dtype=np.uint8)
            offsets = np.zeros(nblk + 2, dtype=np.uint64)  # 60 bits/block max
            nsmp = (nblk + _RRR_SAMPLE - 1) // _RRR_SAMPLE
            self._smp_rank = np.zeros(nsmp + 1, dtype=np.int64)
            self._smp_pos = np.zeros(nsmp + 1, dtype=np.int64)
            bitpos, rank = _rrr_build(
                words, self.n, _BINOM, _RRR_WIDTH, self._classes, offsets,
                self._smp_rank, self._smp_pos,
            )
            self._offsets = offsets[: (int(bitpos) + 63) // 64 + 1].copy()
            self._offset_bits = int(bitpos)
            self.ones = int(rank)
        else:
            raise ValueError(f"unknown mode {mode!r}")

    @property
    def zeros(self) -> int:
        return self.n - self.ones

    def rank1(self, i: int) -> int:
        """Number of set bits in [0, i)."""
        if not 0 <= i <= self.n:
            raise IndexError(f"rank1({i}) outside [0, {self.n}]")
        if i == 0:
            return 0
        if self.mode == FLAT:
            return int(_flat_rank1(self._words, self._sb, self._blk, i))
        return int(_rrr_rank1(self._classes, self._offsets, self._smp_rank,
                              self._smp_pos, _RRR_WIDTH, _BINOM, self.n, i))

    def rank0(self, i: int) -> int:
        return i - self.rank1(i)

    def select1(self, o: int) -> int:
        """Position of the o-th (0-based) set bit."""
        if not 0 <= o < self.ones:
            raise IndexError(f"select1({o}) with only {self.ones} ones")
        if self.mode == FLAT:
            return int(_flat_select(self._words, self._sb, self._blk, self.n, o, 1))
        return int(_rrr_select(self._classes, self._offsets, self._smp_rank,
                               self._smp_pos, _RRR_WIDTH, _BINOM, self.n, o, 1))

    def select0(self, o: int) -> int:
        if not 0 <= o < self.zeros:
            raise IndexError(f"select0({o}) with only {self.zeros} zeros")
        if self.mode == FLAT:
            return int(_flat_select(self._words, self._sb, self._blk, self.n, o, 0))
        return int(_rrr_select(self._classes, self._offsets, self._smp_rank,
                               self._smp_pos, _RRR_WIDTH, _BINOM, self.n, o, 0))

    def get(self, i: int) -> int:
        return self.rank1(i + 1) - self.rank1(i)

    def payload_bits(self) -> int:
        """Content bits without directories."""
        if self.mode == FLAT:
            return self.n
        return 6 * self._classes.size + self._offset_bits

    def total_bits(self) -> int:
        """Content plus directory bits, as held in memory."""
        if self.mode == FLAT:
            return self.n + 64 * self._sb.size + 16 * self._blk.size
        return (6 * self._classes.size + self._offset_bits
                + 128 * self._smp_rank.size)

    # serialization: mode-specific blob, directories rebuilt on load
    def to_bytes(self) -> bytes:
        out = bytearray()
        out.append(0 if self.mode == FLAT else 1)
        out += self.n.to_bytes(8, "little")
        if self.mode == FLAT:
            out += self._words.astype("<u8").tobytes()
        else:
            out += self._classes.tobytes()
            out += self._offset_bits.to_bytes(8, "little")
            out += self._offsets.astype("<u8").tobytes()
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "RsBitvector":
        mode = FLAT if data[0] == 0 else COMPRESSED
        n = int.from_bytes(data[1:9], "little")
        if mode == FLAT:
            words = np.frombuffer(data, dtype="<u8", offset=9).astype(np.uint64)
            if words.size != (n + 63) // 64:
                raise DeserializationError("flat bitvector length mismatch")
            return cls(None, FLAT, _from_words=words, _n=n)
        # re-expand the RRR payload to raw bits, then rebuild
        nblk = max(1, (n + _RRR_B - 1) // _RRR_B)
        classes = np.frombuffer(data, dtype=np.uint8, count=nblk, offset=9)
        p = 9 + nblk
        offset_bits = int.from_bytes(data[p:p + 8], "little")
        offsets = np.frombuffer(data, dtype="<u8", offset=p + 8).astype(np.uint64)
        bits = np.zeros(n, dtype=np.uint8)
        pos = int(_rrr_expand(classes, offsets, _RRR_WIDTH, _BINOM, n, bits))
        if pos != offset_bits:
            raise DeserializationError("RRR offset stream length mismatch")
        return cls(bits, COMPRESSED)


class WaveletTree:
    """Balanced wavelet tree with pointerless, per-level bitvectors."""

    def __init__(self, levels, counts, K, N, mode):
        self.levels = levels
        self.K = K
        self.N = N
        self.mode = mode
        self.depth = len(levels)
        self._cum = np.zeros((1 << self.depth) + 1, dtype=np.int64)
        np.cumsum(counts, out=self._cum[1:])

    def _seg(self, prefix: int, level: int):
        shift = self.depth - level
        return (int(self._cum[prefix << shift]),
                int(self._cum[(prefix + 1) << shift]))

    def access(self, i: int) -> int:
        if not 0 <= i < self.N:
            raise IndexError(f"access({i}) outside [0, {self.N})")
        prefix, pos = 0, i
        for lvl in range(self.depth):
            bv = self.levels[lvl]
            start, _ = self._seg(prefix, lvl)
            bit = bv.get(start + pos)
            before = bv.rank1(start + pos) - bv.rank1(start)
            pos = before if bit else (pos - before)
            prefix = (prefix << 1) | bit
        return prefix

    def rank(self, k: int, i: int) -> int:
        """Occurrences of symbol k in S[0, i)."""
        if not 0 <= k < self.K:
            raise ValueError(f"symbol {k} outside [0, {self.K})")
        if not 0 <= i <= self.N:
            raise IndexError(f"rank bound {i} outside [0, {self.N}]")
        pos, prefix = i, 0
        for lvl in range(self.depth):
            bv = self.levels[lvl]
            start, _ = self._seg(prefix, lvl)
            bit = (k >> (self.depth - 1 - lvl)) & 1
            ones = bv.rank1(start + pos) - bv.rank1(start)
            pos = ones if bit else (pos - ones)
            prefix = (prefix << 1) | bit
        return pos

    def count(self, k: int) -> int:
        return int(self._cum[k + 1] - self._cum[k])

    def select(self, k: int, occ: int) -> int:
        """Index in S of the occ-th (0-based) occurrence of symbol k.

        Walks bottom-up with one select per level, mapping the local
        offset in the leaf back to a global position.
        """
        if not 0 <= k < self.K:
            raise ValueError(f"symbol {k} outside [0, {self.K})")
        if not 0 <= occ < self.count(k):
            raise IndexError(f"select({k}, {occ}) beyond count {self.count(k)}")
        pos = occ
        for lvl in range(self.depth - 1, -1, -1):
            bv = self.levels[lvl]
            prefix = k >> (self.depth - lvl)
            bit = (k >> (self.depth - 1 - lvl)) & 1
            start, _ = self._seg(prefix, lvl)
            if bit:
                g = bv.select1(bv.rank1(start) + pos)
            else:
                g = bv.select0(bv.rank0(start) + pos)
            pos = g - start
        return pos

    def payload_bits(self) -> int:
        return sum(bv.payload_bits() for bv in self.levels)

    def total_bits(self) -> int:
        return sum(bv.total_bits() for bv in self.levels)

    def bits_per_id(self) -> float:
        return self.total_bits() / self.N if self.N else 0.0

    def to_bytes(self) -> bytes:
        out = bytearray()
        out += self.K.to_bytes(8, "little")
        out += self.N.to_bytes(8, "little")
        out.append(0 if self.mode == FLAT else 1)
        # full-symbol counts at padded resolution; node boundaries derive from them
        out += np.asarray(
            [self._cum[i + 1] - self._cum[i] for i in range(1 << self.depth)],
            dtype="<i8",
        ).tobytes()
        for bv in self.levels:
            blob = bv.to_bytes()
            out += len(blob).to_bytes(8, "little")
            out += blob
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "WaveletTree":
        K = int.from_bytes(data[0:8], "little")
        N = int.from_bytes(data[8:16], "little")
        mode = FLAT if data[16] == 0 else COMPRESSED
        depth = max(int(np.ceil(np.log2(K))), 0) if K > 1 else 0
        kpad = 1 << depth
        counts = np.frombuffer(data, dtype="<i8", count=kpad, offset=17)
        p = 17 + 8 * kpad
        levels = []
        for _ in range(depth):
            ln = int.from_bytes(data[p:p + 8], "little")
            p += 8
            levels.append(RsBitvector.from_bytes(data[p:p + ln]))
            p += ln
        # rebuilt bitvectors default to FLAT; re-compress if needed
        if mode == COMPRESSED:
            levels = [
                bv if bv.mode == COMPRESSED else _recompress(bv)
                for bv in levels
            ]
        return cls(levels, counts.astype(np.int64), K, N, mode)


def _recompress(bv: RsBitvector) -> RsBitvector:
    bits = np.unpackbits(bv._words.view(np.uint8), bitorder="little", count=bv.n)
    return RsBitvector(bits, COMPRESSED)


def wt_build(S, K: int, mode: str = FLAT) -> WaveletTree:
    """Build the tree over a symbol sequence with alphabet [0, K)."""
    S = np.ascontiguousarray(S, dtype=np.int64)
    if S.size and (S.min() < 0 or S.max() >= K):
        raise ValueError(f"symbols must lie in [0, {K})")
    if K < 1:
        raise ValueError("K must be >= 1")
    depth = max(int(np.ceil(np.log2(K))), 0) if K > 1 else 0
    counts = np.bincount(S, minlength=1 << depth).astype(np.int64)
    levels = []
    for lvl in range(depth):
        # level sequence: S stably grouped by the top ``lvl`` symbol bits
        order = np.argsort(S >> (depth - lvl), kind="stable") if lvl else np.arange(S.size)
        bits = ((S[order] >> (depth - 1 - lvl)) & 1).astype(np.uint8)
        levels.append(RsBitvector(bits, mode))
    return WaveletTree(levels, counts, K, S.size, mode)
