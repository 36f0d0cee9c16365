"""Dynamic order statistics over a bounded integer universe.

A Fenwick tree holds one 0/1 counter per possible value, which gives
O(log U) insert, remove, rank and select without any balancing logic.
The bits-back codecs allocate one instance per worker thread and reuse
it across clusters, so the O(U) memory is paid once.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _fen_update(tree, i, delta):
    # tree is 1-based over universe size n = tree.size - 1
    i += 1
    n = tree.size - 1
    while i <= n:
        tree[i] += delta
        i += i & (-i)


@njit(cache=True)
def _fen_prefix(tree, i):
    # number of members with value < i
    s = 0
    while i > 0:
        s += tree[i]
        i -= i & (-i)
    return s


@njit(cache=True)
def _fen_select(tree, j, log2_n):
    # largest value v with prefix(v) <= j, i.e. the j-th smallest member
    pos = 0
    mask = 1 << log2_n
    while mask > 0:
        nxt = pos + mask
        if nxt <= tree.size - 1 and tree[nxt] <= j:
            j -= tree[nxt]
            pos = nxt
        mask >>= 1
    return pos


class OrderStatSet:
    """Set of distinct integers in [0, universe_size) with rank/select."""

    __slots__ = ("universe_size", "_tree", "_member", "size", "_log2")

    def __init__(self, universe_size: int):
        if universe_size < 1:
            raise ValueError("universe_size must be >= 1")
        self.universe_size = universe_size
        self._tree = np.zeros(universe_size + 1, dtype=np.int64)
        self._member = np.zeros(universe_size, dtype=np.uint8)
        self.size = 0
        self._log2 = max(0, (universe_size).bit_length() - 1)

    def _check_value(self, v: int) -> None:
        if not 0 <= v < self.universe_size:
            raise ValueError(f"value {v} outside universe [0, {self.universe_size})")

    def insert(self, v: int) -> "OrderStatSet":
        self._check_value(v)
        if self._member[v]:
            raise ValueError(f"duplicate insert of {v}: ids are unique")
        self._member[v] = 1
        _fen_update(self._tree, v, 1)
        self.size += 1
        return self

    def remove(self, v: int) -> "OrderStatSet":
        self._check_value(v)
        if not self._member[v]:
            raise ValueError(f"remove of absent value {v}")
        self._member[v] = 0
        _fen_update(self._tree, v, -1)
        self.size -= 1
        return self

    def rank(self, v: int) -> int:
        """Number of members strictly below v (v itself need not be a member)."""
        if not 0 <= v <= self.universe_size:
            raise ValueError(f"rank bound {v} outside [0, {self.universe_size}]")
        return int(_fen_prefix(self._tree, v))

    def select(self, j: int) -> int:
        """The j-th smallest member, 0-based."""
        if not 0 <= j < self.size:
            raise IndexError(f"select({j}) on a set of size {self.size}")
        return int(_fen_select(self._tree, j, self._log2))

    def clear(self) -> None:
        """Reset to empty; O(size) when sparse would require tracking, so O(U)."""
        self._tree[:] = 0
        self._member[:] = 0
        self.size = 0

    def __contains__(self, v: int) -> bool:
        return 0 <= v < self.universe_size and bool(self._member[v])

    def __len__(self) -> int:
        return self.size

    def to_sorted_array(self) -> np.ndarray:
        return np.flatnonzero(self._member).astype(np.int64)
