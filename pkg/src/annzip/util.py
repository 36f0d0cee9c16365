"""Small shared helpers: varints and fixed-width bit packing."""

from __future__ import annotations

import numpy as np

from .errors import TruncatedStreamError


def write_varint(out: bytearray, value: int) -> None:
    if value < 0:
        raise ValueError("varints are unsigned")
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def read_varint(data, offset: int):
    """Returns (value, next_offset)."""
    value = 0
    shift = 0
    while True:
        if offset >= len(data):
            raise TruncatedStreamError("varint runs past the end of the buffer")
        byte = data[offset]
        offset += 1
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value, offset
        shift += 7
        if shift > 63:
            raise TruncatedStreamError("varint longer than 64 bits")


def pack_fixed_width(values: np.ndarray, width: int) -> bytes:
    """Concatenate ``width``-bit big-endian fields and pad to a whole byte."""
    if width == 0:
        return b""
    values = np.asarray(values, dtype=np.uint64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    bits = ((values[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits.ravel()).tobytes()


def unpack_fixed_width(data: bytes, count: int, width: int) -> np.ndarray:
    if width == 0:
        return np.zeros(count, dtype=np.int64)
    need = count * width
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=need)
    fields = bits.reshape(count, width).astype(np.int64)
    weights = (1 << np.arange(width - 1, -1, -1)).astype(np.int64)
    return fields @ weights
