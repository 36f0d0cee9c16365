"""On-disk container shared by the IVF and graph indexes.

Little-endian layout: 4-byte magic "IVQZ", 1-byte version, 4-byte section
count, then a section table of (1-byte kind, 8-byte offset, 8-byte
length) entries followed by the section payloads.  Section kinds are
defined by the index modules; unknown kinds are preserved by readers.
"""

from __future__ import annotations

import struct

from .errors import DeserializationError, TruncatedStreamError

MAGIC = b"IVQZ"
VERSION = 1

SEC_METADATA = 1
SEC_CENTROIDS = 2
SEC_ID_BLOCKS = 3
SEC_WAVELET = 4
SEC_CODES = 5
SEC_CODEBOOK = 6
SEC_SIZES = 7
SEC_VECTORS = 8
SEC_FRIEND_BLOCKS = 9


def write_container(path: str, sections: dict) -> None:
    items = sorted(sections.items())
    header_len = 4 + 1 + 4 + 17 * len(items)
    offset = header_len
    table = bytearray()
    for kind, blob in items:
        table += struct.pack("<BQQ", kind, offset, len(blob))
        offset += len(blob)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(bytes([VERSION]))
        f.write(struct.pack("<I", len(items)))
        f.write(table)
        for _, blob in items:
            f.write(blob)


def read_container(path: str) -> dict:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 9:
        raise TruncatedStreamError("container shorter than its fixed header")
    if data[:4] != MAGIC:
        raise DeserializationError("bad container magic")
    if data[4] != VERSION:
        raise DeserializationError(f"unsupported container version {data[4]}")
    (count,) = struct.unpack_from("<I", data, 5)
    sections = {}
    pos = 9
    for _ in range(count):
        if pos + 17 > len(data):
            raise TruncatedStreamError("section table truncated")
        kind, offset, length = struct.unpack_from("<BQQ", data, pos)
        pos += 17
        if offset + length > len(data):
            raise TruncatedStreamError(f"section {kind} runs past the end")
        sections[kind] = data[offset:offset + length]
    return sections
