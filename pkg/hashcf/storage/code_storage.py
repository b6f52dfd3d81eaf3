"""
Binary hash code files.

Layout, all little-endian:

    magic    4 bytes  b"BHCF"
    version  u8       1
    m        u16      bit length
    count    u64      number of codes
    flags    u8       bit 0 set when the codes are stored negated
    words    count * ceil(m/64) u64, row-major

Bit j of a code (bit 0 first) encodes +1 when set and -1 when clear.
"""
import logging
import struct
from typing import Tuple

import numpy as np

from hashcf.core.bitcode import CodeMatrix, NegatedItemStore, n_words
from hashcf.core.errors import ParseError

logger = logging.getLogger(__name__)

MAGIC = b"BHCF"
VERSION = 1
FLAG_NEGATED = 0x01
_HEADER = struct.Struct("<4sBHQB")


def encode_codes(codes: CodeMatrix, negated: bool = False) -> bytes:
    header = _HEADER.pack(MAGIC, VERSION, codes.m, len(codes), FLAG_NEGATED if negated else 0)
    return header + codes.words.astype("<u8").tobytes()


def decode_codes(data: bytes) -> Tuple[CodeMatrix, bool]:
    if len(data) < _HEADER.size:
        raise ParseError("truncated code file header")
    magic, version, m, count, flags = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ParseError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ParseError(f"unsupported code file version {version}")
    width = n_words(m)
    expected = _HEADER.size + count * width * 8
    if len(data) != expected:
        raise ParseError(f"code file holds {len(data)} bytes, header implies {expected}")
    words = np.frombuffer(data, dtype="<u8", offset=_HEADER.size).astype(np.uint64).reshape(count, width)
    return CodeMatrix(words, m), bool(flags & FLAG_NEGATED)


def write_codes(path: str, codes, negated: bool = None):
    """
    Write codes to a BHCF file.

    Args:
        path (str): Destination file.
        codes: A CodeMatrix, or a NegatedItemStore (written with the negated flag).
        negated (bool): Flag override for a plain CodeMatrix.
    """
    if isinstance(codes, NegatedItemStore):
        matrix, negated = codes.codes, True
    else:
        matrix, negated = codes, bool(negated)
    with open(path, "wb") as handle:
        handle.write(encode_codes(matrix, negated))
    logger.info("Wrote %d %d-bit codes to %s%s", len(matrix), matrix.m, path, " (negated)" if negated else "")


def read_codes(path: str):
    """Read a BHCF file; negated files come back as a NegatedItemStore."""
    with open(path, "rb") as handle:
        matrix, negated = decode_codes(handle.read())
    return NegatedItemStore(matrix) if negated else matrix
