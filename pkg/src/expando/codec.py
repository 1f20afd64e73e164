"""Binary container shared by the index and the count-model files.

Layout (all integers little-endian)::

    magic      8 bytes   file-kind specific, e.g. b"EXPIDX\\x00\\x01"
    version    u32
    n_sections u32
    then n_sections times:
        tag      4 bytes ASCII
        length   u64       payload length in bytes
        crc32    u32       zlib.crc32 of the payload
        payload  length bytes

Integers inside payloads are unsigned LEB128 varints.
"""

from __future__ import annotations

import struct
import zlib
from typing import BinaryIO

import numpy as np

__all__ = [
    "ChecksumError",
    "FormatError",
    "TruncatedFileError",
    "VersionError",
    "ByteReader",
    "decode_varints",
    "encode_varints",
    "put_str",
    "put_varint",
    "read_container",
    "write_container",
]

_HEADER = struct.Struct("<8sII")
_SECTION = struct.Struct("<4sQI")


class FormatError(ValueError):
    """Base class for unreadable binary files."""


class VersionError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class ChecksumError(FormatError):
    pass


def encode_varints(values) -> bytes:
    """Encode a sequence of non-negative integers as concatenated varints."""
    v = np.asarray(values, dtype=np.uint64).ravel()
    if v.size == 0:
        return b""
    nbytes = np.ones(v.size, dtype=np.int64)
    rest = v >> np.uint64(7)
    while rest.any():
        nbytes += rest > 0
        rest >>= np.uint64(7)
    ends = np.cumsum(nbytes)
    starts = ends - nbytes
    out = np.zeros(int(ends[-1]), dtype=np.uint8)
    for j in range(int(nbytes.max())):
        sel = nbytes > j
        chunk = (v[sel] >> np.uint64(7 * j)) & np.uint64(0x7F)
        cont = (nbytes[sel] - 1 > j).astype(np.uint64) << np.uint64(7)
        out[starts[sel] + j] = (chunk | cont).astype(np.uint8)
    return out.tobytes()


def decode_varints(buf, count: int | None = None) -> np.ndarray:
    """Decode concatenated varints; ``count`` (if given) must match exactly."""
    b = np.frombuffer(bytes(buf), dtype=np.uint8)
    if b.size == 0:
        if count:
            raise TruncatedFileError("varint stream is empty")
        return np.zeros(0, dtype=np.int64)
    if b[-1] & 0x80:
        raise TruncatedFileError("varint stream ends mid-value")
    ends = np.flatnonzero((b & 0x80) == 0)
    if count is not None and ends.size != count:
        raise FormatError(f"expected {count} varints, found {ends.size}")
    starts = np.empty_like(ends)
    starts[0] = 0
    starts[1:] = ends[:-1] + 1
    if int((ends - starts).max()) > 9:
        raise FormatError("varint longer than 64 bits")
    owner = np.repeat(np.arange(ends.size), ends - starts + 1)
    shift = (np.arange(b.size) - starts[owner]) * 7
    parts = (b & 0x7F).astype(np.uint64) << shift.astype(np.uint64)
    vals = np.add.reduceat(parts, starts)
    return vals.astype(np.int64)


def put_varint(out: bytearray, value: int) -> None:
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


def put_str(out: bytearray, s: str) -> None:
    raw = s.encode("utf-8")
    put_varint(out, len(raw))
    out += raw


class ByteReader:
    """Cursor over a payload for scalar varints and strings."""

    def __init__(self, data: bytes, where: str = "payload") -> None:
        self.data = data
        self.pos = 0
        self.where = where

    def varint(self) -> int:
        result = 0
        shift = 0
        data = self.data
        while True:
            if self.pos >= len(data):
                raise TruncatedFileError(f"{self.where}: varint runs past end")
            byte = data[self.pos]
            self.pos += 1
            result |= (byte & 0x7F) << shift
            if not byte & 0x80:
                return result
            shift += 7

    def string(self) -> str:
        n = self.varint()
        end = self.pos + n
        if end > len(self.data):
            raise TruncatedFileError(f"{self.where}: string runs past end")
        s = self.data[self.pos:end].decode("utf-8")
        self.pos = end
        return s

    def f64(self) -> float:
        end = self.pos + 8
        if end > len(self.data):
            raise TruncatedFileError(f"{self.where}: float runs past end")
        (x,) = struct.unpack_from("<d", self.data, self.pos)
        self.pos = end
        return x

    def rest(self) -> bytes:
        out = self.data[self.pos:]
        self.pos = len(self.data)
        return out

    def done(self) -> bool:
        return self.pos == len(self.data)


def write_container(fh: BinaryIO, magic: bytes, version: int, sections: list[tuple[bytes, bytes]]) -> None:
    if len(magic) != 8:
        raise ValueError("magic must be 8 bytes")
    fh.write(_HEADER.pack(magic, version, len(sections)))
    for tag, payload in sections:
        if len(tag) != 4:
            raise ValueError("section tags are 4 bytes")
        payload = bytes(payload)
        fh.write(_SECTION.pack(tag, len(payload), zlib.crc32(payload)))
        fh.write(payload)


def read_container(data: bytes, magic: bytes, version: int) -> dict[bytes, bytes]:
    """Validate header and checksums; return ``{tag: payload}``."""
    if len(data) < _HEADER.size:
        raise TruncatedFileError(f"file is {len(data)} bytes, shorter than the header")
    got_magic, got_version, n_sections = _HEADER.unpack_from(data, 0)
    if got_magic != magic:
        raise VersionError(f"bad magic {got_magic!r}, expected {magic!r}")
    if got_version != version:
        raise VersionError(f"format version {got_version}, this build reads {version}")
    pos = _HEADER.size
    sections: dict[bytes, bytes] = {}
    for _ in range(n_sections):
        if pos + _SECTION.size > len(data):
            raise TruncatedFileError("section header runs past end of file")
        tag, length, crc = _SECTION.unpack_from(data, pos)
        pos += _SECTION.size
        if pos + length > len(data):
            raise TruncatedFileError(f"section {tag!r} runs past end of file")
        payload = data[pos:pos + length]
        pos += length
        if zlib.crc32(payload) != crc:
            raise ChecksumError(f"checksum mismatch in section {tag.decode('ascii', 'replace')}")
        sections[tag] = payload
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes after last section")
    return sections
