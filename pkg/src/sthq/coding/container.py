"""The STHQ bitstream container.

Layout (little-endian)::

    magic "STHQ" | version u8 = 1 | coder-id u8 (0 arith, 1 huffman)
    L u16 | dim u16 | m u64
    centers: L*dim f32, center after center
    counts: L u32 (raw symbol histogram; the coder table is derived from it)
    payload bit length u64 | payload bytes, zero-padded to a byte boundary
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import arithmetic, huffman
from .arithmetic import DecodeError
from .freq import freq_table

MAGIC = b"STHQ"
VERSION = 1
CODERS = {"arith": 0, "huffman": 1}
_CODER_NAMES = {v: k for k, v in CODERS.items()}
_BACKENDS = {"arith": arithmetic, "huffman": huffman}
_HEAD = struct.Struct("<4sBBHHQ")


@dataclass
class Bitstream:
    coder: str
    L: int
    m: int
    counts: np.ndarray
    payload: bytes
    payload_bits: int
    centers: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=np.float32))

    @property
    def dim(self) -> int:
        return self.centers.shape[1] if self.centers.size else 0

    @property
    def header_bits(self) -> int:
        return 8 * (_HEAD.size + 4 * self.L * self.dim + 4 * self.L + 8)

    @property
    def total_bits(self) -> int:
        return self.header_bits + 8 * len(self.payload)

    def table(self) -> np.ndarray:
        return freq_table(self.counts)

    def to_bytes(self) -> bytes:
        centers = np.asarray(self.centers, dtype="<f4").reshape(-1)
        parts = [
            _HEAD.pack(MAGIC, VERSION, CODERS[self.coder], self.L, self.dim, self.m),
            centers.tobytes(),
            np.asarray(self.counts, dtype="<u4").tobytes(),
            struct.pack("<Q", self.payload_bits),
            self.payload,
        ]
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, blob: bytes, offset: int = 0) -> tuple["Bitstream", int]:
        """Parse one container starting at ``offset``; returns it and the end offset."""
        if len(blob) - offset < _HEAD.size:
            raise DecodeError("truncated container header")
        magic, version, coder_id, L, dim, m = _HEAD.unpack_from(blob, offset)
        if magic != MAGIC:
            raise DecodeError(f"bad magic {magic!r}")
        if version != VERSION:
            raise DecodeError(f"unsupported container version {version}")
        if coder_id not in _CODER_NAMES:
            raise DecodeError(f"unknown coder id {coder_id}")
        if L < 1:
            raise DecodeError("alphabet size must be >= 1")
        pos = offset + _HEAD.size
        need = 4 * L * dim + 4 * L + 8
        if len(blob) - pos < need:
            raise DecodeError("truncated container tables")
        centers = np.frombuffer(blob, dtype="<f4", count=L * dim, offset=pos).reshape(L, dim)
        pos += 4 * L * dim
        counts = np.frombuffer(blob, dtype="<u4", count=L, offset=pos).astype(np.int64)
        pos += 4 * L
        (nbits,) = struct.unpack_from("<Q", blob, pos)
        pos += 8
        nbytes = (nbits + 7) // 8
        if len(blob) - pos < nbytes:
            raise DecodeError(f"truncated payload: need {nbytes} bytes, have {len(blob) - pos}")
        payload = bytes(blob[pos : pos + nbytes])
        stream = cls(_CODER_NAMES[coder_id], L, m, counts, payload, nbits,
                     centers.astype(np.float32) if dim else np.zeros((0, 0), dtype=np.float32))
        return stream, pos + nbytes


def encode(symbols, counts=None, centers=None, coder: str = "arith",
           L: int | None = None) -> Bitstream:
    """Entropy-code a symbol stream with a static table derived from ``counts``.

    ``counts`` defaults to the stream's own histogram (two-pass coding) over
    ``L`` symbols, taken from ``centers`` or the largest symbol when omitted.
    """
    if coder not in CODERS:
        raise ValueError(f"unknown coder {coder!r}; choose from {sorted(CODERS)}")
    symbols = np.asarray(symbols, dtype=np.int64).ravel()
    if counts is None:
        if L is None:
            L = len(centers) if centers is not None else int(symbols.max(initial=0)) + 1
        counts = np.bincount(symbols, minlength=L)
    counts = np.asarray(counts, dtype=np.int64)
    if (counts < 0).any() or (counts > 0xFFFFFFFF).any():
        raise ValueError("counts must fit in u32")
    L = len(counts)
    if centers is None:
        centers = np.zeros((0, 0), dtype=np.float32)
    else:
        centers = np.asarray(centers, dtype=np.float32)
        centers = centers[:, None] if centers.ndim == 1 else centers
        if centers.shape[0] != L:
            raise ValueError(f"{centers.shape[0]} centers but {L} counts")
    payload, nbits = _BACKENDS[coder].encode_bits(symbols, freq_table(counts))
    return Bitstream(coder, L, len(symbols), counts, payload, nbits, centers)


def decode(stream, verify: bool = True) -> np.ndarray:
    """Recover the symbol stream from a :class:`Bitstream` or its serialized bytes.

    With ``verify`` the decoded symbols are re-encoded and must reproduce the
    payload bit for bit; a corrupted payload or table that still happens to
    decode is then reported instead of returning a different stream.
    """
    if isinstance(stream, (bytes, bytearray, memoryview)):
        blob = bytes(stream)
        stream, end = Bitstream.from_bytes(blob)
        if end != len(blob):
            raise DecodeError(f"{len(blob) - end} unexpected trailing bytes")
    backend = _BACKENDS[stream.coder]
    table = stream.table()
    symbols = backend.decode_bits(stream.payload, stream.payload_bits, table, stream.m)
    if verify:
        payload, nbits = backend.encode_bits(symbols, table)
        if nbits != stream.payload_bits or payload != stream.payload:
            raise DecodeError("payload is inconsistent with its frequency table")
    return symbols


def arith_encode(symbols, counts=None, centers=None, L=None) -> Bitstream:
    return encode(symbols, counts, centers, coder="arith", L=L)


def huffman_encode(symbols, counts=None, centers=None, L=None) -> Bitstream:
    return encode(symbols, counts, centers, coder="huffman", L=L)


arith_decode = decode
huffman_decode = decode
