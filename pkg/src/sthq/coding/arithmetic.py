"""Bit-level arithmetic coder with a static frequency model.

32-bit low/high registers; straddles of the midpoint are resolved with
pending (underflow) bits, which is the bit-serial form of carry propagation.
Termination emits two bits (plus pending ones) so that the dyadic interval
named by the payload lies inside the final coding interval.  The payload is
then self-delimiting and its length can never undercut the ideal code length
of the stream under the model.
"""

from __future__ import annotations

from bisect import bisect_right

import numpy as np

from .freq import MAX_TOTAL, cumulative

STATE_BITS = 32
_FULL = (1 << STATE_BITS) - 1
_HALF = 1 << (STATE_BITS - 1)
_QUARTER = 1 << (STATE_BITS - 2)
_THREE_QUARTERS = _HALF + _QUARTER
_PENDING_SLACK = 1024


class DecodeError(ValueError):
    """Raised when a payload cannot have been produced by the encoder."""


def _check_table(freqs) -> list[int]:
    freqs = [int(f) for f in freqs]
    if not freqs or min(freqs) < 1:
        raise ValueError("frequency table entries must be >= 1")
    if sum(freqs) > MAX_TOTAL:
        raise ValueError(f"frequency total {sum(freqs)} exceeds {MAX_TOTAL}")
    return freqs


def pack_bits(bits: list[int]) -> bytes:
    if not bits:
        return b""
    return np.packbits(np.array(bits, dtype=np.uint8)).tobytes()


def unpack_bits(payload: bytes, nbits: int) -> list[int]:
    if len(payload) != (nbits + 7) // 8:
        raise DecodeError(f"payload has {len(payload)} bytes, header declares {nbits} bits")
    return np.unpackbits(np.frombuffer(payload, dtype=np.uint8))[:nbits].tolist()


def encode_bits(symbols, freqs) -> tuple[bytes, int]:
    """Encode symbols in [0, L); returns (payload bytes, payload bit length)."""
    cum = cumulative(_check_table(freqs))
    total = cum[-1]
    L = len(cum) - 1
    out: list[int] = []
    emit = out.append
    low, high, pending = 0, _FULL, 0
    symbols = np.asarray(symbols, dtype=np.int64).tolist()
    for s in symbols:
        if not 0 <= s < L:
            raise ValueError(f"symbol {s} outside [0, {L})")
        span = high - low + 1
        high = low + (cum[s + 1] * span) // total - 1
        low = low + (cum[s] * span) // total
        while True:
            if high < _HALF:
                emit(0)
                if pending:
                    out.extend([1] * pending)
                    pending = 0
            elif low >= _HALF:
                emit(1)
                if pending:
                    out.extend([0] * pending)
                    pending = 0
                low -= _HALF
                high -= _HALF
            elif low >= _QUARTER and high < _THREE_QUARTERS:
                pending += 1
                low -= _QUARTER
                high -= _QUARTER
            else:
                break
            low <<= 1
            high = (high << 1) | 1
    if symbols:
        pending += 1
        if low < _QUARTER:
            out.append(0)
            out.extend([1] * pending)
        else:
            out.append(1)
            out.extend([0] * pending)
    return pack_bits(out), len(out)


def decode_bits(payload: bytes, nbits: int, freqs, n: int) -> np.ndarray:
    """Decode ``n`` symbols from a payload produced by :func:`encode_bits`."""
    cum = cumulative(_check_table(freqs))
    total = cum[-1]
    bits = unpack_bits(payload, nbits)
    # the encoder may end with pending bits the decoder still has to shift
    # through; reading far beyond them means the header and payload disagree
    limit = nbits + STATE_BITS + _PENDING_SLACK
    bits.extend([0] * (limit - nbits + 1))
    code = 0
    for i in range(STATE_BITS):
        code = (code << 1) | bits[i]
    pos = STATE_BITS
    low, high = 0, _FULL
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        span = high - low + 1
        value = ((code - low + 1) * total - 1) // span
        s = bisect_right(cum, value) - 1
        high = low + (cum[s + 1] * span) // total - 1
        low = low + (cum[s] * span) // total
        while True:
            if high < _HALF:
                pass
            elif low >= _HALF:
                low -= _HALF
                high -= _HALF
                code -= _HALF
            elif low >= _QUARTER and high < _THREE_QUARTERS:
                low -= _QUARTER
                high -= _QUARTER
                code -= _QUARTER
            else:
                break
            if pos >= limit:
                raise DecodeError("payload exhausted before all symbols were decoded")
            low <<= 1
            high = (high << 1) | 1
            code = (code << 1) | bits[pos]
            pos += 1
        if not low <= code <= high:
            raise DecodeError("corrupt payload: code value left the coding interval")
        out[i] = s
    return out
