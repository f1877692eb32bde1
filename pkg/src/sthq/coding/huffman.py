"""Canonical Huffman coding from a static frequency table."""

from __future__ import annotations

import heapq

import numpy as np

from .arithmetic import DecodeError, pack_bits, unpack_bits


def code_lengths(freqs) -> list[int]:
    """Huffman code length per symbol; ties merge the earliest-created node first."""
    freqs = [int(f) for f in freqs]
    if not freqs or min(freqs) < 1:
        raise ValueError("frequency table entries must be >= 1")
    if len(freqs) == 1:
        return [1]
    lengths = [0] * len(freqs)
    heap = [(f, i, [i]) for i, f in enumerate(freqs)]
    heapq.heapify(heap)
    order = len(freqs)
    while len(heap) > 1:
        fa, _, a = heapq.heappop(heap)
        fb, _, b = heapq.heappop(heap)
        for s in a:
            lengths[s] += 1
        for s in b:
            lengths[s] += 1
        heapq.heappush(heap, (fa + fb, order, a + b))
        order += 1
    return lengths


def canonical_codes(lengths: list[int]) -> list[tuple[int, int]]:
    """(code, length) per symbol, assigned in (length, symbol) order."""
    codes = [(0, 0)] * len(lengths)
    code, prev = 0, 0
    for length, sym in sorted((l, s) for s, l in enumerate(lengths)):
        code <<= length - prev
        codes[sym] = (code, length)
        code += 1
        prev = length
    return codes


def encode_bits(symbols, freqs) -> tuple[bytes, int]:
    codes = canonical_codes(code_lengths(freqs))
    table = [format(c, f"0{l}b") for c, l in codes]
    L = len(table)
    symbols = np.asarray(symbols, dtype=np.int64)
    if symbols.size and (symbols.min() < 0 or symbols.max() >= L):
        raise ValueError(f"symbols outside [0, {L})")
    bitstring = "".join([table[s] for s in symbols.tolist()])
    return pack_bits([1 if ch == "1" else 0 for ch in bitstring]), len(bitstring)


def decode_bits(payload: bytes, nbits: int, freqs, n: int) -> np.ndarray:
    lengths = code_lengths(freqs)
    max_len = max(lengths)
    ordered = [s for _, s in sorted((l, s) for s, l in enumerate(lengths))]
    count = [0] * (max_len + 1)
    for l in lengths:
        count[l] += 1
    first = [0] * (max_len + 2)   # first canonical code of each length
    index = [0] * (max_len + 2)   # position of that code in ``ordered``
    code = idx = 0
    for l in range(1, max_len + 1):
        code = (code + count[l - 1]) << 1 if l > 1 else 0
        first[l] = code
        index[l] = idx
        idx += count[l]
    bits = unpack_bits(payload, nbits)
    out = np.empty(n, dtype=np.int64)
    pos = 0
    for i in range(n):
        code = length = 0
        while True:
            if pos >= nbits:
                raise DecodeError("payload exhausted before all symbols were decoded")
            code = (code << 1) | bits[pos]
            pos += 1
            length += 1
            offset = code - first[length]
            if 0 <= offset < count[length]:
                out[i] = ordered[index[length] + offset]
                break
            if length >= max_len:
                raise DecodeError("corrupt payload: no codeword matches")
    if pos != nbits:
        raise DecodeError(f"{nbits - pos} trailing payload bits after {n} symbols")
    return out
