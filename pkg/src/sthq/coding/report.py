"""Size accounting for coded parameter and feature streams."""

from __future__ import annotations


def coded_size_report(weights_count: int, L: int, payload_bits: int, dim: int = 1,
                      header_bits: int = 0) -> float:
    """Compression factor against storing every weight as a 32-bit float.

    The denominator counts the float32 centers, the coded index stream and any
    container header bits.
    """
    if weights_count <= 0 or L <= 0 or payload_bits < 0 or dim <= 0:
        raise ValueError("counts must be positive")
    return (weights_count * 32) / (L * 32 * dim + payload_bits + header_bits)


def bits_per_symbol(stream, include_header: bool = True) -> float:
    bits = stream.total_bits if include_header else stream.payload_bits
    return bits / stream.m
