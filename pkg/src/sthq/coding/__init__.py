from .arithmetic import DecodeError
from .container import (
    Bitstream,
    arith_decode,
    arith_encode,
    decode,
    encode,
    huffman_decode,
    huffman_encode,
)
from .freq import freq_table, model_cross_entropy_bits
from .report import bits_per_symbol, coded_size_report

__all__ = [
    "Bitstream", "DecodeError", "arith_decode", "arith_encode", "bits_per_symbol",
    "coded_size_report", "decode", "encode", "freq_table", "huffman_decode", "huffman_encode",
    "model_cross_entropy_bits",
]
