"""Soft-to-hard vector quantization for learning compressible representations."""

__version__ = "0.1.0"
