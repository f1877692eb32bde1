"""8-bit image files (PNG, PGM, PPM) to and from float arrays in [0, 1]."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

SUFFIXES = (".png", ".pgm", ".ppm", ".pnm")


def read_image(path) -> np.ndarray:
    """Returns (channels, H, W) float64 in [0, 1]."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB" if len(im.getbands()) >= 3 else "L")
        arr = np.asarray(im, dtype=np.float64) / 255.0
    return arr[None] if arr.ndim == 2 else arr.transpose(2, 0, 1)


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)


def write_image(path, image: np.ndarray) -> None:
    """Write (channels, H, W) floats; the format follows the file suffix."""
    arr = to_uint8(image)
    if arr.shape[0] == 1:
        img = Image.fromarray(arr[0], mode="L")
    elif arr.shape[0] == 3:
        img = Image.fromarray(arr.transpose(1, 2, 0), mode="RGB")
    else:
        raise ValueError(f"cannot write an image with {arr.shape[0]} channels")
    suffix = Path(path).suffix.lower()
    fmt = {".png": "PNG", ".pgm": "PPM", ".ppm": "PPM", ".pnm": "PPM"}.get(suffix)
    if fmt is None:
        raise ValueError(f"unsupported image suffix {suffix!r}; use one of {SUFFIXES}")
    img.save(path, format=fmt)


def read_image_dir(directory) -> list[np.ndarray]:
    paths = sorted(p for p in Path(directory).iterdir() if p.suffix.lower() in SUFFIXES)
    return [read_image(p) for p in paths]
