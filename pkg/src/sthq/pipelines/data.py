"""Procedural datasets small enough to train on a laptop CPU."""

from __future__ import annotations

import numpy as np


def two_moons(n: int, rng: np.random.Generator, noise: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """Two interleaved half circles, standardized; labels 0/1 in equal numbers."""
    half = n // 2
    t0 = rng.uniform(0, np.pi, half)
    t1 = rng.uniform(0, np.pi, n - half)
    a = np.stack([np.cos(t0), np.sin(t0)], axis=1)
    b = np.stack([1 - np.cos(t1), 0.5 - np.sin(t1)], axis=1)
    x = np.concatenate([a, b]) + rng.normal(0, noise, size=(n, 2))
    y = np.concatenate([np.zeros(half, dtype=np.int64), np.ones(n - half, dtype=np.int64)])
    x = (x - np.array([0.5, 0.25])) / np.array([0.87, 0.5])
    order = rng.permutation(n)
    return x[order], y[order]


def two_spirals(n: int, rng: np.random.Generator, noise: float = 0.05,
                turns: float = 1.5) -> tuple[np.ndarray, np.ndarray]:
    half = n // 2
    t = np.sqrt(rng.uniform(0.05, 1, n)) * turns * 2 * np.pi
    y = (np.arange(n) >= half).astype(np.int64)
    sign = np.where(y == 0, 1.0, -1.0)
    r = t / (turns * 2 * np.pi)
    x = np.stack([sign * r * np.cos(t), sign * r * np.sin(t)], axis=1)
    x += rng.normal(0, noise, size=x.shape)
    order = rng.permutation(n)
    return x[order], y[order]


def classification_data(name: str, n: int, rng: np.random.Generator):
    if name == "moons":
        return two_moons(n, rng)
    if name == "spirals":
        return two_spirals(n, rng)
    raise ValueError(f"unknown dataset {name!r}; choose moons or spirals")


def textures(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Grayscale images in [0, 1], shape (n, 1, size, size).

    Each image mixes a few oriented sinusoidal gratings with soft blobs and a
    brightness ramp, which gives both smooth regions and edges.
    """
    yy, xx = np.mgrid[0:size, 0:size] / size
    out = np.empty((n, 1, size, size))
    for i in range(n):
        img = np.zeros((size, size))
        for _ in range(int(rng.integers(1, 4))):
            theta = rng.uniform(0, np.pi)
            freq = rng.uniform(1, 4)
            phase = rng.uniform(0, 2 * np.pi)
            img += rng.uniform(0.2, 0.6) * np.sin(2 * np.pi * freq * (xx * np.cos(theta) + yy * np.sin(theta)) + phase)
        for _ in range(int(rng.integers(0, 3))):
            cx, cy = rng.uniform(0, 1, 2)
            rad = rng.uniform(0.1, 0.3)
            img += rng.uniform(-1, 1) * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * rad ** 2))
        img += rng.uniform(-0.5, 0.5) * (xx - 0.5) + rng.uniform(-0.5, 0.5) * (yy - 0.5)
        lo, hi = img.min(), img.max()
        img = (img - lo) / (hi - lo + 1e-12)
        out[i, 0] = rng.uniform(0.1, 0.3) + rng.uniform(0.5, 0.7) * img
    return out


def crops_from_images(images: list[np.ndarray], size: int, n: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Random size x size crops (first channel) from user-supplied images in [0, 1]."""
    usable = [im for im in images if im.shape[-2] >= size and im.shape[-1] >= size]
    if not usable:
        raise ValueError(f"no image is at least {size}x{size}")
    out = np.empty((n, 1, size, size))
    for i in range(n):
        im = usable[int(rng.integers(0, len(usable)))]
        r = int(rng.integers(0, im.shape[-2] - size + 1))
        c = int(rng.integers(0, im.shape[-1] - size + 1))
        out[i, 0] = im[0, r : r + size, c : c + size]
    return out
