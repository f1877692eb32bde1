"""Soft and hard vector quantization against a learnable set of centers."""

from __future__ import annotations

import math
import struct

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


class CenterSet:
    """L centers in R^dim, stored row-wise as an (L, dim) trainable leaf."""

    def __init__(self, centers, trainable: bool = True):
        arr = np.array(centers, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise ValueError(f"centers must be (L, dim), got shape {arr.shape}")
        if arr.shape[0] < 2 or arr.shape[1] < 1:
            raise ValueError(f"need L >= 2 and dim >= 1, got L={arr.shape[0]}, dim={arr.shape[1]}")
        if not np.isfinite(arr).all():
            raise ValueError("centers must be finite")
        self.tensor = Tensor(arr, requires_grad=trainable, name="centers")

    @property
    def L(self) -> int:
        return self.tensor.shape[0]

    @property
    def dim(self) -> int:
        return self.tensor.shape[1]

    @property
    def values(self) -> np.ndarray:
        return self.tensor.data

    def copy(self) -> "CenterSet":
        return CenterSet(self.values.copy(), trainable=self.tensor.requires_grad)

    def round_to_float32(self) -> None:
        """Snap centers to float32-representable values (what serialization stores)."""
        self.tensor.data[...] = self.tensor.data.astype(np.float32).astype(np.float64)

    def to_bytes(self) -> bytes:
        head = struct.pack("<HH", self.dim, self.L)
        return head + self.values.astype("<f4").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes, offset: int = 0) -> tuple["CenterSet", int]:
        dim, L = struct.unpack_from("<HH", blob, offset)
        offset += 4
        n = L * dim * 4
        if len(blob) < offset + n:
            raise ValueError("truncated center table")
        arr = np.frombuffer(blob, dtype="<f4", count=L * dim, offset=offset).reshape(L, dim)
        return cls(arr.astype(np.float64)), offset + n


def _check_sigma(sigma) -> Tensor:
    if isinstance(sigma, Tensor):
        if sigma.size != 1 or not (sigma.data > 0).all():
            raise ValueError(f"hardness must be a positive scalar, got {sigma.data!r}")
        return sigma
    sigma = float(sigma)
    if not (sigma > 0 and math.isfinite(sigma)):
        raise ValueError(f"hardness must be positive and finite, got {sigma!r}")
    return Tensor(sigma)


def _centers(C) -> Tensor:
    if isinstance(C, CenterSet):
        return C.tensor
    if isinstance(C, Tensor):
        return C
    arr = np.asarray(C, dtype=np.float64)
    return Tensor(arr[:, None] if arr.ndim == 1 else arr)


def _columns(Z, dim: int) -> tuple[Tensor, bool]:
    """Coerce input to an (M, dim) tensor; report whether it was a single point."""
    Z = Z if isinstance(Z, Tensor) else Tensor(np.asarray(Z, dtype=np.float64))
    if Z.ndim == 0:
        Z = ad.reshape(Z, (1, 1))
        return Z, True
    if Z.ndim == 1:
        if dim == 1 and Z.shape[0] != 1:
            return ad.reshape(Z, (Z.shape[0], 1)), False
        if Z.shape[0] != dim:
            raise ad.ShapeError(f"point of length {Z.shape[0]} does not match center dim {dim}")
        return ad.reshape(Z, (1, dim)), True
    if Z.ndim != 2 or Z.shape[1] != dim:
        raise ad.ShapeError(f"columns of shape {Z.shape} do not match center dim {dim}")
    return Z, False


def reshape_columns(z, dim: int):
    """Split a flat vector of length d into m = d/dim consecutive columns (rows here)."""
    d = z.shape[0] if isinstance(z, Tensor) else len(z)
    if dim < 1 or d % dim:
        raise ValueError(f"column dim {dim} does not divide vector length {d}")
    if isinstance(z, Tensor):
        return ad.reshape(z, (d // dim, dim))
    return np.asarray(z, dtype=np.float64).reshape(d // dim, dim)


def unreshape_columns(Z):
    if isinstance(Z, Tensor):
        return ad.reshape(Z, (Z.size,))
    return np.asarray(Z).reshape(-1)


def sq_distances(Z: Tensor, C: Tensor) -> Tensor:
    """Squared distances (M, L) via ||z||^2 - 2 z.c + ||c||^2."""
    zz = ad.sum_(ad.square(Z), axis=1, keepdims=True)
    cc = ad.sum_(ad.square(C), axis=1)
    return zz - 2.0 * ad.matmul(Z, ad.transpose(C)) + cc


def soft_assign(Z, C, sigma) -> Tensor:
    """phi(z) = softmax(-sigma * ||z - c_j||^2) for every column of ``Z``."""
    Ct = _centers(C)
    Zt, single = _columns(Z, Ct.shape[1])
    phi = ad.softmax(-_check_sigma(sigma) * sq_distances(Zt, Ct))
    return ad.reshape(phi, (Ct.shape[0],)) if single else phi


def soft_quantize(Z, C, sigma) -> Tensor:
    """Convex combination of centers weighted by the soft assignment."""
    Ct = _centers(C)
    Zt, single = _columns(Z, Ct.shape[1])
    out = ad.matmul(soft_assign(Zt, Ct, sigma), Ct)
    return ad.reshape(out, (Ct.shape[1],)) if single else out


def _hard_symbols(Z: np.ndarray, C: np.ndarray, chunk: int = 4096) -> np.ndarray:
    if not np.isfinite(Z).all():
        raise ValueError("hard_assign: non-finite input")
    out = np.empty(len(Z), dtype=np.int64)
    for start in range(0, len(Z), chunk):
        block = Z[start : start + chunk]
        d = ((block[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
        out[start : start + chunk] = d.argmin(axis=1)  # argmin keeps the first (lowest) index on ties
    return out


def hard_assign(Z, C):
    """Index of the nearest center; ties go to the smallest index."""
    Cv = _centers(C).data
    Zv = Z.data if isinstance(Z, Tensor) else np.asarray(Z, dtype=np.float64)
    if Zv.ndim == 0:
        return int(_hard_symbols(Zv.reshape(1, 1), Cv)[0])
    if Zv.ndim == 1:
        if Cv.shape[1] == 1 and Zv.shape[0] != 1:
            return _hard_symbols(Zv[:, None], Cv)
        return int(_hard_symbols(Zv[None, :], Cv)[0])
    return _hard_symbols(Zv, Cv)


def hard_quantize(Z, C) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-neighbour symbols and the reconstruction built from those centers."""
    Cv = _centers(C).data
    Zv = Z.data if isinstance(Z, Tensor) else np.asarray(Z, dtype=np.float64)
    if Zv.ndim == 1:
        Zv = Zv[:, None] if Cv.shape[1] == 1 else Zv[None, :]
    symbols = _hard_symbols(Zv, Cv)
    return symbols, Cv[symbols].copy()


def decode_symbols(symbols: np.ndarray, C) -> np.ndarray:
    return _centers(C).data[np.asarray(symbols, dtype=np.int64)]


def hard_quantize_tensor(Z, C) -> tuple[np.ndarray, Tensor]:
    """Hard quantization whose output is differentiable w.r.t. the centers only."""
    Ct = _centers(C)
    symbols, _ = hard_quantize(Z, Ct)
    return symbols, ad.take_rows(Ct, symbols)


def cluster_energy(Z, C, sigma) -> Tensor:
    """Mean of ||z - Q~(z)||^2 over the columns of ``Z``."""
    Zt = Z if isinstance(Z, Tensor) else Tensor(np.asarray(Z, dtype=np.float64))
    diff = Zt - soft_quantize(Zt, C, sigma)
    return ad.mean(ad.sum_(ad.square(diff), axis=1))


def default_sigma0(samples: np.ndarray, centers: np.ndarray,
                   lo: float = 1e-2, hi: float = 1e6) -> float:
    """1 / (2 * mean squared distance to the nearest initial center), clamped."""
    _, zhat = hard_quantize(samples, centers)
    msd = float(((samples - zhat) ** 2).sum(axis=1).mean())
    if msd <= 0:
        return hi
    return float(min(max(1.0 / (2.0 * msd), lo), hi))


def init_centers(samples, L: int, iters: int = 1000, lr: float = 0.1, seed: int = 0,
                 batch: int = 256, sigma0: float | None = None,
                 rounds: int = 2) -> tuple[CenterSet, float]:
    """Sample L distinct columns as centers, then refine them by SGD on the soft cluster energy.

    With ``sigma0=None`` the hardness is estimated from the current centers at
    the start of each of ``rounds`` equal SGD phases; the last estimate is
    returned.  A single round reproduces the plain one-shot estimate.
    """
    Zs = np.asarray(samples, dtype=np.float64)
    if Zs.ndim == 1:
        Zs = Zs[:, None]
    if len(Zs) < L:
        raise ValueError(f"need at least L={L} samples, got {len(Zs)}")
    rng = np.random.default_rng(seed)
    centers = CenterSet(Zs[rng.choice(len(Zs), size=L, replace=False)])
    fixed = sigma0 is not None
    phase = max(iters // max(rounds, 1), 1)
    for it in range(iters):
        k = it % phase
        if k == 0 and (not fixed or it == 0):
            sigma0 = sigma0 if fixed else default_sigma0(Zs, centers.values)
        idx = rng.integers(0, len(Zs), size=min(batch, len(Zs)))
        energy = cluster_energy(Zs[idx], centers, sigma0)
        energy.backward()
        step = lr * 0.5 * (1.0 + math.cos(math.pi * k / phase))
        centers.tensor.data -= step * centers.tensor.grad
    if sigma0 is None:
        sigma0 = default_sigma0(Zs, centers.values)
    return centers, float(sigma0)
