"""Image compression with a convolutional autoencoder and a quantized bottleneck.

Training runs in two stages: a plain autoencoder first, then joint
rate-distortion training with soft quantization of the bottleneck, annealed
by gap feedback.  Each bottleneck channel is cut into ph x pw patches; each
patch is one symbol, and each channel keeps its own histogram.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from .. import coding
from ..annealing import (
    AnnealState,
    TelemetryWriter,
    gap_feedback_step,
    start_gap_schedule,
    target_gap,
)
from ..autodiff import NonFiniteError, Tensor
from ..entropy import RunningHistogram, sample_entropy
from ..quantizer import CenterSet, hard_quantize, init_centers, soft_assign, soft_quantize
from ..rng import child_seed, stream
from .metrics import mse
from .model import ModelSpec, conv_autoencoder, model_bytes
from .rd import RateTerm, RDObjectiveConfig, TrainingDiverged, rd_loss


@dataclass
class AEConfig:
    size: int = 16
    n_train: int = 512
    n_test: int = 64
    hidden: int = 16
    channels: int = 4
    L: int = 256
    pw: int = 2
    ph: int = 2
    beta_total: float = 1e-4
    lam: float = 0.0
    batch: int = 32
    stage1_iters: int = 1500
    stage1_lr: float = 3e-3
    stage2_iters: int = 800
    lr: float = 1e-3
    T: float = 10.0
    K_G: float = 0.0  # 0 picks K_G so that K_G * gap(0) = kg_fraction * sigma0
    kg_fraction: float = 3.0
    hist_interval: int = 10
    init_iters: int = 400
    coder: str = "arith"
    seed: int = 0
    image_dir: str = ""

    @property
    def dim(self) -> int:
        return self.pw * self.ph


# -- bottleneck <-> columns --------------------------------------------------------------

def to_columns(z, ph: int, pw: int):
    """(N, c, h, w) -> (c, N * m, ph * pw); works on arrays and tensors."""
    n, c, h, w = z.shape
    if h % ph or w % pw:
        raise ValueError(f"bottleneck {h}x{w} is not divisible into {ph}x{pw} patches")
    shape6 = (n, c, h // ph, ph, w // pw, pw)
    out = (c, n * (h // ph) * (w // pw), ph * pw)
    if isinstance(z, Tensor):
        return ad.reshape(ad.transpose(ad.reshape(z, shape6), (1, 0, 2, 4, 3, 5)), out)
    return np.asarray(z).reshape(shape6).transpose(1, 0, 2, 4, 3, 5).reshape(out)


def from_columns(cols, shape, ph: int, pw: int):
    n, c, h, w = shape
    shape6 = (c, n, h // ph, w // pw, ph, pw)
    inverse = (1, 0, 2, 4, 3, 5)  # the permutation is its own inverse
    if isinstance(cols, Tensor):
        return ad.reshape(ad.transpose(ad.reshape(cols, shape6), inverse), shape)
    return np.asarray(cols).reshape(shape6).transpose(inverse).reshape(shape)


def symbols_per_channel(spec: ModelSpec, ph: int, pw: int) -> int:
    _, h, w = spec.bottleneck_shape
    return (h // ph) * (w // pw)


# -- stage 1 ---------------------------------------------------------------------------

def build_autoencoder(cfg: AEConfig) -> ModelSpec:
    spec = conv_autoencoder(1, cfg.hidden, cfg.channels, cfg.size)
    spec.meta = {"task": "autoencoder", "ph": cfg.ph, "pw": cfg.pw}
    _, h, w = spec.bottleneck_shape
    if h % cfg.ph or w % cfg.pw:
        raise ValueError(f"bottleneck {h}x{w} is not divisible into {cfg.ph}x{cfg.pw} patches")
    return spec


def train_autoencoder_stage1(spec: ModelSpec, images: np.ndarray, cfg: AEConfig) -> np.ndarray:
    """Reconstruction-only training (no quantization) with Adam."""
    rng = stream(cfg.seed, "ae-stage1")
    W = Tensor(spec.init_weights(rng), requires_grad=True)
    opt = ad.Adam([W], lr=cfg.stage1_lr)
    for it in range(cfg.stage1_iters):
        opt.lr = cfg.stage1_lr * 0.5 * (1 + math.cos(math.pi * it / cfg.stage1_iters))
        x = images[rng.integers(0, len(images), min(cfg.batch, len(images)))]
        try:
            loss = ad.squared_error(spec.forward(W, x), x)
            loss.backward()
        except NonFiniteError as err:
            raise TrainingDiverged(f"stage 1 diverged at iteration {it}: {err}") from err
        opt.step()
    return W.data.copy()


def bottleneck_columns(spec: ModelSpec, W: np.ndarray, images: np.ndarray, ph: int, pw: int,
                       chunk: int = 256) -> np.ndarray:
    """(c, N * m, dim) columns of the bottleneck for every image."""
    parts = [to_columns(spec.encode(W, images[i : i + chunk]).data, ph, pw)
             for i in range(0, len(images), chunk)]
    return np.concatenate(parts, axis=1)


# -- stage 2 ---------------------------------------------------------------------------

@dataclass
class AEResult:
    spec: ModelSpec
    weights: np.ndarray
    centers: CenterSet
    counts: np.ndarray  # (channels, L) hard symbol counts on the training set
    sigma0: float
    sigma: float
    gap0: float
    K_G: float
    final_gap_ratio: float
    history: list = field(default_factory=list)

    @property
    def ph(self) -> int:
        return self.spec.meta["ph"]

    @property
    def pw(self) -> int:
        return self.spec.meta["pw"]


def _hard_reconstruction(spec, W, z: np.ndarray, C: np.ndarray, ph: int, pw: int):
    cols = to_columns(z, ph, pw)
    c, M, dim = cols.shape
    symbols, zhat = hard_quantize(cols.reshape(c * M, dim), C)
    xhat = spec.decode(W, from_columns(zhat.reshape(c, M, dim), z.shape, ph, pw)).data
    return symbols.reshape(c, M), xhat


def train_autoencoder_stage2(spec: ModelSpec, W1: np.ndarray, images: np.ndarray, cfg: AEConfig,
                             centers: CenterSet | None = None, sigma0: float | None = None,
                             telemetry_path=None) -> AEResult:
    """Joint training of weights and centers under the rate-distortion loss.

    The first epoch runs at fixed sigma0 and its mean gap becomes gap(0);
    afterwards sigma follows the gap-feedback rule every iteration.
    """
    ph, pw = cfg.ph, cfg.pw
    if centers is None:
        cols = bottleneck_columns(spec, W1, images, ph, pw)
        centers, sigma0 = init_centers(cols.reshape(-1, cfg.dim), cfg.L, iters=cfg.init_iters,
                                       seed=child_seed(cfg.seed, "ae-centers"))
    elif sigma0 is None:
        raise ValueError("sigma0 is required with explicit centers")
    centers = centers.copy()
    rng = stream(cfg.seed, "ae-stage2")
    objective = RDObjectiveConfig(cfg.beta_total, cfg.lam, "mse")
    W = Tensor(W1.copy(), requires_grad=True)
    opt = ad.Adam([W, centers.tensor], lr=cfg.lr)
    c = spec.bottleneck_shape[0]
    hists = [RunningHistogram(cfg.L, capacity=len(images), interval=cfg.hist_interval) for _ in range(c)]
    per_image = symbols_per_channel(spec, ph, pw)
    pixels = cfg.size * cfg.size
    warmup = max(1, math.ceil(len(images) / cfg.batch))
    state = AnnealState(sigma0, mode="gap", T=cfg.T, K_G=cfg.K_G or 1.0)
    warm_gaps: list[float] = []
    writer = TelemetryWriter(telemetry_path) if telemetry_path else None
    history = []
    it = 0
    try:
        for it in range(warmup + cfg.stage2_iters):
            opt.lr = cfg.lr * (0.1 if it >= warmup + int(0.8 * cfg.stage2_iters) else 1.0)
            x = images[rng.integers(0, len(images), min(cfg.batch, len(images)))]
            z = spec.encode(W, x)
            symbols, xhat = _hard_reconstruction(spec, W.data, z.data, centers.values, ph, pw)
            pmfs = [h.update(list(symbols[k].reshape(len(x), per_image))) for k, h in enumerate(hists)]
            cols = to_columns(z, ph, pw)
            flat = ad.reshape(cols, (c * cols.shape[1], cfg.dim))
            phi = soft_assign(flat, centers, state.sigma)
            zsoft = from_columns(ad.matmul(phi, centers.tensor), z.shape, ph, pw)
            out = spec.decode(W, zsoft)
            phi_c = ad.reshape(phi, (c, cols.shape[1], cfg.L))
            terms = [RateTerm(None, centers, pmfs[k], ad.getitem(phi_c, k)) for k in range(c)]
            loss, parts = rd_loss(out, x, terms, state.sigma, objective, weights=W)
            loss.backward()
            opt.step()
            e_soft, e_hard = parts["distortion"], mse(xhat, x)
            gap_t = e_hard - e_soft
            entropy_bpp = sum(sample_entropy(p) for p in pmfs) * per_image / pixels
            if it < warmup:
                warm_gaps.append(gap_t)
                target = float("nan")
                if it == warmup - 1:
                    gap0 = float(np.mean(warm_gaps))
                    K_G = cfg.K_G or cfg.kg_fraction * sigma0 / max(abs(gap0), 1e-12)
                    state = start_gap_schedule(AnnealState(sigma0, mode="gap", T=cfg.T, K_G=K_G), gap0)
            else:
                target = target_gap(state)
                state = gap_feedback_step(state, gap_t)
            row = (it, state.sigma, e_soft, e_hard, gap_t, target, entropy_bpp)
            history.append(row)
            if writer:
                writer.write(*row)
    except NonFiniteError as err:
        raise TrainingDiverged(f"stage 2 diverged at iteration {it}: {err}") from err
    finally:
        if writer:
            writer.close()
    centers.round_to_float32()
    weights = W.data.astype(np.float32).astype(np.float64)
    counts = channel_counts(spec, weights, centers.values, images, ph, pw)
    e_soft, e_hard = soft_hard_errors(spec, weights, centers, state.sigma, images, ph, pw)
    ratio = abs(e_hard - e_soft) / e_hard
    return AEResult(spec, weights, centers, counts, float(sigma0), state.sigma,
                    state.gap0, state.K_G, ratio, history)


def soft_hard_errors(spec, W, centers, sigma, images, ph, pw, chunk: int = 256):
    """Reconstruction MSE with soft and with hard quantization over a whole image set."""
    soft = hard = 0.0
    for i in range(0, len(images), chunk):
        x = images[i : i + chunk]
        z = spec.encode(W, x).data
        cols = to_columns(z, ph, pw)
        c, M, dim = cols.shape
        zsoft = soft_quantize(cols.reshape(c * M, dim), centers, sigma).data
        out = spec.decode(W, from_columns(zsoft.reshape(c, M, dim), z.shape, ph, pw)).data
        _, xhat = _hard_reconstruction(spec, W, z, centers.values, ph, pw)
        soft += mse(out, x) * len(x)
        hard += mse(xhat, x) * len(x)
    return soft / len(images), hard / len(images)


def channel_counts(spec, W, C, images, ph, pw) -> np.ndarray:
    cols = bottleneck_columns(spec, W, images, ph, pw)
    c, M, dim = cols.shape
    symbols, _ = hard_quantize(cols.reshape(c * M, dim), C)
    symbols = symbols.reshape(c, M)
    return np.stack([np.bincount(symbols[k], minlength=len(C)) for k in range(c)])


# -- coding ----------------------------------------------------------------------------

_IMAGE_HEAD = struct.Struct("<HHH")


def model_digest(spec: ModelSpec, W: np.ndarray) -> bytes:
    return hashlib.sha256(model_bytes(spec, W)).digest()


def _check_dims(spec: ModelSpec, shape, ph, pw):
    factor = spec.input_shape[1] // spec.bottleneck_shape[1]
    need_h, need_w = factor * ph, factor * pw
    if len(shape) != 3 or shape[0] != spec.input_shape[0]:
        raise ValueError(f"expected a ({spec.input_shape[0]}, H, W) image, got {shape}")
    if shape[1] % need_h or shape[2] % need_w:
        raise ValueError(f"image {shape[1]}x{shape[2]}: height must be divisible by {need_h} "
                         f"and width by {need_w}")


def quantize_image(result: AEResult, image: np.ndarray):
    """In-memory hard path: (symbols per channel, reconstruction)."""
    _check_dims(result.spec, image.shape, result.ph, result.pw)
    z = result.spec.encode(result.weights, image[None]).data
    symbols, xhat = _hard_reconstruction(result.spec, result.weights, z, result.centers.values,
                                         result.ph, result.pw)
    return symbols, xhat[0]


def compress_image(result: AEResult, image: np.ndarray, coder: str = "arith") -> bytes:
    """Model digest | H, W, channels (u16) | one container per bottleneck channel.

    Each channel is coded with its training-set histogram as the static table.
    """
    symbols, _ = quantize_image(result, image)
    parts = [model_digest(result.spec, result.weights),
             _IMAGE_HEAD.pack(image.shape[1], image.shape[2], len(symbols))]
    for k, s in enumerate(symbols):
        parts.append(coding.encode(s, counts=result.counts[k], centers=result.centers.values,
                                   coder=coder).to_bytes())
    return b"".join(parts)


def parse_image_artifact(blob: bytes) -> tuple[bytes, tuple[int, int], list[coding.Bitstream]]:
    if len(blob) < 32 + _IMAGE_HEAD.size:
        raise coding.DecodeError("image artifact too short")
    digest = blob[:32]
    h, w, c = _IMAGE_HEAD.unpack_from(blob, 32)
    pos = 32 + _IMAGE_HEAD.size
    streams = []
    for _ in range(c):
        s, pos = coding.Bitstream.from_bytes(blob, pos)
        streams.append(s)
    if pos != len(blob):
        raise coding.DecodeError("trailing bytes after the last channel")
    return digest, (h, w), streams


def decompress_image(blob: bytes, spec: ModelSpec, W: np.ndarray) -> np.ndarray:
    digest, (h, w), streams = parse_image_artifact(blob)
    if digest != model_digest(spec, W):
        raise coding.DecodeError("artifact was produced with a different model")
    ph, pw = spec.meta["ph"], spec.meta["pw"]
    _check_dims(spec, (spec.input_shape[0], h, w), ph, pw)
    factor = spec.input_shape[1] // spec.bottleneck_shape[1]
    c = spec.bottleneck_shape[0]
    if len(streams) != c:
        raise coding.DecodeError(f"artifact has {len(streams)} channels, model has {c}")
    zshape = (1, c, h // factor, w // factor)
    C = streams[0].centers.astype(np.float64)
    cols = np.stack([C[coding.decode(s)] for s in streams])
    return spec.decode(W, from_columns(cols, zshape, ph, pw)).data[0]


def payload_bits(blob: bytes) -> int:
    return sum(s.payload_bits for s in parse_image_artifact(blob)[2])


@dataclass
class ImageEval:
    bpp: float
    entropy_bpp: float
    mse: float
    bit_exact: bool
    coded_bits: int


def evaluate_images(result: AEResult, images: np.ndarray, coder: str = "arith",
                    threads: int = 1) -> ImageEval:
    """Compress, decompress and score every image; checks the bitstream path is bit-exact.

    bpp counts payload bits only: centers and tables belong to the model.
    """
    pixels = images.shape[2] * images.shape[3]

    def one(image):
        blob = compress_image(result, image, coder)
        decoded = decompress_image(blob, result.spec, result.weights)
        _, xhat = quantize_image(result, image)
        return payload_bits(blob), mse(decoded, image), bool(np.array_equal(decoded, xhat))

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, images))
    else:
        rows = [one(im) for im in images]
    bits = np.array([r[0] for r in rows])
    per_image = symbols_per_channel(result.spec, result.ph, result.pw)
    probs = result.counts / result.counts.sum(axis=1, keepdims=True)
    entropy = sum(sample_entropy(p) for p in probs) * per_image / pixels
    return ImageEval(bpp=float(bits.mean() / pixels), entropy_bpp=float(entropy),
                     mse=float(np.mean([r[1] for r in rows])),
                     bit_exact=all(r[2] for r in rows), coded_bits=int(bits.sum()))
