"""Runs that tie training, coding and scoring together, shared by the CLI and the tests."""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .. import coding
from ..config import echo
from ..quantizer import CenterSet
from ..rng import stream
from .autoencoder import (
    AEConfig,
    AEResult,
    ImageEval,
    build_autoencoder,
    compress_image,
    evaluate_images,
    train_autoencoder_stage1,
    train_autoencoder_stage2,
)
from .data import crops_from_images, textures
from .imageio import read_image_dir
from .metrics import RateDistortionPoint, psnr
from .model import load_model, save_model
from .netcompress import (
    NetCompressConfig,
    NetCompressResult,
    build_classifier,
    make_data,
    train_baseline,
    train_net_compression,
    weights_artifact,
)


def run_id(prefix: str, cfg) -> str:
    """Stable identifier derived from the full config, so reruns produce the same id."""
    blob = repr(sorted(asdict(cfg).items())).encode()
    return f"{prefix}-{hashlib.sha256(blob).hexdigest()[:10]}"


# -- autoencoder -------------------------------------------------------------------------

def ae_data(cfg: AEConfig) -> tuple[np.ndarray, np.ndarray]:
    """Generated textures, or crops of the images in cfg.image_dir when one is given."""
    train_rng, test_rng = stream(cfg.seed, "ae-train"), stream(cfg.seed, "ae-test")
    if cfg.image_dir:
        images = [im.mean(axis=0, keepdims=True) for im in read_image_dir(cfg.image_dir)]
        if not images:
            raise FileNotFoundError(f"no PNG/PGM/PPM images in {cfg.image_dir}")
        return (crops_from_images(images, cfg.size, cfg.n_train, train_rng),
                crops_from_images(images, cfg.size, cfg.n_test, test_rng))
    return textures(cfg.n_train, cfg.size, train_rng), textures(cfg.n_test, cfg.size, test_rng)


@dataclass
class AEPoint:
    cfg: AEConfig
    result: AEResult
    evaluation: ImageEval
    point: RateDistortionPoint
    artifacts: list[bytes]


def ae_point(cfg: AEConfig, W1: np.ndarray, train: np.ndarray, test: np.ndarray,
             outdir: Path | None = None, threads: int = 1) -> AEPoint:
    """Stage 2 from shared stage-1 weights, then code and score the test images."""
    spec = build_autoencoder(cfg)
    telemetry = outdir / "telemetry.csv" if outdir else None
    result = train_autoencoder_stage2(spec, W1, train, cfg, telemetry_path=telemetry)
    ev = evaluate_images(result, test, cfg.coder, threads)
    point = RateDistortionPoint(run_id("ae", cfg), cfg.beta_total, cfg.L, cfg.dim, ev.bpp,
                                ev.entropy_bpp, ev.coded_bits, ev.mse, psnr(ev.mse), None)
    artifacts = [compress_image(result, im, cfg.coder) for im in test]
    if outdir:
        (outdir / "config.txt").write_text(echo(cfg), encoding="utf-8")
        save_model(outdir / "model.sthm", result.spec, result.weights)
        (outdir / "codebook.sthq").write_bytes(codebook_bytes(result))
        art = outdir / "artifacts"
        art.mkdir(exist_ok=True)
        for i, blob in enumerate(artifacts):
            (art / f"test{i:04d}.sthq").write_bytes(blob)
    return AEPoint(cfg, result, ev, point, artifacts)


def ae_sweep(cfg: AEConfig, betas, W1=None, data=None, outdir: Path | None = None,
             threads: int = 1, label: str = "") -> list[AEPoint]:
    """One stage-1 model, then a stage-2 run per beta."""
    train, test = data if data is not None else ae_data(cfg)
    if W1 is None:
        W1 = train_autoencoder_stage1(build_autoencoder(cfg), train, cfg)
    points = []
    for beta in betas:
        sub = None
        if outdir:
            sub = Path(outdir) / f"{label}beta{beta:g}"
            sub.mkdir(parents=True, exist_ok=True)
        points.append(ae_point(replace(cfg, beta_total=float(beta)), W1, train, test, sub, threads))
    return points


# -- codebook file: one empty container per channel carrying centers and training counts ---

def codebook_bytes(result: AEResult) -> bytes:
    return b"".join(coding.encode(np.zeros(0, dtype=np.int64), counts=c, centers=result.centers.values,
                                  coder="arith").to_bytes() for c in result.counts)


def parse_codebook(blob: bytes) -> tuple[np.ndarray, np.ndarray]:
    """(centers (L, dim) float64, counts (channels, L))."""
    pos, centers, counts = 0, None, []
    while pos < len(blob):
        s, pos = coding.Bitstream.from_bytes(blob, pos)
        if s.m:
            raise coding.DecodeError("codebook entries must not hold symbols")
        if centers is not None and not np.array_equal(centers, s.centers):
            raise coding.DecodeError("codebook channels disagree on the centers")
        centers = s.centers
        counts.append(s.counts)
    if centers is None:
        raise coding.DecodeError("empty codebook")
    return centers.astype(np.float64), np.stack(counts)


def load_ae_result(run_dir) -> AEResult:
    """Rebuild the coding-relevant part of a trained autoencoder from a run directory."""
    run_dir = Path(run_dir)
    spec, W = load_model(run_dir / "model.sthm")
    if spec.meta.get("task") != "autoencoder":
        raise ValueError(f"{run_dir / 'model.sthm'} is not an autoencoder model")
    centers, counts = parse_codebook((run_dir / "codebook.sthq").read_bytes())
    nan = float("nan")
    return AEResult(spec, W, CenterSet(centers, trainable=False), counts, nan, nan, nan, nan, nan)


# -- matched-rate comparison ---------------------------------------------------------------

def inversions(values, increasing: bool) -> int:
    """Adjacent pairs that break the expected direction (ties are allowed)."""
    v = np.asarray(values, dtype=np.float64)
    d = np.diff(v)
    return int(np.sum(d < 0) if increasing else np.sum(d > 0))


def matched_rate_wins(candidate: list[tuple[float, float]],
                      reference: list[tuple[float, float]]) -> list[bool]:
    """For each (rate, distortion) candidate point: is its distortion below the reference curve?

    The reference curve is linear interpolation between its points sorted by
    rate.  Outside the reference range there is nothing to interpolate: below
    it a candidate wins only if it dominates the lowest-rate reference point,
    and above it the candidate counts as a loss.
    """
    ref = sorted(reference)
    rates = np.array([r for r, _ in ref])
    dists = np.array([d for _, d in ref])
    wins = []
    for rate, dist in candidate:
        if rate < rates[0]:
            wins.append(bool(dist < dists[0]))
        elif rate > rates[-1]:
            wins.append(False)
        else:
            wins.append(bool(dist < np.interp(rate, rates, dists)))
    return wins


# -- net compression ---------------------------------------------------------------------

@dataclass
class NetPoint:
    cfg: NetCompressConfig
    result: NetCompressResult
    point: RateDistortionPoint
    artifact: bytes


def net_point(cfg: NetCompressConfig, W0=None, data=None, outdir: Path | None = None) -> NetPoint:
    spec = build_classifier(cfg)
    train, test = data if data is not None else make_data(cfg)
    if W0 is None:
        W0 = train_baseline(spec, train, cfg)
    telemetry = outdir / "telemetry.csv" if outdir else None
    result = train_net_compression(spec, W0, train, cfg, telemetry_path=telemetry, test=test)
    point = RateDistortionPoint(run_id("net", cfg), cfg.beta_total, cfg.L, 1, result.bits_per_weight,
                                result.entropy_bits, result.bitstream.payload_bits, None, None,
                                result.accuracy)
    artifact = weights_artifact(spec, result.bitstream)
    if outdir:
        (outdir / "config.txt").write_text(echo(cfg), encoding="utf-8")
        save_model(outdir / "model.sthm", spec, result.quantized_weights)
        save_model(outdir / "baseline.sthm", spec, W0)
        (outdir / "weights.sthq").write_bytes(artifact)
    return NetPoint(cfg, result, point, artifact)
