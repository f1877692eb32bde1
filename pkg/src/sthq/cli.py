"""Command-line entry point: ``sthq <command> [options] [key=value ...]``."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import coding
from .entropy import hard_histogram, sample_entropy
from .config import ConfigError, build, echo, parse_pairs, read_config_file
from .pipelines import experiments as ex
from .pipelines.autoencoder import (
    AEConfig,
    build_autoencoder,
    compress_image,
    decompress_image,
    payload_bits,
    evaluate_images,
    train_autoencoder_stage1,
)
from .pipelines.imageio import read_image, read_image_dir, write_image
from .pipelines.metrics import RateDistortionPoint, psnr, write_metrics
from .pipelines.model import load_model, save_model
from .pipelines.netcompress import (
    NetCompressConfig,
    decode_weights_artifact,
    evaluate,
    make_data,
)

SWEEP_DEFAULTS = {"ae": [1e-4, 3e-4, 1e-3], "net": [0.1, 0.3, 1.0]}
ABLATION_DEFAULTS = {
    "vector_L": 256, "vector_patch": 2, "vector_betas": [1e-4, 3e-4, 1e-3],
    "scalar_L": 4, "scalar_betas": [1e-4, 1e-3, 1e-2],
}


def threads() -> int:
    """Evaluation parallelism, capped by STHQ_THREADS (default 1)."""
    raw = os.environ.get("STHQ_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"STHQ_THREADS={raw!r} is not an integer") from None


def _values(args) -> dict[str, str]:
    values = read_config_file(args.config) if args.config else {}
    values.update(parse_pairs(args.overrides))
    return values


def _outdir(args) -> Path:
    out = Path(args.out or f"runs/{args.command}")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_config(out: Path, cfg, extras=None) -> None:
    (out / "config.txt").write_text(echo(cfg, extras), encoding="utf-8")


def _report(points: list[RateDistortionPoint]) -> None:
    for p in points:
        extra = f"mse {p.mse:.6f}" if p.mse is not None else f"accuracy {p.accuracy:.4f}"
        print(f"{p.run_id}  beta {p.beta_total:g}  rate {p.rate:.4f}  H {p.entropy_bits:.4f}  {extra}")


# -- commands ------------------------------------------------------------------------------

def cmd_train_ae(args) -> None:
    cfg, _ = build(AEConfig, _values(args))
    out = _outdir(args)
    _write_config(out, cfg)
    train, test = ex.ae_data(cfg)
    spec = build_autoencoder(cfg)
    W1 = train_autoencoder_stage1(spec, train, cfg)
    save_model(out / "stage1.sthm", spec, W1)
    pt = ex.ae_point(cfg, W1, train, test, out, threads())
    write_metrics(out / "metrics.csv", [pt.point])
    _report([pt.point])


def cmd_train_net(args) -> None:
    cfg, _ = build(NetCompressConfig, _values(args))
    out = _outdir(args)
    _write_config(out, cfg)
    pt = ex.net_point(cfg, outdir=out)
    write_metrics(out / "metrics.csv", [pt.point])
    _report([pt.point])


def _task_of(values: dict[str, str]) -> str:
    task = values.pop("task", "ae")
    if task not in ("ae", "net"):
        raise ConfigError(f"task must be ae or net, got {task!r}")
    return task


def _net_sweep(cfg: NetCompressConfig, betas, out: Path, label: str = "") -> list[ex.NetPoint]:
    from .pipelines.netcompress import build_classifier, train_baseline

    train, test = make_data(cfg)
    W0 = train_baseline(build_classifier(cfg), train, cfg)
    points = []
    for beta in betas:
        sub = out / f"{label}beta{beta:g}"
        sub.mkdir(parents=True, exist_ok=True)
        points.append(ex.net_point(replace(cfg, beta_total=float(beta)), W0, (train, test), sub))
    return points


def cmd_sweep(args) -> None:
    values = _values(args)
    task = _task_of(values)
    cls = AEConfig if task == "ae" else NetCompressConfig
    cfg, extras = build(cls, values, {"betas": SWEEP_DEFAULTS[task]})
    out = _outdir(args)
    _write_config(out, cfg, {"task": task, **extras})
    if task == "ae":
        points = [p.point for p in ex.ae_sweep(cfg, extras["betas"], outdir=out, threads=threads())]
    else:
        points = [p.point for p in _net_sweep(cfg, extras["betas"], out)]
    write_metrics(out / "metrics.csv", points)
    _report(points)


def cmd_ablation(args) -> None:
    values = _values(args)
    out = _outdir(args)
    if args.mode == "beta-zero":
        task = _task_of(values)
        cls = AEConfig if task == "ae" else NetCompressConfig
        cfg, _ = build(cls, values)
        _write_config(out, cfg, {"task": task, "mode": args.mode})
        betas = [0.0, cfg.beta_total]
        if task == "ae":
            points = [p.point for p in ex.ae_sweep(cfg, betas, outdir=out, threads=threads())]
        else:
            points = [p.point for p in _net_sweep(cfg, betas, out)]
        write_metrics(out / "metrics.csv", points)
        _report(points)
        return
    cfg, extras = build(AEConfig, values, ABLATION_DEFAULTS)
    _write_config(out, cfg, {"mode": args.mode, **extras})
    data = ex.ae_data(cfg)
    W1 = train_autoencoder_stage1(build_autoencoder(cfg), data[0], cfg)
    patch = int(extras["vector_patch"])
    vec_cfg = replace(cfg, L=int(extras["vector_L"]), ph=patch, pw=patch)
    sca_cfg = replace(cfg, L=int(extras["scalar_L"]), ph=1, pw=1)
    vec = ex.ae_sweep(vec_cfg, extras["vector_betas"], W1, data, out, threads(), "vector-")
    sca = ex.ae_sweep(sca_cfg, extras["scalar_betas"], W1, data, out, threads(), "scalar-")
    points = [p.point for p in vec + sca]
    write_metrics(out / "metrics.csv", points)
    wins = ex.matched_rate_wins([(p.point.rate, p.point.mse) for p in vec],
                                [(p.point.rate, p.point.mse) for p in sca])
    lines = [f"{p.point.run_id} bpp {p.point.rate:.4f} mse {p.point.mse:.6f} "
             f"{'beats' if w else 'does not beat'} scalar at matched bpp" for p, w in zip(vec, wins)]
    lines.append(f"vector wins {sum(wins)} of {len(wins)}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _report(points)
    print("\n".join(lines))


def cmd_encode(args) -> None:
    result = ex.load_ae_result(args.model)
    image = read_image(args.input)
    if image.shape[0] != result.spec.input_shape[0]:
        image = image.mean(axis=0, keepdims=True)
    blob = compress_image(result, image, args.coder)
    Path(args.output).write_bytes(blob)
    bpp = payload_bits(blob) / (image.shape[1] * image.shape[2])
    print(f"{args.output}: {len(blob)} bytes on disk, payload {bpp:.4f} bpp")


def cmd_decode(args) -> None:
    result = ex.load_ae_result(args.model)
    image = decompress_image(Path(args.input).read_bytes(), result.spec, result.weights)
    write_image(args.output, image)
    print(f"{args.output}: {image.shape[2]}x{image.shape[1]}")


def _eval_ae(run: Path, args) -> list[RateDistortionPoint]:
    result = ex.load_ae_result(run)
    cfg, _ = build(AEConfig, read_config_file(run / "config.txt"))
    if args.images:
        images = [im.mean(axis=0, keepdims=True) for im in read_image_dir(args.images)]
        if not images:
            raise FileNotFoundError(f"no PNG/PGM/PPM images in {args.images}")
    else:
        images = list(ex.ae_data(cfg)[1])
    if len({im.shape for im in images}) == 1:
        groups = [np.stack(images)]
    else:
        groups = [im[None] for im in images]
    bits = pixels = 0
    sq = 0.0
    exact = True
    for group in groups:
        ev = evaluate_images(result, group, cfg.coder, threads())
        n = group.shape[0] * group.shape[2] * group.shape[3]
        bits, pixels, sq = bits + ev.coded_bits, pixels + n, sq + ev.mse * n
        exact &= ev.bit_exact
    entropy = ev.entropy_bpp
    if not exact:
        raise RuntimeError("decoded reconstruction differs from the in-memory hard path")
    m = sq / pixels
    return [RateDistortionPoint(ex.run_id("ae", cfg), cfg.beta_total, cfg.L, cfg.dim, bits / pixels,
                                entropy, bits, m, psnr(m), None)]


def _eval_net(run: Path) -> list[RateDistortionPoint]:
    cfg, _ = build(NetCompressConfig, read_config_file(run / "config.txt"))
    spec, _ = load_model(run / "model.sthm")
    blob = (run / "weights.sthq").read_bytes()
    W = decode_weights_artifact(blob, spec)
    stream_, _ = coding.Bitstream.from_bytes(blob, 32)
    symbols = coding.decode(stream_)
    H = sample_entropy(hard_histogram(symbols, stream_.L))
    acc = evaluate(spec, W, make_data(cfg)[1])
    return [RateDistortionPoint(ex.run_id("net", cfg), cfg.beta_total, cfg.L, 1,
                                stream_.total_bits / symbols.size, H, stream_.payload_bits,
                                None, None, acc)]


def cmd_eval(args) -> None:
    run = Path(args.model)
    if not (run / "config.txt").is_file():
        raise FileNotFoundError(f"{run} is not a run directory (config.txt missing)")
    points = _eval_net(run) if (run / "weights.sthq").is_file() else _eval_ae(run, args)
    out = _outdir(args)
    write_metrics(out / "metrics.csv", points)
    _report(points)


# -- parser ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sthq", description="Soft-to-hard quantization toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_cmd(name, func, help_, modes=None):
        p = sub.add_parser(name, help=help_)
        if modes:
            p.add_argument("mode", choices=modes)
        p.add_argument("--config", help="file of key=value lines")
        p.add_argument("--out", help="run directory (default runs/<command>)")
        p.add_argument("overrides", nargs="*", metavar="key=value", help="override config keys")
        p.set_defaults(func=func)
        return p

    run_cmd("train-ae", cmd_train_ae, "train the image autoencoder and code its test images")
    run_cmd("train-netcompress", cmd_train_net, "compress the weights of a small classifier")
    run_cmd("sweep-beta", cmd_sweep, "one run per beta (task=ae or task=net, betas=a,b,c)")
    run_cmd("ablation", cmd_ablation, "scalar-vs-vector or beta-zero comparison",
            ["scalar-vs-vector", "beta-zero"])

    p = sub.add_parser("encode", help="compress an image with a trained autoencoder run")
    p.add_argument("--model", required=True, help="train-ae run directory")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--coder", default="arith", choices=["arith", "huffman"])
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="reconstruct an image from an encode output")
    p.add_argument("--model", required=True, help="train-ae run directory")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="re-score a run directory from its artifacts")
    p.add_argument("--model", required=True, help="run directory")
    p.add_argument("--images", help="directory of images (autoencoder runs)")
    p.add_argument("--out", help="where to write metrics.csv (default runs/eval)")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    # key=value pairs may follow options that come after a positional, which
    # argparse leaves unparsed; collect them here
    args, rest = parser.parse_known_args(argv)
    loose = [r for r in rest if "=" in r and not r.startswith("-")]
    if len(loose) != len(rest) or (loose and not hasattr(args, "overrides")):
        parser.error(f"unrecognized arguments: {' '.join(rest)}")
    if loose:
        args.overrides = list(args.overrides) + loose
    try:
        args.func(args)
    except (ConfigError, FileNotFoundError, coding.DecodeError, ValueError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
