"""Compressing the weights of a small classifier by soft-to-hard scalar quantization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from .. import coding
from ..annealing import (
    AnnealState,
    HardSwitchPolicy,
    TelemetryWriter,
    exponential_step,
    hard_switch_reached,
)
from ..autodiff import NonFiniteError, Tensor
from ..entropy import RunningHistogram, hard_histogram, sample_entropy
from ..quantizer import CenterSet, hard_quantize, init_centers, soft_assign
from ..rng import child_seed, stream
from .data import classification_data
from .metrics import accuracy
from .model import ModelSpec, mlp
from .rd import RateTerm, RDObjectiveConfig, TrainingDiverged, rd_loss, sample_loss


@dataclass
class NetCompressConfig:
    dataset: str = "moons"
    n_train: int = 4000
    n_test: int = 2000
    hidden: int = 128
    depth: int = 2
    batch: int = 128
    baseline_iters: int = 3000
    baseline_lr: float = 0.05
    L: int = 16
    beta_total: float = 0.01
    lam: float = 0.0
    lr: float = 0.01
    center_lr: float = 1e-5
    momentum: float = 0.9
    growth: float = 1.001
    switch_factor: float = 20.0
    finetune_iters: int = 300
    hist_interval: int = 10
    init_iters: int = 300
    coder: str = "arith"
    seed: int = 0


@dataclass
class NetCompressResult:
    spec: ModelSpec
    baseline_weights: np.ndarray
    centers: CenterSet
    symbols: np.ndarray
    bitstream: coding.Bitstream
    baseline_accuracy: float
    accuracy: float
    entropy_bits: float
    sigma_final: float
    iterations: int

    @property
    def quantized_weights(self) -> np.ndarray:
        return self.centers.values[self.symbols, 0]

    @property
    def n_weights(self) -> int:
        return int(self.symbols.size)

    @property
    def bits_per_weight(self) -> float:
        return self.bitstream.total_bits / self.n_weights

    @property
    def compression_factor(self) -> float:
        return coding.coded_size_report(self.n_weights, self.centers.L, self.bitstream.payload_bits,
                                        dim=1, header_bits=self.bitstream.header_bits
                                        - 32 * self.centers.L)


def build_classifier(cfg: NetCompressConfig) -> ModelSpec:
    spec = mlp([2] + [cfg.hidden] * cfg.depth + [2])
    spec.meta = {"task": "classifier", "dataset": cfg.dataset}
    return spec


def make_data(cfg: NetCompressConfig):
    train = classification_data(cfg.dataset, cfg.n_train, stream(cfg.seed, "train-data"))
    test = classification_data(cfg.dataset, cfg.n_test, stream(cfg.seed, "test-data"))
    return train, test


def evaluate(spec: ModelSpec, W: np.ndarray, data) -> float:
    x, y = data
    return accuracy(spec.forward(W, x).data, y)


def train_baseline(spec: ModelSpec, train, cfg: NetCompressConfig) -> np.ndarray:
    """Plain cross-entropy training with SGD + momentum and a cosine learning rate."""
    rng = stream(cfg.seed, "baseline")
    W = Tensor(spec.init_weights(rng), requires_grad=True)
    opt = ad.SGD([W], lr=cfg.baseline_lr, momentum=cfg.momentum)
    x, y = train
    for it in range(cfg.baseline_iters):
        idx = rng.integers(0, len(x), cfg.batch)
        opt.lr = cfg.baseline_lr * 0.5 * (1 + np.cos(np.pi * it / cfg.baseline_iters))
        try:
            loss = ad.cross_entropy(spec.forward(W, x[idx]), y[idx])
            loss.backward()
        except NonFiniteError as err:
            raise TrainingDiverged(f"baseline training diverged at iteration {it}: {err}") from err
        opt.step()
    return W.data.copy()


def train_net_compression(spec: ModelSpec, W0: np.ndarray, train, cfg: NetCompressConfig,
                          telemetry_path=None, test=None) -> NetCompressResult:
    """Soft-to-hard scalar quantization of every parameter, then hard fine-tuning.

    The soft phase anneals sigma exponentially until it has grown by
    ``switch_factor``; afterwards the forward pass uses the hard-quantized
    weights, so only the centers keep learning (at a tenth of the rate).
    """
    rng = stream(cfg.seed, "net-compress")
    objective = RDObjectiveConfig(cfg.beta_total, cfg.lam, "cross-entropy")
    centers, sigma0 = init_centers(W0, cfg.L, iters=cfg.init_iters,
                                   seed=child_seed(cfg.seed, "net-centers"))
    W = Tensor(W0.copy(), requires_grad=True)
    # a center's gradient sums over every weight assigned to it, hence its own step size
    opt = ad.SGD([W], lr=cfg.lr, momentum=cfg.momentum)
    opt_c = ad.SGD([centers.tensor], lr=cfg.center_lr, momentum=cfg.momentum)
    state = AnnealState(sigma0, mode="exponential", growth=cfg.growth)
    policy = HardSwitchPolicy("factor", cfg.switch_factor)
    hist = RunningHistogram(cfg.L, capacity=1, interval=cfg.hist_interval)
    x, y = train
    writer = TelemetryWriter(telemetry_path) if telemetry_path else None
    it = 0
    try:
        while not hard_switch_reached(state, policy):
            symbols, w_hard = hard_quantize(W.data, centers.values)
            pmf = hist.update([symbols])
            idx = rng.integers(0, len(x), cfg.batch)
            columns = ad.reshape(W, (W.size, 1))
            phi = soft_assign(columns, centers, state.sigma)
            w_soft = ad.reshape(ad.matmul(phi, centers.tensor), (W.size,))
            logits = spec.forward(w_soft, x[idx])
            loss, parts = rd_loss(logits, y[idx], [RateTerm(columns, centers, pmf, phi)],
                                  state.sigma, objective, weights=W)
            loss.backward()
            opt.step()
            opt_c.step()
            if writer:
                e_hard = sample_loss(spec.forward(w_hard.ravel(), x[idx]), y[idx], "cross-entropy").item()
                e_soft = parts["distortion"]
                writer.write(it, state.sigma, e_soft, e_hard, e_hard - e_soft, "",
                             sample_entropy(pmf))
            state = exponential_step(state)
            it += 1
        # hard phase: assignments are frozen, the centers are fine-tuned
        symbols, _ = hard_quantize(W.data, centers.values)
        opt = ad.SGD([centers.tensor], lr=cfg.center_lr / 10, momentum=cfg.momentum)
        for _ in range(cfg.finetune_iters):
            idx = rng.integers(0, len(x), cfg.batch)
            w_hard = ad.reshape(ad.take_rows(centers.tensor, symbols), (W.size,))
            loss = ad.cross_entropy(spec.forward(w_hard, x[idx]), y[idx])
            loss.backward()
            opt.step()
            if writer:
                writer.write(it, state.sigma, "", loss.item(), "", "",
                             sample_entropy(hard_histogram(symbols, cfg.L)))
            it += 1
    except NonFiniteError as err:
        raise TrainingDiverged(f"net compression diverged at iteration {it}: {err}") from err
    finally:
        if writer:
            writer.close()
    centers.round_to_float32()
    stream_ = coding.encode(symbols, centers=centers.values, coder=cfg.coder, L=cfg.L)
    result = NetCompressResult(
        spec=spec, baseline_weights=W0, centers=centers, symbols=symbols, bitstream=stream_,
        baseline_accuracy=evaluate(spec, W0, test) if test is not None else float("nan"),
        accuracy=float("nan"), entropy_bits=sample_entropy(hard_histogram(symbols, cfg.L)),
        sigma_final=state.sigma, iterations=it)
    if test is not None:
        result.accuracy = evaluate(spec, result.quantized_weights, test)
    return result


# -- artifact ----------------------------------------------------------------------------

def weights_artifact(spec: ModelSpec, bitstream: coding.Bitstream) -> bytes:
    """Architecture hash (32 bytes) followed by the weight container."""
    return spec.spec_hash() + bitstream.to_bytes()


def decode_weights_artifact(blob: bytes, spec: ModelSpec) -> np.ndarray:
    """Recover the quantized weight vector; the architecture hash must match."""
    if len(blob) < 32:
        raise coding.DecodeError("artifact too short")
    if blob[:32] != spec.spec_hash():
        raise coding.DecodeError("artifact was produced for a different architecture")
    stream_, end = coding.Bitstream.from_bytes(blob, 32)
    if end != len(blob):
        raise coding.DecodeError("trailing bytes after the weight container")
    if stream_.dim != 1:
        raise coding.DecodeError("weight artifact must hold scalar centers")
    symbols = coding.decode(stream_)
    if symbols.size != spec.n_params:
        raise coding.DecodeError(f"artifact holds {symbols.size} weights, model needs {spec.n_params}")
    return stream_.centers.astype(np.float64)[symbols, 0]


__all__ = [
    "NetCompressConfig", "NetCompressResult", "build_classifier", "decode_weights_artifact",
    "evaluate", "make_data", "train_baseline", "train_net_compression", "weights_artifact",
]
