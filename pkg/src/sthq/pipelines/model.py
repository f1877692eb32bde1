"""Small layer-list networks whose parameters live in one flat vector.

Keeping every trainable parameter in a single vector makes "quantize all the
weights" a matter of reshaping that vector into columns.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor

MODEL_MAGIC = b"STHM"
MODEL_VERSION = 1

_ACTIVATIONS = ("relu", "tanh", "none")
_KINDS = ("dense", "conv", "upsample", "bottleneck")


def _act(x: Tensor, name: str) -> Tensor:
    if name == "relu":
        return ad.relu(x)
    if name == "tanh":
        return ad.tanh(x)
    if name == "none":
        return x
    raise ValueError(f"unknown activation {name!r}")


def dense(n_in: int, n_out: int, act: str = "relu") -> dict:
    return {"kind": "dense", "in": n_in, "out": n_out, "act": act}


def conv(c_in: int, c_out: int, k: int = 3, stride: int = 1, act: str = "relu") -> dict:
    return {"kind": "conv", "in": c_in, "out": c_out, "k": k, "stride": stride,
            "padding": k // 2, "act": act}


def upsample() -> dict:
    return {"kind": "upsample"}


def bottleneck() -> dict:
    return {"kind": "bottleneck"}


def _param_shapes(layer: dict) -> list[tuple[int, ...]]:
    if layer["kind"] == "dense":
        return [(layer["in"], layer["out"]), (layer["out"],)]
    if layer["kind"] == "conv":
        return [(layer["out"], layer["in"], layer["k"], layer["k"]), (layer["out"],)]
    return []


@dataclass
class ModelSpec:
    """Ordered layers; an optional bottleneck marker splits encoder from decoder."""

    layers: list[dict]
    input_shape: tuple[int, ...]
    meta: dict = field(default_factory=dict)
    _offsets: list = field(init=False, repr=False)

    def __post_init__(self):
        self.input_shape = tuple(int(s) for s in self.input_shape)
        if sum(l["kind"] == "bottleneck" for l in self.layers) > 1:
            raise ValueError("at most one bottleneck marker")
        offsets, pos = [], 0
        for layer in self.layers:
            if layer.get("kind") not in _KINDS:
                raise ValueError(f"unknown layer kind {layer.get('kind')!r}")
            if "act" in layer and layer["act"] not in _ACTIVATIONS:
                raise ValueError(f"unknown activation {layer['act']!r}")
            spans = []
            for shape in _param_shapes(layer):
                n = math.prod(shape)
                spans.append((pos, pos + n, shape))
                pos += n
            offsets.append(spans)
        self._offsets = offsets
        self.n_params = pos

    # -- shapes ----------------------------------------------------------------

    def output_shape(self, upto: int | None = None) -> tuple[int, ...]:
        shape = self.input_shape
        for layer in self.layers[:upto]:
            if layer["kind"] == "dense":
                if shape[-1] != layer["in"]:
                    raise ad.ShapeError(f"dense expects {layer['in']} inputs, gets {shape}")
                shape = shape[:-1] + (layer["out"],)
            elif layer["kind"] == "conv":
                c, h, w = shape
                if c != layer["in"]:
                    raise ad.ShapeError(f"conv expects {layer['in']} channels, gets {shape}")
                k, s, p = layer["k"], layer["stride"], layer["padding"]
                shape = (layer["out"], (h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1)
            elif layer["kind"] == "upsample":
                c, h, w = shape
                shape = (c, 2 * h, 2 * w)
        return shape

    @property
    def bottleneck_index(self) -> int | None:
        for i, layer in enumerate(self.layers):
            if layer["kind"] == "bottleneck":
                return i
        return None

    @property
    def bottleneck_shape(self) -> tuple[int, ...]:
        i = self.bottleneck_index
        if i is None:
            raise ValueError("model has no bottleneck")
        return self.output_shape(i)

    def validate_autoencoder(self) -> None:
        if self.output_shape() != self.input_shape:
            raise ad.ShapeError(f"autoencoder output {self.output_shape()} != input {self.input_shape}")
        if math.prod(self.bottleneck_shape) >= math.prod(self.input_shape):
            raise ValueError("bottleneck must be smaller than the input")

    # -- parameters ------------------------------------------------------------

    def init_weights(self, rng: np.random.Generator) -> np.ndarray:
        """He-normal kernels, zero biases."""
        W = np.zeros(self.n_params)
        for layer, spans in zip(self.layers, self._offsets):
            if not spans:
                continue
            a, b, shape = spans[0]
            fan_in = shape[0] if layer["kind"] == "dense" else math.prod(shape[1:])
            W[a:b] = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=b - a)
        return W

    def kernel_mask(self) -> np.ndarray:
        """True for kernel entries, False for biases (for weight decay)."""
        mask = np.zeros(self.n_params, dtype=bool)
        for spans in self._offsets:
            if spans:
                a, b, _ = spans[0]
                mask[a:b] = True
        return mask

    def _params(self, W, i):
        out = []
        for a, b, shape in self._offsets[i]:
            if isinstance(W, Tensor):
                out.append(ad.reshape(ad.getitem(W, slice(a, b)), shape))
            else:
                out.append(np.asarray(W[a:b]).reshape(shape))
        return out

    # -- forward ---------------------------------------------------------------

    def _run(self, W, x, start: int, stop: int):
        h = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
        for i in range(start, stop):
            layer = self.layers[i]
            kind = layer["kind"]
            if kind == "dense":
                w, b = self._params(W, i)
                h = _act(ad.matmul(h, w) + b, layer["act"])
            elif kind == "conv":
                w, b = self._params(W, i)
                h = _act(ad.conv2d(h, w, b, stride=layer["stride"], padding=layer["padding"]),
                         layer["act"])
            elif kind == "upsample":
                h = ad.upsample2x(h)
        return h

    def forward(self, W, x) -> Tensor:
        """Whole network; a bottleneck marker acts as the identity."""
        return self._run(W, x, 0, len(self.layers))

    def encode(self, W, x) -> Tensor:
        return self._run(W, x, 0, self.bottleneck_index)

    def decode(self, W, z) -> Tensor:
        return self._run(W, z, self.bottleneck_index + 1, len(self.layers))

    # -- serialization ---------------------------------------------------------

    def to_json(self) -> bytes:
        doc = {"layers": self.layers, "input_shape": list(self.input_shape), "meta": self.meta}
        return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")

    @classmethod
    def from_json(cls, blob: bytes) -> "ModelSpec":
        doc = json.loads(blob.decode("utf-8"))
        return cls(doc["layers"], tuple(doc["input_shape"]), doc.get("meta", {}))

    def spec_hash(self) -> bytes:
        return hashlib.sha256(self.to_json()).digest()


def save_model(path, spec: ModelSpec, W: np.ndarray) -> bytes:
    """Write magic | version u8 | spec length u32 | spec JSON | count u64 | f32 weights."""
    blob = model_bytes(spec, W)
    with open(path, "wb") as fh:
        fh.write(blob)
    return blob


def model_bytes(spec: ModelSpec, W: np.ndarray) -> bytes:
    W = np.asarray(W)
    if W.shape != (spec.n_params,):
        raise ValueError(f"expected {spec.n_params} weights, got {W.shape}")
    js = spec.to_json()
    return b"".join([
        MODEL_MAGIC, struct.pack("<BI", MODEL_VERSION, len(js)), js,
        struct.pack("<Q", W.size), W.astype("<f4").tobytes(),
    ])


def parse_model(blob: bytes) -> tuple[ModelSpec, np.ndarray]:
    if blob[:4] != MODEL_MAGIC:
        raise ValueError("not a model file (bad magic)")
    version, n = struct.unpack_from("<BI", blob, 4)
    if version != MODEL_VERSION:
        raise ValueError(f"unsupported model file version {version}")
    pos = 9
    spec = ModelSpec.from_json(blob[pos : pos + n])
    pos += n
    (count,) = struct.unpack_from("<Q", blob, pos)
    pos += 8
    if count != spec.n_params or len(blob) != pos + 4 * count:
        raise ValueError("model file weight count does not match its layer specs")
    W = np.frombuffer(blob, dtype="<f4", count=count, offset=pos).astype(np.float64)
    return spec, W


def load_model(path) -> tuple[ModelSpec, np.ndarray]:
    with open(path, "rb") as fh:
        return parse_model(fh.read())


def mlp(sizes: list[int], act: str = "relu") -> ModelSpec:
    layers = [dense(a, b, act) for a, b in zip(sizes[:-2], sizes[1:-1])]
    layers.append(dense(sizes[-2], sizes[-1], "none"))
    return ModelSpec(layers, (sizes[0],))


def conv_autoencoder(channels: int = 1, hidden: int = 16, bottleneck_channels: int = 4,
                     size: int = 16) -> ModelSpec:
    """Two stride-2 convs down to the bottleneck, two upsample+conv stages back up."""
    layers = [
        conv(channels, hidden, 3, 2, "relu"),
        conv(hidden, bottleneck_channels, 3, 2, "none"),
        bottleneck(),
        upsample(),
        conv(bottleneck_channels, hidden, 3, 1, "relu"),
        upsample(),
        conv(hidden, channels, 3, 1, "none"),
    ]
    spec = ModelSpec(layers, (channels, size, size))
    spec.validate_autoencoder()
    return spec
