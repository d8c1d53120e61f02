"""Small dense networks in float64 numpy with hand-written backprop and Adam."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

RELU = "relu"
IDENTITY = "identity"
_ACTS = (RELU, IDENTITY)

CHECKPOINT_MAGIC = b"VRNNCKPT"
CHECKPOINT_VERSION = 1


class SignatureError(ValueError):
    """Checkpoint architecture does not match the receiving network."""


@dataclass
class Layer:
    W: np.ndarray  # (n_in, n_out)
    b: np.ndarray  # (n_out,)
    activation: str = RELU


class DenseNet:
    """Affine layers with optional ReLU, batch-first: inputs are (batch, n_in)."""

    def __init__(self, layers: list[Layer]):
        for a, b in zip(layers[:-1], layers[1:]):
            if a.W.shape[1] != b.W.shape[0]:
                raise ValueError(f"layer widths do not chain: {a.W.shape} -> {b.W.shape}")
        for layer in layers:
            if layer.activation not in _ACTS:
                raise ValueError(f"unknown activation {layer.activation!r}")
            if layer.b.shape != (layer.W.shape[1],):
                raise ValueError("bias shape mismatch")
        self.layers = layers

    @classmethod
    def build(cls, sizes: list[int], activations: list[str], rng: np.random.Generator) -> "DenseNet":
        """He-uniform init for ReLU layers, +-1/sqrt(fan_in) for linear ones."""
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        layers = []
        for n_in, n_out, act in zip(sizes[:-1], sizes[1:], activations):
            limit = np.sqrt(6.0 / n_in) if act == RELU else 1.0 / np.sqrt(n_in)
            W = rng.uniform(-limit, limit, size=(n_in, n_out))
            b = np.zeros(n_out) if act == RELU else rng.uniform(-limit, limit, size=n_out)
            layers.append(Layer(W, b, act))
        return cls(layers)

    @property
    def n_in(self) -> int:
        return self.layers[0].W.shape[0]

    @property
    def n_out(self) -> int:
        return self.layers[-1].W.shape[1]

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.W, layer.b]
        return out

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def signature(self) -> list[tuple]:
        return [(layer.W.shape, layer.activation) for layer in self.layers]

    def copy(self) -> "DenseNet":
        return DenseNet([Layer(l.W.copy(), l.b.copy(), l.activation) for l in self.layers])

    def load_from(self, other: "DenseNet") -> None:
        if other.signature() != self.signature():
            raise SignatureError("cannot copy parameters between different architectures")
        for dst, src in zip(self.params(), other.params()):
            dst[...] = src

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Return output and the cache of layer inputs and pre-activations."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.n_in:
            raise ValueError(f"input width {x.shape[1]} != {self.n_in}")
        cache = []
        h = x
        for layer in self.layers:
            z = h @ layer.W + layer.b
            cache.append((h, z))
            h = np.maximum(z, 0.0) if layer.activation == RELU else z
        return h, cache

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache, grad_out: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients for params() order and the gradient w.r.t. the input."""
        if cache is None or len(cache) != len(self.layers):
            raise ValueError("backward needs the cache from forward")
        g = np.asarray(grad_out, dtype=float)
        grads: list[np.ndarray] = [None] * (2 * len(self.layers))
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            h, z = cache[i]
            if layer.activation == RELU:
                g = g * (z > 0)
            grads[2 * i] = h.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ layer.W.T
        return grads, g


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[np.ndarray], lr: float = 1e-4, **kw) -> "AdamState":
        return cls(lr=lr, m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params], **kw)


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState) -> None:
    """Bias-corrected Adam update applied in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and optimizer state differ in length")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch {p.shape} vs {g.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


# -- checkpoints -------------------------------------------------------------
# layout: magic, u32 version, u32 n_arrays, then per array a header
# (u16 name length, name, u8 ndim, u32 dims...) and finally the raw
# little-endian float64 payloads in header order.

def save_arrays(path, arrays: list[tuple[str, np.ndarray]]) -> None:
    head = bytearray(CHECKPOINT_MAGIC)
    head += struct.pack("<II", CHECKPOINT_VERSION, len(arrays))
    for name, arr in arrays:
        raw = name.encode()
        head += struct.pack("<H", len(raw)) + raw + struct.pack("<B", arr.ndim)
        head += struct.pack(f"<{arr.ndim}I", *arr.shape)
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays)
    Path(path).write_bytes(bytes(head) + body)


def load_arrays(path) -> list[tuple[str, np.ndarray]]:
    data = Path(path).read_bytes()
    try:
        if data[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
            raise ValueError("not a checkpoint file")
        off = len(CHECKPOINT_MAGIC)
        version, n = struct.unpack_from("<II", data, off)
        off += 8
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        headers = []
        for _ in range(n):
            (ln,) = struct.unpack_from("<H", data, off)
            off += 2
            name = data[off:off + ln].decode()
            off += ln
            (ndim,) = struct.unpack_from("<B", data, off)
            off += 1
            shape = struct.unpack_from(f"<{ndim}I", data, off)
            off += 4 * ndim
            headers.append((name, shape))
        out = []
        for name, shape in headers:
            size = int(np.prod(shape)) * 8
            if off + size > len(data):
                raise ValueError("truncated payload")
            out.append((name, np.frombuffer(data, dtype="<f8", count=size // 8, offset=off).reshape(shape).copy()))
            off += size
        if off != len(data):
            raise ValueError("trailing bytes")
    except (struct.error, UnicodeDecodeError) as exc:
        raise ValueError(f"corrupt checkpoint {path}") from exc
    return out


def _named(net: DenseNet, prefix: str) -> list[tuple[str, np.ndarray]]:
    out = []
    for i, layer in enumerate(net.layers):
        out += [(f"{prefix}{i}.{layer.activation}.W", layer.W), (f"{prefix}{i}.{layer.activation}.b", layer.b)]
    return out


def assign_arrays(named_params: list[tuple[str, np.ndarray]], stored: list[tuple[str, np.ndarray]]) -> None:
    sig = [(n, p.shape) for n, p in named_params]
    got = [(n, a.shape) for n, a in stored]
    if sig != got:
        raise SignatureError(f"checkpoint architecture {got} does not match {sig}")
    for (_, p), (_, a) in zip(named_params, stored):
        p[...] = a


def save_params(net: DenseNet, path) -> None:
    save_arrays(path, _named(net, "layer"))


def load_params(net: DenseNet, path) -> None:
    assign_arrays(_named(net, "layer"), load_arrays(path))
