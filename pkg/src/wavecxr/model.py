"""A small numpy convolutional network with per-class logistic outputs.

Arrays are ``float64`` throughout. Convolutions are 'valid' (no padding),
weights are ``(out, in, kh, kw)``; dense weights are ``(in, out)``. A dense
layer that follows a convolution flattens its input in (C, H, W) order.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from .dataset import N_CLASSES
from .errors import (
    CheckpointError,
    FreezeAllError,
    InputShapeMismatchError,
    ShapeChainMismatchError,
    ShapeMismatchError,
)

CONV = "conv"
DENSE = "dense"
RELU = "relu"
NONE = "none"

PROB_CLAMP = 1e-12


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_size: int  # input channels (conv) or input width (dense)
    out_size: int
    kernel: tuple = (3, 3)
    stride: int = 1
    activation: str = RELU
    frozen: bool = False

    @classmethod
    def conv(cls, in_ch, out_ch, kernel=(3, 3), stride=1, activation=RELU):
        return cls(CONV, in_ch, out_ch, tuple(kernel), stride, activation)

    @classmethod
    def dense(cls, in_width, out_width, activation=RELU):
        return cls(DENSE, in_width, out_width, (1, 1), 1, activation)

    @property
    def weight_shape(self):
        if self.kind == CONV:
            return (self.out_size, self.in_size) + tuple(self.kernel)
        return (self.in_size, self.out_size)

    @property
    def n_bias(self):
        return self.out_size

    @property
    def fan_in(self):
        if self.kind == CONV:
            return self.in_size * self.kernel[0] * self.kernel[1]
        return self.in_size


@dataclass
class Layer:
    spec: LayerSpec
    weight: np.ndarray
    bias: np.ndarray

    @property
    def frozen(self):
        return self.spec.frozen


@dataclass
class Model:
    layers: list
    input_shape: tuple
    seed: int = 0

    def __len__(self):
        return len(self.layers)

    def arrays(self):
        for layer in self.layers:
            yield layer.weight
            yield layer.bias

    def copy(self):
        return Model(
            [Layer(l.spec, l.weight.copy(), l.bias.copy()) for l in self.layers],
            tuple(self.input_shape),
            self.seed,
        )


@dataclass(frozen=True)
class Hyperparams:
    epochs: int = 15
    batch_size: int = 20
    learning_rate: float = 3e-4
    momentum: float = 0.9
    seed: int = 0
    # step decay: multiply the rate by lr_decay_gamma every lr_decay_step epochs (0 = off)
    lr_decay_step: int = 0
    lr_decay_gamma: float = 0.1

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")

    def rate_for_epoch(self, epoch: int) -> float:
        if self.lr_decay_step > 0:
            return self.learning_rate * self.lr_decay_gamma ** (epoch // self.lr_decay_step)
        return self.learning_rate


def default_specs(in_channels: int, n_classes: int = N_CLASSES, size=(64, 64)):
    """Desk-scale network: conv 3x3 (->8), conv 3x3 stride 2 (->16), dense 64, linear head.

    ``size`` is the input ``(H, W)``.
    """
    h, w = size
    h2 = _conv_out(_conv_out(h, 3, 1), 3, 2)
    w2 = _conv_out(_conv_out(w, 3, 1), 3, 2)
    return [
        LayerSpec.conv(in_channels, 8, (3, 3), 1),
        LayerSpec.conv(8, 16, (3, 3), 2),
        LayerSpec.dense(16 * h2 * w2, 64),
        LayerSpec.dense(64, n_classes, activation=NONE),
    ]


def _conv_out(size, kernel, stride):
    return (size - kernel) // stride + 1


def _check_chain(specs, input_shape):
    shape = tuple(input_shape)
    for i, s in enumerate(specs):
        if s.kind == CONV:
            if len(shape) != 3:
                raise ShapeChainMismatchError(i, "convolution after a dense layer")
            c, h, w = shape
            if c != s.in_size:
                raise ShapeChainMismatchError(i, f"expects {s.in_size} channels, gets {c}")
            kh, kw = s.kernel
            if h < kh or w < kw or s.stride < 1:
                raise ShapeChainMismatchError(i, f"kernel {kh}x{kw} does not fit {h}x{w}")
            shape = (s.out_size, _conv_out(h, kh, s.stride), _conv_out(w, kw, s.stride))
        elif s.kind == DENSE:
            width = int(np.prod(shape))
            if width != s.in_size:
                raise ShapeChainMismatchError(i, f"expects width {s.in_size}, gets {width}")
            shape = (s.out_size,)
        else:
            raise ShapeChainMismatchError(i, f"unknown layer kind {s.kind!r}")
        if s.activation not in (RELU, NONE):
            raise ShapeChainMismatchError(i, f"unknown activation {s.activation!r}")
    if specs and (specs[-1].activation != NONE or shape != (N_CLASSES,)):
        raise ShapeChainMismatchError(len(specs) - 1, f"head must be linear with {N_CLASSES} outputs")
    return shape


def init_model(specs, seed: int = 0, input_shape=None) -> Model:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.

    ``input_shape`` is ``(C, H, W)`` for convolutional stacks; it may be
    omitted when the first layer is dense.
    """
    specs = list(specs)
    if not specs:
        raise ShapeChainMismatchError(0, "empty layer list")
    if input_shape is None:
        if specs[0].kind != DENSE:
            raise ShapeChainMismatchError(0, "input_shape is required for convolutional models")
        input_shape = (specs[0].in_size,)
    _check_chain(specs, input_shape)
    rng = np.random.default_rng(seed)
    layers = []
    for s in specs:
        bound = 1.0 / np.sqrt(s.fan_in)
        w = rng.uniform(-bound, bound, size=s.weight_shape)
        layers.append(Layer(s, w, np.zeros(s.n_bias)))
    return Model(layers, tuple(input_shape), seed)


def freeze_first(model: Model, k: int) -> Model:
    """Return a copy whose first ``k`` layers are frozen and the rest trainable."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k >= len(model.layers):
        raise FreezeAllError(k, len(model.layers))
    out = model.copy()
    for i, layer in enumerate(out.layers):
        layer.spec = replace(layer.spec, frozen=i < k)
    return out


# ---------------------------------------------------------------------------
# forward / backward


def _windows(x, kernel, stride):
    kh, kw = kernel
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))  # (B, C, H', W', kh, kw)
    return win[:, :, ::stride, ::stride]


def _conv_forward(x, layer):
    s = layer.spec
    win = _windows(x, s.kernel, s.stride)
    b, c, oh, ow, kh, kw = win.shape
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(b * oh * ow, c * kh * kw)
    out = cols @ layer.weight.reshape(s.out_size, -1).T + layer.bias
    return out.reshape(b, oh, ow, s.out_size).transpose(0, 3, 1, 2), cols


def _conv_backward(dout, cols, x_shape, layer, need_dx):
    s = layer.spec
    b, o, oh, ow = dout.shape
    d2 = dout.transpose(0, 2, 3, 1).reshape(b * oh * ow, o)
    dw = (d2.T @ cols).reshape(layer.weight.shape)
    db = d2.sum(axis=0)
    if not need_dx:
        return None, dw, db
    kh, kw = s.kernel
    c = s.in_size
    dcols = (d2 @ layer.weight.reshape(o, -1)).reshape(b, oh, ow, c, kh, kw)
    dx = np.zeros(x_shape)
    st = s.stride
    for i in range(kh):
        for j in range(kw):
            dx[:, :, i : i + st * oh : st, j : j + st * ow : st] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return dx, dw, db


def _check_input(model: Model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1:] != tuple(model.input_shape):
        raise InputShapeMismatchError(
            f"model expects inputs of shape {tuple(model.input_shape)}, got {x.shape[1:]}"
        )
    return x


def forward_logits(model: Model, x, keep_cache: bool = False):
    x = _check_input(model, x)
    cache = []
    a = x
    for layer in model.layers:
        s = layer.spec
        a_in = a
        if s.kind == CONV:
            z, aux = _conv_forward(a_in, layer)
        else:
            a_in = a.reshape(a.shape[0], -1)
            z, aux = a_in @ layer.weight + layer.bias, None
        a = np.maximum(z, 0.0) if s.activation == RELU else z
        if keep_cache:
            cache.append((a_in, aux, z, a.shape))
    return (a, cache) if keep_cache else a


def relu(z):
    return np.maximum(z, 0.0)


def forward(model: Model, x) -> np.ndarray:
    """Per-class probabilities, shape ``(B, 14)``."""
    return expit(forward_logits(model, x))


def _check_pair(probs, labels):
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape:
        raise ShapeMismatchError(f"probabilities {p.shape} vs labels {y.shape}")
    return p, y


def loss(probs, labels) -> float:
    """Mean binary cross-entropy over batch and classes, with clamped probabilities."""
    p, y = _check_pair(probs, labels)
    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


@dataclass
class Gradients:
    weights: list
    biases: list

    def arrays(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b


def backward(model: Model, x, labels):
    """Gradients of :func:`loss` for every layer; frozen layers get zeros.

    Returns ``(gradients, loss_value)``.
    """
    logits, cache = forward_logits(model, x, keep_cache=True)
    probs = expit(logits)
    p, y = _check_pair(probs, labels)
    value = loss(p, y)
    # d(loss)/d(logit); zero where the clamp is active
    inside = (p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP)
    delta = np.where(inside, p - y, 0.0) / p.size

    n = len(model.layers)
    trainable = [not l.frozen for l in model.layers]
    first_trainable = next((i for i, t in enumerate(trainable) if t), n)
    dws = [np.zeros_like(l.weight) for l in model.layers]
    dbs = [np.zeros_like(l.bias) for l in model.layers]
    for i in range(n - 1, first_trainable - 1, -1):
        layer = model.layers[i]
        a_in, aux, z, _ = cache[i]
        if layer.spec.activation == RELU:
            delta = delta * (z > 0)
        need_dx = i > first_trainable
        if layer.spec.kind == CONV:
            dx, dw, db = _conv_backward(delta, aux, a_in.shape, layer, need_dx)
        else:
            dw = a_in.T @ delta
            db = delta.sum(axis=0)
            dx = delta @ layer.weight.T if need_dx else None
        if trainable[i]:
            dws[i], dbs[i] = dw, db
        if need_dx:
            delta = dx.reshape(cache[i - 1][3])
    return Gradients(dws, dbs), value


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class OptimizerState:
    velocities: list = field(default_factory=list)  # [(v_weight, v_bias), ...]


def init_optimizer(model: Model) -> OptimizerState:
    return OptimizerState([(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in model.layers])


def sgdm_step(model: Model, state: OptimizerState, grads: Gradients, hp: Hyperparams, learning_rate=None):
    """``v <- momentum*v - lr*g``; ``w <- w + v`` on trainable arrays, in place.

    Returns ``(model, state)`` for chaining.
    """
    lr = hp.learning_rate if learning_rate is None else learning_rate
    if len(grads.weights) != len(model.layers) or len(state.velocities) != len(model.layers):
        raise ShapeMismatchError("gradient / optimizer state does not match the model")
    for layer, (vw, vb), gw, gb in zip(model.layers, state.velocities, grads.weights, grads.biases):
        if layer.frozen:
            continue
        for param, vel, g in ((layer.weight, vw, gw), (layer.bias, vb, gb)):
            if g.shape != param.shape:
                raise ShapeMismatchError(f"gradient shape {g.shape} != parameter shape {param.shape}")
            vel *= hp.momentum
            vel -= lr * g
            param += vel
    return model, state


# ---------------------------------------------------------------------------
# checkpoints

MAGIC = b"WCXRCKPT"
FORMAT_VERSION = 1
_KIND_TAGS = {CONV: 0, DENSE: 1}
_ACT_TAGS = {NONE: 0, RELU: 1}


def save_checkpoint(model: Model, path) -> None:
    """Little-endian binary checkpoint.

    Layout: magic, u32 version, u32 layer count, u32 input rank, i64 input
    dims, i64 seed; then per layer: u8 kind, u8 activation, u8 frozen,
    i64 in, out, kernel h, kernel w, stride, followed by the weight and bias
    arrays as little-endian float64.
    """
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(model.layers))]
    parts.append(struct.pack("<I", len(model.input_shape)))
    parts.append(struct.pack(f"<{len(model.input_shape)}q", *model.input_shape))
    parts.append(struct.pack("<q", int(model.seed)))
    for layer in model.layers:
        s = layer.spec
        parts.append(struct.pack("<BBB", _KIND_TAGS[s.kind], _ACT_TAGS[s.activation], int(s.frozen)))
        parts.append(struct.pack("<5q", s.in_size, s.out_size, s.kernel[0], s.kernel[1], s.stride))
        parts.append(layer.weight.astype("<f8").tobytes())
        parts.append(layer.bias.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path) -> Model:
    data = Path(path).read_bytes()
    try:
        if data[: len(MAGIC)] != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        pos = len(MAGIC)
        version, n_layers = struct.unpack_from("<II", data, pos)
        pos += 8
        if version != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        (rank,) = struct.unpack_from("<I", data, pos)
        pos += 4
        input_shape = struct.unpack_from(f"<{rank}q", data, pos)
        pos += 8 * rank
        (seed,) = struct.unpack_from("<q", data, pos)
        pos += 8
        kinds = {v: k for k, v in _KIND_TAGS.items()}
        acts = {v: k for k, v in _ACT_TAGS.items()}
        layers = []
        for _ in range(n_layers):
            kind, act, frozen = struct.unpack_from("<BBB", data, pos)
            pos += 3
            in_size, out_size, kh, kw, stride = struct.unpack_from("<5q", data, pos)
            pos += 40
            spec = LayerSpec(kinds[kind], in_size, out_size, (kh, kw), stride, acts[act], bool(frozen))
            n_w = int(np.prod(spec.weight_shape))
            w = np.frombuffer(data, dtype="<f8", count=n_w, offset=pos).reshape(spec.weight_shape)
            pos += 8 * n_w
            b = np.frombuffer(data, dtype="<f8", count=spec.n_bias, offset=pos)
            pos += 8 * spec.n_bias
            layers.append(Layer(spec, w.astype(np.float64), b.astype(np.float64)))
    except (struct.error, KeyError, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from exc
    if pos != len(data):
        raise CheckpointError(f"{path}: trailing bytes after last layer")
    _check_chain([l.spec for l in layers], input_shape)
    return Model(layers, tuple(input_shape), seed)
