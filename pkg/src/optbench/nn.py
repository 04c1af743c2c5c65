"""Feed-forward / convolutional networks over a flat parameter vector.

A network is described by a :class:`NetworkSpec` and evaluated against a
:class:`NetworkState`, which owns a single float64 parameter vector.  Each
layer's weight block is followed by its bias block, in layer order.  Inputs
are NCHW for image layers; a leading batch axis is optional everywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import prod, sqrt
from pathlib import Path
from typing import Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ContractError, ShapeError


@dataclass(frozen=True)
class Conv2d:
    out_channels: int
    kernel_h: int
    kernel_w: int
    stride: int = 1


@dataclass(frozen=True)
class MaxPool2d:
    window: int = 2
    stride: int = 2


@dataclass(frozen=True)
class Dense:
    out_features: int


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class Flatten:
    pass


LayerSpec = Union[Conv2d, MaxPool2d, Dense, ReLU, Flatten]
_LAYER_TYPES = {cls.__name__: cls for cls in (Conv2d, MaxPool2d, Dense, ReLU, Flatten)}


@dataclass(frozen=True)
class NetworkSpec:
    input_shape: tuple[int, ...]
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))

    def to_dict(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "layers": [{"kind": type(l).__name__, **vars(l)} for l in self.layers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        layers = []
        for entry in d["layers"]:
            entry = dict(entry)
            layers.append(_LAYER_TYPES[entry.pop("kind")](**entry))
        return cls(tuple(d["input_shape"]), tuple(layers))


def _layer_output_shape(index: int, layer: LayerSpec, shape: tuple[int, ...]) -> tuple[int, ...]:
    def fail(msg):
        raise ShapeError(f"layer {index} ({type(layer).__name__}): {msg}")

    if isinstance(layer, Conv2d):
        if min(layer.out_channels, layer.kernel_h, layer.kernel_w, layer.stride) < 1:
            fail("sizes must be >= 1")
        if len(shape) != 3:
            fail(f"expects a CxHxW input, got {shape}")
        _, h, w = shape
        if layer.kernel_h > h or layer.kernel_w > w:
            fail(f"kernel {layer.kernel_h}x{layer.kernel_w} exceeds input {h}x{w}")
        return (
            layer.out_channels,
            (h - layer.kernel_h) // layer.stride + 1,
            (w - layer.kernel_w) // layer.stride + 1,
        )
    if isinstance(layer, MaxPool2d):
        if min(layer.window, layer.stride) < 1:
            fail("sizes must be >= 1")
        if len(shape) != 3:
            fail(f"expects a CxHxW input, got {shape}")
        c, h, w = shape
        if layer.window > h or layer.window > w:
            fail(f"window {layer.window} exceeds input {h}x{w}")
        return (c, (h - layer.window) // layer.stride + 1, (w - layer.window) // layer.stride + 1)
    if isinstance(layer, Dense):
        if layer.out_features < 1:
            fail("out_features must be >= 1")
        if len(shape) != 1:
            fail(f"expects a flat input, got {shape} (add a Flatten layer)")
        return (layer.out_features,)
    if isinstance(layer, Flatten):
        return (prod(shape),)
    if isinstance(layer, ReLU):
        return shape
    raise TypeError(f"unknown layer type {type(layer)!r}")


def infer_shapes(spec: NetworkSpec) -> list[tuple[int, ...]]:
    """Per-layer output shapes (without batch axis)."""
    if not spec.input_shape or min(spec.input_shape) < 1:
        raise ShapeError(f"invalid input shape {spec.input_shape}")
    shapes = []
    shape = spec.input_shape
    for i, layer in enumerate(spec.layers):
        shape = _layer_output_shape(i, layer, shape)
        shapes.append(shape)
    return shapes


def _param_shapes(layer: LayerSpec, in_shape: tuple[int, ...]) -> tuple[tuple[int, ...], tuple[int, ...]] | None:
    if isinstance(layer, Conv2d):
        return (layer.out_channels, in_shape[0], layer.kernel_h, layer.kernel_w), (layer.out_channels,)
    if isinstance(layer, Dense):
        return (layer.out_features, in_shape[0]), (layer.out_features,)
    return None


@dataclass(frozen=True)
class ParamSlot:
    offset: int
    shape: tuple[int, ...]

    @property
    def size(self) -> int:
        return prod(self.shape)


def param_layout(spec: NetworkSpec) -> list[tuple[ParamSlot, ParamSlot] | None]:
    """(weight, bias) slots per layer, or None for parameter-free layers."""
    layout = []
    offset = 0
    in_shape = spec.input_shape
    for layer, out_shape in zip(spec.layers, infer_shapes(spec)):
        shapes = _param_shapes(layer, in_shape)
        if shapes is None:
            layout.append(None)
        else:
            w = ParamSlot(offset, shapes[0])
            offset += w.size
            b = ParamSlot(offset, shapes[1])
            offset += b.size
            layout.append((w, b))
        in_shape = out_shape
    return layout


@dataclass(frozen=True)
class NetworkState:
    spec: NetworkSpec
    params: np.ndarray
    layout: tuple = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        layout = tuple(param_layout(self.spec)) if self.layout is None else self.layout
        params = np.array(self.params, dtype=np.float64, copy=True).reshape(-1)
        n = sum(w.size + b.size for slots in layout if slots for w, b in [slots])
        if params.shape[0] != n:
            raise ShapeError(f"expected {n} parameters, got {params.shape[0]}")
        params.flags.writeable = False
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "layout", layout)

    @property
    def n_params(self) -> int:
        return self.params.shape[0]

    @property
    def output_shape(self) -> tuple[int, ...]:
        return infer_shapes(self.spec)[-1]

    def get_params(self) -> np.ndarray:
        return self.params.copy()

    def with_params(self, params: np.ndarray) -> "NetworkState":
        return NetworkState(self.spec, params, self.layout)

    def layer_params(self, index: int) -> tuple[np.ndarray, np.ndarray]:
        w, b = self.layout[index]
        return (
            self.params[w.offset:w.offset + w.size].reshape(w.shape),
            self.params[b.offset:b.offset + b.size].reshape(b.shape),
        )


def init_params(spec: NetworkSpec, seed: int) -> NetworkState:
    """Glorot-uniform weights and zero biases, fully determined by ``seed``."""
    layout = tuple(param_layout(spec))
    n = sum(w.size + b.size for slots in layout if slots for w, b in [slots])
    params = np.zeros(n)
    rng = np.random.default_rng(seed)
    for slots in layout:
        if slots is None:
            continue
        w, _ = slots
        receptive = prod(w.shape[2:])
        fan_out, fan_in = w.shape[0] * receptive, w.shape[1] * receptive
        limit = sqrt(6.0 / (fan_in + fan_out))
        params[w.offset:w.offset + w.size] = rng.uniform(-limit, limit, size=w.size)
    return NetworkState(spec, params, layout)


# --- forward / backward -----------------------------------------------------


@dataclass
class ForwardTrace:
    """Per-layer caches from a forward pass (always batched internally)."""

    caches: list
    batched: bool
    batch_size: int
    output_shape: tuple[int, ...]
    params: np.ndarray = field(repr=False)
    # im2col copies made on demand by per-sample backward, reused across calls
    cols: dict = field(default_factory=dict, repr=False)


def _conv_windows(x: np.ndarray, layer: Conv2d) -> np.ndarray:
    win = sliding_window_view(x, (layer.kernel_h, layer.kernel_w), axis=(2, 3))
    return win[:, :, ::layer.stride, ::layer.stride]


def _pool_windows(x: np.ndarray, layer: MaxPool2d) -> np.ndarray:
    win = sliding_window_view(x, (layer.window, layer.window), axis=(2, 3))
    return win[:, :, ::layer.stride, ::layer.stride]


def forward(state: NetworkState, x: np.ndarray) -> tuple[np.ndarray, ForwardTrace]:
    spec = state.spec
    x = np.asarray(x, dtype=np.float64)
    if x.shape == spec.input_shape:
        batched = False
        x = x[None]
    elif x.ndim == len(spec.input_shape) + 1 and x.shape[1:] == spec.input_shape:
        batched = True
    else:
        raise ShapeError(f"input shape {x.shape} does not match network input {spec.input_shape}")

    caches = []
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, Conv2d):
            w, b = state.layer_params(i)
            win = _conv_windows(x, layer)
            caches.append((x.shape, win))
            out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))  # B,Ho,Wo,O
            x = np.ascontiguousarray(out.transpose(0, 3, 1, 2)) + b[:, None, None]
        elif isinstance(layer, Dense):
            w, b = state.layer_params(i)
            caches.append(x)
            x = x @ w.T + b
        elif isinstance(layer, ReLU):
            mask = x > 0
            caches.append(mask)
            x = x * mask
        elif isinstance(layer, MaxPool2d):
            win = _pool_windows(x, layer)
            flat = win.reshape(win.shape[:4] + (-1,))
            arg = flat.argmax(axis=-1)
            caches.append((x.shape, arg))
            x = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
        elif isinstance(layer, Flatten):
            caches.append(x.shape)
            x = x.reshape(x.shape[0], -1)
        else:
            raise TypeError(f"unknown layer type {type(layer)!r}")

    trace = ForwardTrace(caches, batched, x.shape[0], x.shape[1:], state.params)
    return (x if batched else x[0]), trace


def _conv_input_grad(g: np.ndarray, w: np.ndarray, stride: int, in_hw: tuple[int, int]) -> np.ndarray:
    """Input gradient of a valid convolution: full correlation of the (dilated)
    output gradient with the flipped kernels, done in row blocks to bound memory."""
    rows, o, ho, wo = g.shape
    _, c, kh, kw = w.shape
    hd, wd = (ho - 1) * stride + 1, (wo - 1) * stride + 1
    wf = w[:, :, ::-1, ::-1].transpose(0, 2, 3, 1).reshape(o * kh * kw, c)
    dx = np.zeros((rows, c) + tuple(in_hw))
    block = max(1, 2_000_000 // ((hd + kh - 1) * (wd + kw - 1) * o * kh * kw))
    for lo in range(0, rows, block):
        gb = g[lo:lo + block]
        padded = np.zeros((gb.shape[0], o, hd + 2 * (kh - 1), wd + 2 * (kw - 1)))
        padded[:, :, kh - 1:kh - 1 + hd:stride, kw - 1:kw - 1 + wd:stride] = gb
        win = sliding_window_view(padded, (kh, kw), axis=(2, 3))  # r, o, H, W, kh, kw
        cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(-1, o * kh * kw)
        hh, ww = win.shape[2], win.shape[3]
        dx[lo:lo + block, :, :hh, :ww] = (cols @ wf).reshape(-1, hh, ww, c).transpose(0, 3, 1, 2)
    return dx


def _backward(state: NetworkState, trace: ForwardTrace, output_grad: np.ndarray, per_sample: bool, fan: int = 1) -> np.ndarray:
    """Backpropagate ``output_grad`` through a recorded forward pass.

    With ``fan > 1`` the gradient carries ``fan`` rows per traced sample
    (row ``i * fan + k`` belongs to sample ``i``), which lets one pass compute
    several vector-Jacobian products against the same activations.
    """
    if not isinstance(trace, ForwardTrace) or len(trace.caches) != len(state.spec.layers):
        raise ContractError("trace does not belong to this network")
    if trace.params is not state.params and not np.array_equal(trace.params, state.params):
        raise ContractError("trace was recorded with different parameters")
    g = np.asarray(output_grad, dtype=np.float64)
    expected = (trace.batch_size * fan,) + trace.output_shape if trace.batched else trace.output_shape
    if g.shape != expected:
        raise ShapeError(f"output_grad shape {g.shape} does not match network output {expected}")
    if not trace.batched:
        g = g[None]

    bsz = trace.batch_size
    rows = bsz * fan
    grad = np.zeros((rows, state.n_params) if per_sample else state.n_params)

    def fanned(a):
        # view a per-row array as [sample, fan, ...]
        return a.reshape((bsz, fan) + a.shape[1:])

    for i in range(len(state.spec.layers) - 1, -1, -1):
        layer = state.spec.layers[i]
        cache = trace.caches[i]
        if isinstance(layer, Conv2d):
            w, _ = state.layer_params(i)
            wslot, bslot = state.layout[i]
            in_shape, win = cache
            ho, wo = g.shape[2], g.shape[3]
            if per_sample:
                cols = trace.cols.get(i)
                if cols is None:
                    cols = trace.cols[i] = win.transpose(0, 2, 3, 1, 4, 5).reshape(bsz, ho * wo, -1)
                gw = np.matmul(g.reshape(bsz, fan, g.shape[1], ho * wo), cols[:, None])  # b, fan, o, c*i*j
                grad[:, wslot.offset:wslot.offset + wslot.size] = gw.reshape(rows, -1)
                grad[:, bslot.offset:bslot.offset + bslot.size] = g.sum(axis=(2, 3))
            else:
                gw = np.tensordot(fanned(g).sum(axis=1), win, axes=([0, 2, 3], [0, 2, 3]))
                grad[wslot.offset:wslot.offset + wslot.size] = gw.reshape(-1)
                grad[bslot.offset:bslot.offset + bslot.size] = g.sum(axis=(0, 2, 3))
            if i == 0:
                break
            g = _conv_input_grad(g, w, layer.stride, in_shape[2:])
        elif isinstance(layer, Dense):
            w, _ = state.layer_params(i)
            wslot, bslot = state.layout[i]
            x = cache
            if per_sample:
                outer = fanned(g)[:, :, :, None] * x[:, None, None, :]
                grad[:, wslot.offset:wslot.offset + wslot.size] = outer.reshape(rows, -1)
                grad[:, bslot.offset:bslot.offset + bslot.size] = g
            else:
                grad[wslot.offset:wslot.offset + wslot.size] = (fanned(g).sum(axis=1).T @ x).reshape(-1)
                grad[bslot.offset:bslot.offset + bslot.size] = g.sum(axis=0)
            if i == 0:
                break
            g = g @ w
        elif isinstance(layer, ReLU):
            g = (fanned(g) * cache[:, None]).reshape(g.shape)
        elif isinstance(layer, MaxPool2d):
            in_shape, arg = cache
            dx = np.zeros((rows,) + in_shape[1:])
            s, k = layer.stride, layer.window
            ho, wo = g.shape[2], g.shape[3]
            gf = fanned(g)
            for ki in range(k):
                for kj in range(k):
                    hit = (gf * (arg == ki * k + kj)[:, None]).reshape(g.shape)
                    dx[:, :, ki:ki + s * (ho - 1) + 1:s, kj:kj + s * (wo - 1) + 1:s] += hit
            g = dx
        elif isinstance(layer, Flatten):
            g = g.reshape((rows,) + cache[1:])
    return grad


def backward(state: NetworkState, trace: ForwardTrace, output_grad: np.ndarray) -> np.ndarray:
    """Gradient of ``sum(output_grad * output)`` w.r.t. the flat parameters.

    For a batched trace the per-sample contributions are summed, so passing
    the loss gradient (which already carries the 1/batch factor) yields the
    batch-mean gradient.
    """
    return _backward(state, trace, output_grad, per_sample=False)


def per_sample_backward(state: NetworkState, trace: ForwardTrace, output_grad: np.ndarray) -> np.ndarray:
    """Like :func:`backward` but keeps one gradient row per batch sample."""
    if not trace.batched:
        return _backward(state, trace, output_grad, per_sample=True)[0]
    return _backward(state, trace, output_grad, per_sample=True)


def jacobian(state: NetworkState, x: np.ndarray) -> np.ndarray:
    """d(output)/d(params) for one sample, shape [n_outputs, n_params]."""
    out, trace = forward(state, x)
    if trace.batched:
        raise ShapeError("jacobian takes a single sample; use batch_jacobian")
    n_out = out.size
    rows = np.empty((n_out, state.n_params))
    for k in range(n_out):
        onehot = np.zeros(n_out)
        onehot[k] = 1.0
        rows[k] = backward(state, trace, onehot.reshape(out.shape))
    return rows


def batch_jacobian(state: NetworkState, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stacked Jacobian and outputs for a batch.

    Row ``i * n_outputs + k`` holds d(output_k of sample i)/d(params).  All
    outputs share a single backward pass.
    """
    out, trace = forward(state, xs)
    if not trace.batched:
        raise ShapeError("batch_jacobian expects a leading batch axis")
    bsz = out.shape[0]
    n_out = int(np.prod(out.shape[1:]))
    seeds = np.tile(np.eye(n_out), (bsz, 1)).reshape((bsz * n_out,) + out.shape[1:])
    jac = _backward(state, trace, seeds, per_sample=True, fan=n_out)
    return jac, out


# --- checkpoints ------------------------------------------------------------


def save_checkpoint(path: str | Path, state: NetworkState) -> None:
    payload = {"spec": state.spec.to_dict(), "params": [float(v) for v in state.params]}
    Path(path).write_text(json.dumps(payload))


def load_checkpoint(path: str | Path) -> NetworkState:
    payload = json.loads(Path(path).read_text())
    return NetworkState(NetworkSpec.from_dict(payload["spec"]), np.array(payload["params"], dtype=np.float64))
