"""Two-conv 3D network with hand-derived backward passes.

Architecture: conv3d -> relu -> maxpool -> conv3d -> relu -> maxpool ->
flatten -> dense -> relu -> dense, with a softmax cross-entropy head.
Convolutions are valid (no padding), stride 1, lowered to GEMM via an
im2col transform; pooling is non-overlapping with floor truncation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import DTYPE, RngStream, ShapeError

KERNEL = (3, 3, 3)
POOL = (2, 2, 2)
HIDDEN_DEFAULT = 128

DEFAULT_FILTER_PAIRS = [(16, 16), (32, 32), (32, 64), (64, 64), (64, 128), (128, 32)]


@dataclass(frozen=True)
class FilterPair:
    conv1_filters: int
    conv2_filters: int

    def __post_init__(self):
        if self.conv1_filters < 1 or self.conv2_filters < 1:
            raise ValueError("filter counts must be positive")

    @classmethod
    def parse(cls, text: str) -> "FilterPair":
        a, b = text.replace(" ", "").split("-")
        return cls(int(a), int(b))

    def __str__(self) -> str:
        return f"{self.conv1_filters}-{self.conv2_filters}"


# ---------------------------------------------------------------------------
# conv3d


@dataclass
class Conv3dLayer:
    weights: np.ndarray  # [out_ch, in_ch, k_t, k_h, k_w]
    bias: np.ndarray  # [out_ch]

    @property
    def out_ch(self) -> int:
        return self.weights.shape[0]

    @property
    def in_ch(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel(self) -> tuple[int, int, int]:
        return self.weights.shape[2:]


def _im2col(x: np.ndarray, kernel) -> tuple[np.ndarray, tuple[int, int, int]]:
    """[C,T,H,W] -> columns [P, C*kt*kh*kw] over valid positions, row-major."""
    kt, kh, kw = kernel
    c, t, h, w = x.shape
    ot, oh, ow = t - kt + 1, h - kh + 1, w - kw + 1
    win = np.lib.stride_tricks.sliding_window_view(x, (kt, kh, kw), axis=(1, 2, 3))
    # win: [C, ot, oh, ow, kt, kh, kw] -> [ot, oh, ow, C, kt, kh, kw]
    cols = win.transpose(1, 2, 3, 0, 4, 5, 6).reshape(ot * oh * ow, c * kt * kh * kw)
    return np.ascontiguousarray(cols), (ot, oh, ow)


def conv3d_forward_with_cols(x: np.ndarray, layer: Conv3dLayer):
    """Forward pass that also returns the im2col buffer for reuse in backward."""
    kt, kh, kw = layer.kernel
    if x.ndim != 4:
        raise ShapeError(f"conv3d input must be [ch,T,H,W], got rank {x.ndim}")
    if x.shape[0] != layer.in_ch:
        raise ShapeError(f"channel mismatch: input {x.shape[0]}, layer {layer.in_ch}")
    if x.shape[1] < kt or x.shape[2] < kh or x.shape[3] < kw:
        raise ShapeError(f"kernel {layer.kernel} larger than input {x.shape[1:]}")
    cols, (ot, oh, ow) = _im2col(x, layer.kernel)
    wmat = layer.weights.reshape(layer.out_ch, -1)
    out = cols @ wmat.T + layer.bias  # [P, out_ch]; dtype follows the inputs
    return np.ascontiguousarray(out.T.reshape(layer.out_ch, ot, oh, ow)), cols


def conv3d_forward(x: np.ndarray, layer: Conv3dLayer) -> np.ndarray:
    return conv3d_forward_with_cols(x, layer)[0]


def conv3d_backward(x: np.ndarray, layer: Conv3dLayer, grad_out: np.ndarray,
                    cols: np.ndarray | None = None):
    """Gradients of conv3d_forward w.r.t. input, weights, bias."""
    kt, kh, kw = layer.kernel
    c, t, h, w = x.shape
    ot, oh, ow = t - kt + 1, h - kh + 1, w - kw + 1
    if grad_out.shape != (layer.out_ch, ot, oh, ow):
        raise ShapeError(f"grad_out shape {grad_out.shape} != {(layer.out_ch, ot, oh, ow)}")
    if cols is None:
        cols, _ = _im2col(x, layer.kernel)
    g = grad_out.reshape(layer.out_ch, -1)  # [O, P]
    grad_w = (g @ cols).reshape(layer.weights.shape)
    grad_b = g.sum(axis=1)
    wmat = layer.weights.reshape(layer.out_ch, -1)
    grad_cols = (g.T @ wmat).reshape(ot, oh, ow, c, kt, kh, kw)
    grad_x = np.zeros_like(x)
    # col2im: scatter-add one kernel offset at a time
    for dt in range(kt):
        for dh in range(kh):
            for dw in range(kw):
                grad_x[:, dt:dt + ot, dh:dh + oh, dw:dw + ow] += (
                    grad_cols[:, :, :, :, dt, dh, dw].transpose(3, 0, 1, 2)
                )
    return grad_x, grad_w, grad_b


# ---------------------------------------------------------------------------
# maxpool3d


@dataclass
class MaxPool3dLayer:
    window: tuple[int, int, int] = POOL  # stride = window (non-overlapping)


def maxpool3d_forward(x: np.ndarray, layer: MaxPool3dLayer):
    """Returns (output, argmax) where argmax holds flat in-window indices."""
    pt, ph, pw = layer.window
    c, t, h, w = x.shape
    ot, oh, ow = t // pt, h // ph, w // pw
    if ot < 1 or oh < 1 or ow < 1:
        raise ShapeError(f"pool window {layer.window} larger than input {x.shape[1:]}")
    xc = x[:, :ot * pt, :oh * ph, :ow * pw]
    win = xc.reshape(c, ot, pt, oh, ph, ow, pw).transpose(0, 1, 3, 5, 2, 4, 6)
    flat = win.reshape(c, ot, oh, ow, pt * ph * pw)
    # np.argmax takes the first maximum: lowest flat in-window index on ties
    arg = flat.argmax(axis=4)
    out = np.take_along_axis(flat, arg[..., None], axis=4)[..., 0]
    return np.ascontiguousarray(out), arg


def maxpool3d_backward(x_shape, layer: MaxPool3dLayer, argmax: np.ndarray,
                       grad_out: np.ndarray) -> np.ndarray:
    pt, ph, pw = layer.window
    c, t, h, w = x_shape
    ot, oh, ow = t // pt, h // ph, w // pw
    if grad_out.shape != (c, ot, oh, ow) or argmax.shape != grad_out.shape:
        raise ShapeError("grad_out/argmax shape does not match pooled geometry")
    gwin = np.zeros((c, ot, oh, ow, pt * ph * pw), dtype=grad_out.dtype)
    np.put_along_axis(gwin, argmax[..., None], grad_out[..., None], axis=4)
    gx = np.zeros(x_shape, dtype=grad_out.dtype)
    gx[:, :ot * pt, :oh * ph, :ow * pw] = (
        gwin.reshape(c, ot, oh, ow, pt, ph, pw)
        .transpose(0, 1, 4, 2, 5, 3, 6)
        .reshape(c, ot * pt, oh * ph, ow * pw)
    )
    return gx


# ---------------------------------------------------------------------------
# dense / relu / loss


@dataclass
class DenseLayer:
    weights: np.ndarray  # [in_features, out_features]
    bias: np.ndarray  # [out_features]


def dense_forward(x: np.ndarray, layer: DenseLayer) -> np.ndarray:
    if x.shape != (layer.weights.shape[0],):
        raise ShapeError(f"dense input {x.shape} != ({layer.weights.shape[0]},)")
    return x @ layer.weights + layer.bias


def dense_backward(x: np.ndarray, layer: DenseLayer, grad_out: np.ndarray):
    grad_w = np.outer(x, grad_out)
    grad_b = grad_out.copy()
    grad_x = layer.weights @ grad_out
    return grad_x, grad_w, grad_b


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    # subgradient at 0 taken as 0
    return grad_out * (x > 0)


def softmax_cross_entropy(logits: np.ndarray, label: int):
    """Returns (loss, grad_logits) with max-subtraction stabilization."""
    k = logits.shape[0]
    if not 0 <= label < k:
        raise ValueError(f"label {label} out of range for {k} classes")
    z = logits.astype(np.float64) - float(logits.max())
    ez = np.exp(z)
    p = ez / ez.sum()
    loss = float(-np.log(max(p[label], 1e-300)))
    grad = p.astype(logits.dtype)
    grad[label] -= 1.0
    return loss, grad


# ---------------------------------------------------------------------------
# network


@dataclass(frozen=True)
class Geometry:
    """Input clip geometry [channels, frames, height, width]."""
    channels: int
    frames: int
    height: int
    width: int

    def as_tuple(self):
        return (self.channels, self.frames, self.height, self.width)


def _conv_out(extent: int, k: int) -> int:
    return extent - k + 1


def pipeline_dims(geom: Geometry, kernel=KERNEL, pool=POOL):
    """Extents after each stage; raises if any stage collapses below 1."""
    dims = [geom.frames, geom.height, geom.width]
    stages = {}
    for stage, op in (("conv1", "conv"), ("pool1", "pool"), ("conv2", "conv"), ("pool2", "pool")):
        for i in range(3):
            if op == "conv":
                dims[i] = _conv_out(dims[i], kernel[i])
            else:
                dims[i] //= pool[i]
            if dims[i] < 1:
                raise ShapeError(f"geometry collapses at {stage}: {geom}")
        stages[stage] = tuple(dims)
    return stages


@dataclass
class Network:
    conv1: Conv3dLayer
    pool1: MaxPool3dLayer
    conv2: Conv3dLayer
    pool2: MaxPool3dLayer
    dense_hidden: DenseLayer
    dense_out: DenseLayer
    num_classes: int
    geometry: Geometry
    filter_pair: FilterPair

    def parameters(self) -> dict[str, np.ndarray]:
        return {
            "conv1.w": self.conv1.weights, "conv1.b": self.conv1.bias,
            "conv2.w": self.conv2.weights, "conv2.b": self.conv2.bias,
            "hidden.w": self.dense_hidden.weights, "hidden.b": self.dense_hidden.bias,
            "out.w": self.dense_out.weights, "out.b": self.dense_out.bias,
        }

    @property
    def flatten_len(self) -> int:
        return self.dense_hidden.weights.shape[0]


def _he_uniform(shape, fan_in: int, rng: RngStream) -> np.ndarray:
    limit = float(np.sqrt(6.0 / fan_in))
    return rng.uniform(shape, -limit, limit)


def init_network(pair: FilterPair, num_classes: int, geometry: Geometry,
                 rng: RngStream, hidden: int = HIDDEN_DEFAULT) -> Network:
    stages = pipeline_dims(geometry)
    kt, kh, kw = KERNEL
    c1, c2 = pair.conv1_filters, pair.conv2_filters
    ch = geometry.channels
    flat = c2 * int(np.prod(stages["pool2"]))
    fan_c1 = ch * kt * kh * kw
    fan_c2 = c1 * kt * kh * kw
    return Network(
        conv1=Conv3dLayer(_he_uniform((c1, ch, kt, kh, kw), fan_c1, rng.substream(0)),
                          np.zeros(c1, dtype=DTYPE)),
        pool1=MaxPool3dLayer(),
        conv2=Conv3dLayer(_he_uniform((c2, c1, kt, kh, kw), fan_c2, rng.substream(1)),
                          np.zeros(c2, dtype=DTYPE)),
        pool2=MaxPool3dLayer(),
        dense_hidden=DenseLayer(_he_uniform((flat, hidden), flat, rng.substream(2)),
                                np.zeros(hidden, dtype=DTYPE)),
        dense_out=DenseLayer(_he_uniform((hidden, num_classes), hidden, rng.substream(3)),
                             np.zeros(num_classes, dtype=DTYPE)),
        num_classes=num_classes,
        geometry=geometry,
        filter_pair=pair,
    )


def forward(net: Network, clip: np.ndarray) -> np.ndarray:
    """Logits for a single clip [ch,T,H,W]."""
    logits, _ = forward_cached(net, clip)
    return logits


def forward_cached(net: Network, clip: np.ndarray):
    if clip.shape != net.geometry.as_tuple():
        raise ShapeError(f"clip {clip.shape} != network geometry {net.geometry.as_tuple()}")
    cache = {"x": clip}
    cache["c1"], cache["c1_cols"] = conv3d_forward_with_cols(clip, net.conv1)
    cache["r1"] = relu_forward(cache["c1"])
    cache["p1"], cache["p1_arg"] = maxpool3d_forward(cache["r1"], net.pool1)
    cache["c2"], cache["c2_cols"] = conv3d_forward_with_cols(cache["p1"], net.conv2)
    cache["r2"] = relu_forward(cache["c2"])
    cache["p2"], cache["p2_arg"] = maxpool3d_forward(cache["r2"], net.pool2)
    flat = cache["p2"].reshape(-1)
    if flat.shape[0] != net.flatten_len:
        raise ShapeError(f"flatten length {flat.shape[0]} != expected {net.flatten_len}")
    cache["flat"] = flat
    cache["h"] = dense_forward(flat, net.dense_hidden)
    cache["hr"] = relu_forward(cache["h"])
    logits = dense_forward(cache["hr"], net.dense_out)
    return logits, cache


def backward(net: Network, cache: dict, grad_logits: np.ndarray) -> dict[str, np.ndarray]:
    """Parameter gradients for one clip, given d(loss)/d(logits)."""
    grads = {}
    ghr, grads["out.w"], grads["out.b"] = dense_backward(cache["hr"], net.dense_out, grad_logits)
    gh = relu_backward(cache["h"], ghr)
    gflat, grads["hidden.w"], grads["hidden.b"] = dense_backward(cache["flat"], net.dense_hidden, gh)
    gp2 = gflat.reshape(cache["p2"].shape)
    gr2 = maxpool3d_backward(cache["r2"].shape, net.pool2, cache["p2_arg"], gp2)
    gc2 = relu_backward(cache["c2"], gr2)
    gp1, grads["conv2.w"], grads["conv2.b"] = conv3d_backward(
        cache["p1"], net.conv2, gc2, cols=cache["c2_cols"])
    gr1 = maxpool3d_backward(cache["r1"].shape, net.pool1, cache["p1_arg"], gp1)
    gc1 = relu_backward(cache["c1"], gr1)
    _, grads["conv1.w"], grads["conv1.b"] = conv3d_backward(
        cache["x"], net.conv1, gc1, cols=cache["c1_cols"])
    return grads


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState) -> None:
    """One bias-corrected Adam update, applied to params in place."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"grad shape {g.shape} != param shape {p.shape} for {name}")
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m += (1 - b1) * (g - m)
        v += (1 - b2) * (g * g - v)
        mhat = m / (1 - b1**t)
        vhat = v / (1 - b2**t)
        p -= (state.lr * mhat / (np.sqrt(vhat) + state.eps)).astype(p.dtype)
