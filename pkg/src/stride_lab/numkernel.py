"""Minimal numeric engine for verifying the symbolic analysis.

Executes a model spec on real double-precision tensors laid out as
(batch, channels, freq, time). Convolutions are direct: padded input windows
are gathered with stride tricks and contracted with the kernel by grouped
matrix multiplication, no FFT and no approximation. An :class:`OpCounter`
accumulates the multiply count of every convolution and fully connected
layer under the same MAC convention the symbolic side uses, so the two can
be compared for exact equality.

Gradients are provided for single convolution layers only, enough to verify
the kernel against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .layers import (
    Activation,
    Add,
    BatchNorm2d,
    Conv2d,
    FullyConnected,
    GlobalAvgPool,
    MaxPool2d,
    ModelSpec,
    Res2NetConv,
    Role,
    ShortcutKind,
    SqueezeExcite,
    TemporalStatsPool,
)
from .strides import StridePair

__all__ = [
    "GradCheckReport",
    "KernelError",
    "OpCounter",
    "RunResult",
    "conv2d_backward",
    "conv2d_forward",
    "gradcheck_conv",
    "init_weights",
    "residual_block_forward",
    "run_model",
    "stats_pooling_forward",
    "zero_weights",
]

STATS_EPS = 1e-10
DEFAULT_SEED = 20240417


class KernelError(ValueError):
    """Raised on tensor/layer dimension mismatches."""


@dataclass
class OpCounter:
    """Running multiply/add tallies for one forward pass."""

    multiplies: int = 0
    adds: int = 0

    def merge(self, other: "OpCounter") -> None:
        self.multiplies += other.multiplies
        self.adds += other.adds


@dataclass(frozen=True)
class RunResult:
    embedding: np.ndarray
    counter: OpCounter
    shapes: tuple[tuple[str, tuple[int, ...]], ...]


def _require_tensor4(x: np.ndarray, where: str) -> None:
    if x.ndim != 4:
        raise KernelError(f"{where}: expected a (batch, channels, freq, time) tensor, got {x.shape}")
    if not np.isfinite(x).all():
        raise KernelError(f"{where}: tensor contains non-finite values")


def _gather_windows(
    x: np.ndarray,
    kernel: tuple[int, int],
    padding: tuple[int, int],
    dilation: tuple[int, int],
    stride: StridePair,
    pad_value: float = 0.0,
) -> np.ndarray:
    """(B, C, F_out, T_out, kf, kt) view of every receptive field."""
    kf, kt = kernel
    pf, pt = padding
    df, dt = dilation
    xp = np.pad(x, ((0, 0), (0, 0), (pf, pf), (pt, pt)), constant_values=pad_value)
    span_f = df * (kf - 1) + 1
    span_t = dt * (kt - 1) + 1
    if xp.shape[2] < span_f or xp.shape[3] < span_t:
        raise KernelError(
            f"spatial input {x.shape[2]}x{x.shape[3]} too small for kernel span {span_f}x{span_t}"
        )
    win = sliding_window_view(xp, (span_f, span_t), axis=(2, 3))
    win = win[..., ::df, ::dt]
    return win[:, :, :: stride.freq, :: stride.time]


def conv2d_forward(
    x: np.ndarray,
    layer: Conv2d,
    weight: np.ndarray,
    counter: OpCounter | None = None,
) -> np.ndarray:
    """Direct grouped 2D convolution.

    ``weight`` has shape (out_channels, in_channels // groups, kf, kt).
    The counter gains exactly one multiply per kernel tap per output value.
    """
    _require_tensor4(x, layer.name)
    b, cin, _, _ = x.shape
    if cin != layer.in_channels:
        raise KernelError(f"{layer.name}: expected {layer.in_channels} input channels, got {cin}")
    g = layer.groups
    cg = layer.in_channels // g
    og = layer.out_channels // g
    kf, kt = layer.kernel
    if weight.shape != (layer.out_channels, cg, kf, kt):
        raise KernelError(
            f"{layer.name}: weight shape {weight.shape} != {(layer.out_channels, cg, kf, kt)}"
        )
    win = _gather_windows(x, layer.kernel, layer.padding, layer.dilation, layer.stride)
    f_out, t_out = win.shape[2], win.shape[3]
    # (g, B*F_out*T_out, cg*kf*kt) @ (g, cg*kf*kt, og) -> grouped GEMM
    cols = (
        win.reshape(b, g, cg, f_out, t_out, kf * kt)
        .transpose(1, 0, 3, 4, 2, 5)
        .reshape(g, b * f_out * t_out, cg * kf * kt)
    )
    wmat = weight.reshape(g, og, cg * kf * kt).transpose(0, 2, 1)
    out = np.matmul(cols, wmat)
    out = (
        out.reshape(g, b, f_out, t_out, og)
        .transpose(1, 0, 4, 2, 3)
        .reshape(b, layer.out_channels, f_out, t_out)
    )
    if counter is not None:
        taps = kf * kt * cg
        outputs = b * layer.out_channels * f_out * t_out
        counter.multiplies += outputs * taps
        counter.adds += outputs * (taps - 1)
    return out


def conv2d_backward(
    x: np.ndarray,
    layer: Conv2d,
    weight: np.ndarray,
    grad_out: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of a scalar loss w.r.t. conv input and weights."""
    _require_tensor4(x, layer.name)
    b = x.shape[0]
    g = layer.groups
    cg = layer.in_channels // g
    og = layer.out_channels // g
    kf, kt = layer.kernel
    pf, pt = layer.padding
    df, dt = layer.dilation
    sf, st = layer.stride.freq, layer.stride.time

    win = _gather_windows(x, layer.kernel, layer.padding, layer.dilation, layer.stride)
    f_out, t_out = win.shape[2], win.shape[3]
    if grad_out.shape != (b, layer.out_channels, f_out, t_out):
        raise KernelError(
            f"{layer.name}: grad shape {grad_out.shape} != {(b, layer.out_channels, f_out, t_out)}"
        )
    gy = grad_out.reshape(b, g, og, f_out, t_out)
    xg = win.reshape(b, g, cg, f_out, t_out, kf, kt)
    grad_w = np.einsum("bgoft,bgcftij->gocij", gy, xg).reshape(layer.out_channels, cg, kf, kt)

    wg = weight.reshape(g, og, cg, kf, kt)
    padded_shape = (b, layer.in_channels, x.shape[2] + 2 * pf, x.shape[3] + 2 * pt)
    grad_xp = np.zeros(padded_shape)
    grad_xp_g = grad_xp.reshape(b, g, cg, padded_shape[2], padded_shape[3])
    for i in range(kf):
        for j in range(kt):
            contrib = np.einsum("bgoft,goc->bgcft", gy, wg[:, :, :, i, j])
            grad_xp_g[
                :,
                :,
                :,
                i * df : i * df + sf * f_out : sf,
                j * dt : j * dt + st * t_out : st,
            ] += contrib
    grad_x = grad_xp[:, :, pf : padded_shape[2] - pf, pt : padded_shape[3] - pt]
    return grad_x, grad_w


def maxpool2d_forward(x: np.ndarray, layer: MaxPool2d) -> np.ndarray:
    _require_tensor4(x, layer.name)
    win = _gather_windows(
        x, layer.kernel, layer.padding, (1, 1), layer.stride, pad_value=-np.inf
    )
    return win.max(axis=(-2, -1))


def stats_pooling_forward(x: np.ndarray) -> np.ndarray:
    """Per (channel, freq) cell: mean then population std over time,
    concatenated to a (batch, 2*C*F) matrix."""
    _require_tensor4(x, "stats_pooling")
    if x.shape[3] < 2:
        raise KernelError("statistics pooling needs at least 2 time frames")
    b = x.shape[0]
    mean = x.mean(axis=3)
    var = ((x - mean[..., None]) ** 2).mean(axis=3)
    std = np.sqrt(var + STATS_EPS)
    return np.concatenate([mean.reshape(b, -1), std.reshape(b, -1)], axis=1)


def global_avg_pool_forward(x: np.ndarray) -> np.ndarray:
    _require_tensor4(x, "global_avg_pool")
    return x.mean(axis=(2, 3))


def fully_connected_forward(
    x: np.ndarray, layer: FullyConnected, weight: np.ndarray, bias: np.ndarray | None,
    counter: OpCounter | None = None,
) -> np.ndarray:
    if x.ndim != 2 or x.shape[1] != layer.in_dim:
        raise KernelError(f"{layer.name}: expected (batch, {layer.in_dim}) input, got {x.shape}")
    out = x @ weight.T
    if layer.bias:
        out = out + bias
    if counter is not None:
        counter.multiplies += x.shape[0] * layer.in_dim * layer.out_dim
        counter.adds += x.shape[0] * layer.out_dim * (layer.in_dim - 1)
    return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def squeeze_excite_forward(
    x: np.ndarray, layer: SqueezeExcite, params: dict, counter: OpCounter | None = None
) -> np.ndarray:
    _require_tensor4(x, layer.name)
    b, c = x.shape[0], x.shape[1]
    if c != layer.channels:
        raise KernelError(f"{layer.name}: channel mismatch")
    hidden = layer.channels // layer.reduction
    squeezed = x.mean(axis=(2, 3))
    h = np.maximum(squeezed @ params["w1"].T + params["b1"], 0.0)
    gate = _sigmoid(h @ params["w2"].T + params["b2"])
    if counter is not None:
        counter.multiplies += b * (c * hidden + hidden * c)
    return x * gate[:, :, None, None]


def res2net_forward(
    x: np.ndarray, layer: Res2NetConv, params: dict, counter: OpCounter | None = None
) -> np.ndarray:
    _require_tensor4(x, layer.name)
    if x.shape[1] != layer.channels:
        raise KernelError(f"{layer.name}: channel mismatch")
    w = layer.width
    chunks = [x[:, i * w : (i + 1) * w] for i in range(layer.scale)]
    branch_conv = Conv2d(
        f"{layer.name}.branch", w, w, layer.kernel, padding=layer.padding
    )
    outs = [chunks[0]]
    prev = None
    for i in range(1, layer.scale):
        inp = chunks[i] if prev is None else chunks[i] + prev
        y = conv2d_forward(inp, branch_conv, params["branches"][i - 1], counter)
        y = np.maximum(y, 0.0)
        outs.append(y)
        prev = y
    return np.concatenate(outs, axis=1)


def _subsample(x: np.ndarray, stride: StridePair) -> np.ndarray:
    return x[:, :, :: stride.freq, :: stride.time]


# ---------------------------------------------------------------------------
# Whole-model execution
# ---------------------------------------------------------------------------


def _weighted_layers(spec: ModelSpec):
    for entry in spec.entries:
        layer = entry.layer
        if isinstance(layer, (Conv2d, FullyConnected, SqueezeExcite, Res2NetConv)):
            yield layer


def init_weights(spec: ModelSpec, seed: int = DEFAULT_SEED) -> dict[str, dict]:
    """Deterministic uniform [-0.1, 0.1] weights keyed by layer name."""
    rng = np.random.default_rng(np.uint64(seed))

    def draw(*shape):
        return rng.uniform(-0.1, 0.1, size=shape)

    weights: dict[str, dict] = {}
    for layer in _weighted_layers(spec):
        if isinstance(layer, Conv2d):
            kf, kt = layer.kernel
            weights[layer.name] = {
                "w": draw(layer.out_channels, layer.in_channels // layer.groups, kf, kt)
            }
        elif isinstance(layer, FullyConnected):
            params = {"w": draw(layer.out_dim, layer.in_dim)}
            if layer.bias:
                params["b"] = draw(layer.out_dim)
            weights[layer.name] = params
        elif isinstance(layer, SqueezeExcite):
            hidden = layer.channels // layer.reduction
            weights[layer.name] = {
                "w1": draw(hidden, layer.channels),
                "b1": draw(hidden),
                "w2": draw(layer.channels, hidden),
                "b2": draw(layer.channels),
            }
        else:
            kf, kt = layer.kernel
            weights[layer.name] = {
                "branches": [draw(layer.width, layer.width, kf, kt) for _ in range(layer.scale - 1)]
            }
    return weights


def zero_weights(spec: ModelSpec) -> dict[str, dict]:
    """All-zero weights (fully connected biases included)."""
    weights = init_weights(spec, seed=0)
    for params in weights.values():
        for key, value in params.items():
            if key == "branches":
                params[key] = [np.zeros_like(v) for v in value]
            else:
                params[key] = np.zeros_like(value)
    return weights


def _apply(layer, x, weights, counter):
    if isinstance(layer, Conv2d):
        return conv2d_forward(x, layer, weights[layer.name]["w"], counter)
    if isinstance(layer, BatchNorm2d):
        # Inference mode with zero mean, unit variance, unit scale, zero
        # shift: an exact identity.
        return x
    if isinstance(layer, Activation):
        return np.maximum(x, 0.0) if layer.fn == "relu" else _sigmoid(x)
    if isinstance(layer, MaxPool2d):
        return maxpool2d_forward(x, layer)
    if isinstance(layer, SqueezeExcite):
        return squeeze_excite_forward(x, layer, weights[layer.name], counter)
    if isinstance(layer, Res2NetConv):
        return res2net_forward(x, layer, weights[layer.name], counter)
    if isinstance(layer, TemporalStatsPool):
        return stats_pooling_forward(x)
    if isinstance(layer, GlobalAvgPool):
        return global_avg_pool_forward(x)
    if isinstance(layer, FullyConnected):
        params = weights[layer.name]
        return fully_connected_forward(x, layer, params["w"], params.get("b"), counter)
    raise KernelError(f"cannot execute layer {type(layer).__name__}")


def _record_shape(records, name, value):
    if value.ndim == 4:
        records.append((name, tuple(int(d) for d in value.shape[1:])))
    else:
        records.append((name, (int(value.shape[1]),)))


def residual_block_forward(
    x: np.ndarray,
    segment,
    weights: dict,
    counter: OpCounter | None = None,
    records: list | None = None,
) -> np.ndarray:
    """Execute one residual block segment: branch(x) plus shortcut(x).

    The shortcut is the identity when shapes are preserved, a parameter-free
    strided subsampling when only the spatial shape changes, and the
    segment's projection layers otherwise.
    """
    block_in = x
    branch = block_in
    shortcut = block_in
    merged = None
    for entry in segment.entries:
        layer = entry.layer
        if isinstance(layer, Add):
            if layer.shortcut is ShortcutKind.SUBSAMPLE:
                shortcut = _subsample(block_in, layer.stride)
            elif layer.shortcut is ShortcutKind.IDENTITY:
                shortcut = block_in
            if branch.shape != shortcut.shape:
                raise KernelError(
                    f"{layer.name}: branch {branch.shape} != shortcut {shortcut.shape}"
                )
            merged = branch + shortcut
            if counter is not None:
                counter.adds += merged.size
            if records is not None:
                _record_shape(records, layer.name, merged)
        elif entry.role is Role.SHORTCUT:
            shortcut = _apply(layer, shortcut, weights, counter)
            if records is not None:
                _record_shape(records, layer.name, shortcut)
        else:
            if merged is not None:
                merged = _apply(layer, merged, weights, counter)
                if records is not None:
                    _record_shape(records, layer.name, merged)
            else:
                branch = _apply(layer, branch, weights, counter)
                if records is not None:
                    _record_shape(records, layer.name, branch)
    if merged is None:
        raise KernelError("residual segment executed without an add layer")
    return merged


def run_model(
    spec: ModelSpec,
    x: np.ndarray,
    weights: dict | None = None,
    seed: int = DEFAULT_SEED,
) -> RunResult:
    """Execute a spec end to end.

    Returns the embedding matrix (batch, embedding_dim), the op counter, and
    one (layer name, output shape) record per layer; 4D shapes drop the
    batch axis so they compare directly against the symbolic trace.
    """
    _require_tensor4(x, "run_model")
    if x.shape[1] != 1:
        raise KernelError("backbones take single-channel spectrogram input")
    if weights is None:
        weights = init_weights(spec, seed)
    counter = OpCounter()
    records: list[tuple[str, tuple[int, ...]]] = []

    for segment in spec.segments():
        if segment.kind == "linear":
            for entry in segment.entries:
                x = _apply(entry.layer, x, weights, counter)
                _record_shape(records, entry.layer.name, x)
            continue
        x = residual_block_forward(x, segment, weights, counter, records)

    return RunResult(embedding=x, counter=counter, shapes=tuple(records))


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GradCheckReport:
    layer: Conv2d
    max_rel_error_weights: float
    max_rel_error_input: float
    tolerance: float
    failures: tuple[str, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def max_rel_error(self) -> float:
        return max(self.max_rel_error_weights, self.max_rel_error_input)


def _loss_and_grad(x, layer, weight):
    y = conv2d_forward(x, layer, weight)
    return float(np.sum(y * y)), 2.0 * y


def _numeric_grad(f, array, h=1e-5):
    grad = np.zeros_like(array)
    flat = array.reshape(-1)
    gflat = grad.reshape(-1)
    for idx in range(flat.size):
        orig = flat[idx]
        flat[idx] = orig + h
        hi = f()
        flat[idx] = orig - h
        lo = f()
        flat[idx] = orig
        gflat[idx] = (hi - lo) / (2.0 * h)
    return grad


def _max_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    # The denominator floor scales with the gradient magnitude so that
    # finite-difference roundoff on near-zero coordinates does not register
    # as relative error.
    scale = max(float(np.max(np.abs(numeric))), float(np.max(np.abs(analytic))), 1.0)
    floor = 1e-4 * scale
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def gradcheck_conv(
    layer: Conv2d,
    x: np.ndarray | None = None,
    tolerance: float = 1e-4,
    seed: int = DEFAULT_SEED,
    h: float = 1e-5,
) -> GradCheckReport:
    """Compare analytic conv gradients against central finite differences.

    The loss is the sum of squared outputs. Intended for small layers; the
    numeric sweep touches every weight and input coordinate.
    """
    rng = np.random.default_rng(np.uint64(seed))
    if x is None:
        x = rng.uniform(-1.0, 1.0, size=(2, layer.in_channels, 6, 7))
    kf, kt = layer.kernel
    weight = rng.uniform(-1.0, 1.0, size=(layer.out_channels, layer.in_channels // layer.groups, kf, kt))

    _, grad_y = _loss_and_grad(x, layer, weight)
    grad_x, grad_w = conv2d_backward(x, layer, weight, grad_y)

    numeric_w = _numeric_grad(lambda: _loss_and_grad(x, layer, weight)[0], weight, h)
    numeric_x = _numeric_grad(lambda: _loss_and_grad(x, layer, weight)[0], x, h)

    err_w = _max_rel_error(grad_w, numeric_w)
    err_x = _max_rel_error(grad_x, numeric_x)
    failures = []
    if err_w > tolerance:
        failures.append(f"weight gradient rel err {err_w:.3e} > {tolerance:.1e}")
    if err_x > tolerance:
        failures.append(f"input gradient rel err {err_x:.3e} > {tolerance:.1e}")
    return GradCheckReport(
        layer=layer,
        max_rel_error_weights=err_w,
        max_rel_error_input=err_x,
        tolerance=tolerance,
        failures=tuple(failures),
    )
