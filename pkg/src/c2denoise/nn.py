"""Dense 4-axis tensors and the network primitives built on them.

Tensors are plain ``numpy.ndarray``s of shape (batch, channels, height,
width), dtype float64, row-major with width fastest.  Every primitive has a
hand-derived backward pass that is the exact adjoint of its forward pass;
the test suite checks all of them against central finite differences.

Convolution uses the correlation convention (no kernel flip), stride 1 and
zero same-padding, so spatial dimensions are always preserved.  The
transposed convolution is defined as the exact adjoint of that operation
with the roles of the two channel axes exchanged.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError

__all__ = [
    "ConvLayerParams",
    "BatchNormParams",
    "AdamState",
    "as_tensor4",
    "conv2d",
    "conv2d_grad",
    "conv_transpose2d",
    "conv_transpose2d_grad",
    "flip_hw_swap_io",
    "batchnorm2d",
    "batchnorm2d_grad",
    "elu",
    "elu_grad",
    "mse_loss",
    "adam_step",
]


def as_tensor4(x) -> np.ndarray:
    """Coerce to a float64 (batch, channels, height, width) array."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 4:
        raise ShapeError(f"expected a 4-axis tensor, got {a.ndim} axes")
    return a


class ConvLayerParams:
    """Weights and bias of one (possibly transposed) convolutional layer.

    ``weights`` has shape (out_ch, in_ch, kh, kw) with kh == kw odd.  Used
    by :func:`conv2d` the layer maps in_ch -> out_ch channels and ``bias``
    has out_ch entries.  Used by :func:`conv_transpose2d` the same storage
    maps out_ch -> in_ch channels (the adjoint direction) and ``bias`` has
    in_ch entries.
    """

    def __init__(self, weights: np.ndarray, bias: np.ndarray):
        weights = np.asarray(weights, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weights.ndim != 4:
            raise ShapeError("conv weights must have 4 axes (out, in, kh, kw)")
        if weights.shape[2] != weights.shape[3]:
            raise ShapeError("conv kernel must be square")
        if weights.shape[2] % 2 == 0:
            raise ShapeError("kernel size must be odd for exact same-padding")
        if bias.ndim != 1:
            raise ShapeError("conv bias must be a vector")
        self.weights = weights
        self.bias = bias

    @property
    def out_ch(self) -> int:
        return self.weights.shape[0]

    @property
    def in_ch(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel_size(self) -> int:
        return self.weights.shape[2]


class BatchNormParams:
    """Learnable scale/shift plus running statistics of one batch-norm layer."""

    def __init__(self, n_channels: int, momentum: float = 0.1, epsilon: float = 1e-5):
        if not 0.0 < momentum <= 1.0:
            raise ValueError("momentum must lie in (0, 1]")
        if epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        self.gamma = np.ones(n_channels, dtype=np.float64)
        self.beta_shift = np.zeros(n_channels, dtype=np.float64)
        self.running_mean = np.zeros(n_channels, dtype=np.float64)
        self.running_var = np.ones(n_channels, dtype=np.float64)
        self.momentum = float(momentum)
        self.epsilon = float(epsilon)

    @property
    def n_channels(self) -> int:
        return self.gamma.shape[0]


class AdamState:
    """First/second moment accumulators for a list of parameter arrays."""

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps_adam: float = 1e-8):
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ValueError("Adam betas must lie in [0, 1)")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps_adam = float(eps_adam)
        self.step_count = 0
        self.first_moment = [np.zeros_like(p) for p in params]
        self.second_moment = [np.zeros_like(p) for p in params]


def _pad_same(x: np.ndarray, k: int) -> np.ndarray:
    p = k // 2
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def _correlate(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Stride-1 zero-same-padded correlation, no bias.

    x: (B, C, H, W); weights: (O, C, k, k) -> (B, O, H, W).  Accumulates one
    channel contraction per kernel offset, which beats an im2col copy of
    the k^2-fold expanded input.
    """
    b, _, h, w = x.shape
    o, _, k, _ = weights.shape
    xp = _pad_same(x, k)
    out = np.zeros((b, o, h, w))
    for u in range(k):
        for v in range(k):
            shifted = xp[:, :, u:u + h, v:v + w]
            # (O, C) x (B, C, H, W) contracted over C -> (O, B, H, W)
            out += np.tensordot(weights[:, :, u, v], shifted,
                                axes=(1, 1)).transpose(1, 0, 2, 3)
    return out


def conv2d(x: np.ndarray, layer: ConvLayerParams) -> np.ndarray:
    """Correlate ``x`` with the layer kernel and add the per-channel bias.

    Spatial dimensions are preserved (stride 1, zero same-padding).
    """
    x = as_tensor4(x)
    if x.shape[1] != layer.in_ch:
        raise ShapeError(
            f"conv2d: input has {x.shape[1]} channels, layer expects {layer.in_ch}")
    if layer.bias.shape[0] != layer.out_ch:
        raise ShapeError("conv2d: bias length must equal the out-channel count")
    return _correlate(x, layer.weights) + layer.bias[None, :, None, None]


def flip_hw_swap_io(weights: np.ndarray) -> np.ndarray:
    """Flip a kernel in both spatial axes and swap its channel axes."""
    return np.ascontiguousarray(weights.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])


def conv2d_grad(grad_out: np.ndarray, x: np.ndarray, layer: ConvLayerParams):
    """Exact adjoints of :func:`conv2d`.

    Returns (grad_input, grad_weights, grad_bias) for the scalar function
    sum(conv2d(x, layer) * grad_out).
    """
    grad_out = as_tensor4(grad_out)
    x = as_tensor4(x)
    if x.shape[1] != layer.in_ch:
        raise ShapeError("conv2d_grad: input/layer channel mismatch")
    expected = (x.shape[0], layer.out_ch, x.shape[2], x.shape[3])
    if grad_out.shape != expected:
        raise ShapeError(
            f"conv2d_grad: grad_out shape {grad_out.shape} != {expected}")
    k = layer.kernel_size
    h, w = x.shape[2], x.shape[3]
    xp = _pad_same(x, k)
    # grad_w[o,c,u,v] = sum_{b,i,j} grad_out[b,o,i,j] * padded[b,c,i+u,j+v]
    grad_weights = np.empty_like(layer.weights)
    for u in range(k):
        for v in range(k):
            shifted = xp[:, :, u:u + h, v:v + w]
            grad_weights[:, :, u, v] = np.tensordot(
                grad_out, shifted, axes=([0, 2, 3], [0, 2, 3]))
    grad_bias = grad_out.sum(axis=(0, 2, 3))
    grad_input = _correlate(grad_out, flip_hw_swap_io(layer.weights))
    return grad_input, grad_weights, grad_bias


def conv_transpose2d(x: np.ndarray, layer: ConvLayerParams) -> np.ndarray:
    """Adjoint-direction convolution: maps out_ch -> in_ch channels.

    Equivalent to conv2d with the kernel flipped in both spatial axes and
    its channel axes swapped; ``bias`` must have in_ch entries.
    """
    x = as_tensor4(x)
    if x.shape[1] != layer.out_ch:
        raise ShapeError(
            f"conv_transpose2d: input has {x.shape[1]} channels, "
            f"layer expects {layer.out_ch}")
    if layer.bias.shape[0] != layer.in_ch:
        raise ShapeError(
            "conv_transpose2d: bias length must equal the in-channel count")
    return _correlate(x, flip_hw_swap_io(layer.weights)) + layer.bias[None, :, None, None]


def conv_transpose2d_grad(grad_out: np.ndarray, x: np.ndarray, layer: ConvLayerParams):
    """Exact adjoints of :func:`conv_transpose2d`.

    Returns (grad_input, grad_weights, grad_bias); grad_weights is laid out
    like ``layer.weights``.
    """
    grad_out = as_tensor4(grad_out)
    x = as_tensor4(x)
    if x.shape[1] != layer.out_ch:
        raise ShapeError("conv_transpose2d_grad: input/layer channel mismatch")
    expected = (x.shape[0], layer.in_ch, x.shape[2], x.shape[3])
    if grad_out.shape != expected:
        raise ShapeError(
            f"conv_transpose2d_grad: grad_out shape {grad_out.shape} != {expected}")
    flipped = ConvLayerParams(flip_hw_swap_io(layer.weights),
                              np.zeros(layer.in_ch))
    grad_input, grad_w_flipped, grad_bias = conv2d_grad(grad_out, x, flipped)
    return grad_input, flip_hw_swap_io(grad_w_flipped), grad_bias


def batchnorm2d(x: np.ndarray, params: BatchNormParams, mode: str = "train"):
    """Per-channel batch normalization over the (batch, height, width) axes.

    Train mode normalizes with the batch statistics (population variance)
    and updates the running statistics in place with an exponential moving
    average; eval mode uses the running statistics and never mutates state.

    Returns (output, cache); pass the cache to :func:`batchnorm2d_grad`.
    """
    x = as_tensor4(x)
    if x.shape[1] != params.n_channels:
        raise ShapeError(
            f"batchnorm2d: input has {x.shape[1]} channels, "
            f"params have {params.n_channels}")
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval'")
    if mode == "train":
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        m = params.momentum
        params.running_mean *= 1.0 - m
        params.running_mean += m * mean
        params.running_var *= 1.0 - m
        params.running_var += m * var
    else:
        mean = params.running_mean
        var = params.running_var
    inv_std = 1.0 / np.sqrt(var + params.epsilon)
    x_hat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    y = params.gamma[None, :, None, None] * x_hat + params.beta_shift[None, :, None, None]
    cache = (x_hat, inv_std, params.gamma, mode)
    return y, cache


def batchnorm2d_grad(grad_out: np.ndarray, cache):
    """Backward pass of :func:`batchnorm2d`.

    Returns (grad_input, grad_gamma, grad_beta_shift).  In train mode the
    input gradient accounts for the dependence of the batch statistics on
    the input; in eval mode the statistics are constants.
    """
    x_hat, inv_std, gamma, mode = cache
    grad_out = as_tensor4(grad_out)
    if grad_out.shape != x_hat.shape:
        raise ShapeError("batchnorm2d_grad: grad_out shape mismatch")
    grad_gamma = (grad_out * x_hat).sum(axis=(0, 2, 3))
    grad_beta = grad_out.sum(axis=(0, 2, 3))
    g_hat = grad_out * gamma[None, :, None, None]
    if mode == "eval":
        grad_input = g_hat * inv_std[None, :, None, None]
        return grad_input, grad_gamma, grad_beta
    b, _, h, w = x_hat.shape
    n = b * h * w
    sum_g = g_hat.sum(axis=(0, 2, 3))
    sum_gx = (g_hat * x_hat).sum(axis=(0, 2, 3))
    grad_input = (inv_std[None, :, None, None] / n) * (
        n * g_hat
        - sum_g[None, :, None, None]
        - x_hat * sum_gx[None, :, None, None]
    )
    return grad_input, grad_gamma, grad_beta


def elu(x: np.ndarray) -> np.ndarray:
    """Exponential linear unit with alpha = 1."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0.0, x, np.expm1(np.minimum(x, 0.0)))


def elu_grad(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Chain ``grad_out`` through the ELU evaluated at pre-activation ``x``."""
    x = np.asarray(x, dtype=np.float64)
    return grad_out * np.where(x > 0.0, 1.0, np.exp(np.minimum(x, 0.0)))


def mse_loss(pred: np.ndarray, target: np.ndarray):
    """Mean squared error over all elements and its gradient w.r.t. pred."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(
            f"mse_loss: shapes {pred.shape} and {target.shape} differ")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    grad = (2.0 / diff.size) * diff
    return loss, grad


def adam_step(params, grads, state: AdamState):
    """One Adam update with bias correction; mutates params and state in place.

    ``params`` and ``grads`` are congruent lists of arrays matching the
    lists the state was built from.
    """
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ShapeError("adam_step: params/grads/state length mismatch")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape:
            raise ShapeError(
                f"adam_step: parameter shape {p.shape} != gradient shape {g.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps_adam)
    return params, state
