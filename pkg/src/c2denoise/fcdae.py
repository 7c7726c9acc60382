"""The fully convolutional denoising autoencoder.

Encoder layers are [conv -> batchnorm -> ELU]; decoder layers mirror them
with transposed convolutions, except the final layer which is a bare
transposed convolution (no normalization, no activation) so the output can
carry the destandardized scale.  Because every layer preserves spatial
dimensions, the network accepts square maps of any size.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import nn
from .c2 import C2Matrix, atomic_write_bytes, destandardize, standardize
from .errors import (BadMagicError, ConfigError, NumericError, ShapeError,
                     TruncatedError, VersionError)
from typing import Optional

__all__ = [
    "FcDaeArchitecture",
    "FcDaeModel",
    "TrainConfig",
    "build_model",
    "forward",
    "loss_and_grads",
    "train",
    "denoise",
    "save_checkpoint",
    "load_checkpoint",
    "train_ensemble",
]

CHECKPOINT_MAGIC = b"FCDA"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class FcDaeArchitecture:
    """Layer plan: encoder output channels, kernel size, input channels.

    The decoder channel chain is always the mirror of the encoder and is
    never stored separately.
    """

    encoder_out_channels: tuple = (1, 4, 8, 16, 32)
    kernel_size: int = 3
    input_channels: int = 1

    def __post_init__(self):
        if len(self.encoder_out_channels) == 0:
            raise ConfigError("encoder channel list must be non-empty")
        if any(c < 1 for c in self.encoder_out_channels):
            raise ConfigError("channel counts must be positive")
        if self.kernel_size % 2 == 0 or self.kernel_size < 1:
            raise ConfigError("kernel size must be odd and positive")

    @property
    def decoder_out_channels(self) -> tuple:
        chain = tuple(reversed(self.encoder_out_channels[:-1]))
        return chain + (self.input_channels,)

    def layer_channel_pairs(self):
        """(in, out) channel pairs for every layer in forward order."""
        pairs = []
        prev = self.input_channels
        for c in self.encoder_out_channels:
            pairs.append((prev, c))
            prev = c
        for c in self.decoder_out_channels:
            pairs.append((prev, c))
            prev = c
        return pairs

    def n_parameters(self) -> int:
        """Learnable parameter count (conv weights+bias, batch-norm gamma+beta)."""
        k2 = self.kernel_size ** 2
        total = 0
        pairs = self.layer_channel_pairs()
        for i, (cin, cout) in enumerate(pairs):
            total += cin * cout * k2 + cout
            if i != len(pairs) - 1:  # final layer has no batch norm
                total += 2 * cout
        return total


@dataclass
class _Layer:
    conv: nn.ConvLayerParams
    bn: Optional[nn.BatchNormParams]
    transposed: bool


@dataclass
class FcDaeModel:
    """Ordered layer parameters plus the seed used at initialization."""

    arch: FcDaeArchitecture
    layers: list
    rng_seed: int
    epochs_trained: int = 0
    final_loss: float = float("nan")

    def parameters(self):
        """Learnable arrays in forward-layer order: conv W, conv b, bn gamma, bn beta."""
        out = []
        for layer in self.layers:
            out.append(layer.conv.weights)
            out.append(layer.conv.bias)
            if layer.bn is not None:
                out.append(layer.bn.gamma)
                out.append(layer.bn.beta_shift)
        return out

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


def build_model(arch: FcDaeArchitecture, seed: int) -> FcDaeModel:
    """Initialize a model: uniform weights scaled by 1/sqrt(in_ch * k^2).

    Biases start at zero, batch-norm at gamma=1, beta=0, running stats
    (0, 1).  Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    k = arch.kernel_size
    pairs = arch.layer_channel_pairs()
    n_enc = len(arch.encoder_out_channels)
    layers = []
    for i, (cin, cout) in enumerate(pairs):
        transposed = i >= n_enc
        scale = 1.0 / np.sqrt(cin * k * k)
        if transposed:
            # stored like the forward conv it is the adjoint of: slot 0 is
            # this layer's input channel count
            w = rng.uniform(-scale, scale, size=(cin, cout, k, k))
        else:
            w = rng.uniform(-scale, scale, size=(cout, cin, k, k))
        conv = nn.ConvLayerParams(w, np.zeros(cout))
        is_last = i == len(pairs) - 1
        bn = None if is_last else nn.BatchNormParams(cout)
        layers.append(_Layer(conv, bn, transposed))
    return FcDaeModel(arch, layers, seed)


def _forward(model: FcDaeModel, batch: np.ndarray, mode: str, keep_tape: bool):
    x = nn.as_tensor4(batch)
    if x.shape[1] != model.arch.input_channels:
        raise ShapeError(
            f"forward: batch has {x.shape[1]} channels, "
            f"model expects {model.arch.input_channels}")
    tape = []
    for layer in model.layers:
        conv_in = x
        if layer.transposed:
            x = nn.conv_transpose2d(x, layer.conv)
        else:
            x = nn.conv2d(x, layer.conv)
        bn_cache = None
        pre_act = None
        if layer.bn is not None:
            x, bn_cache = nn.batchnorm2d(x, layer.bn, mode)
            pre_act = x
            x = nn.elu(x)
        if keep_tape:
            tape.append((conv_in, bn_cache, pre_act))
    return x, tape


def forward(model: FcDaeModel, batch: np.ndarray, mode: str = "eval") -> np.ndarray:
    """Run the network on a (batch, 1, H, W) tensor; output keeps the shape.

    Train mode uses batch statistics and updates the running batch-norm
    statistics; eval mode is a pure function of its inputs.
    """
    y, _ = _forward(model, batch, mode, keep_tape=False)
    return y


def loss_and_grads(model: FcDaeModel, batch: np.ndarray, target: np.ndarray,
                   mode: str = "train"):
    """MSE loss of forward(batch) against target plus gradients.

    Returns (loss, grads) with grads aligned with ``model.parameters()``.
    """
    y, tape = _forward(model, batch, mode, keep_tape=True)
    loss, grad = nn.mse_loss(y, target)
    grads = []
    for layer, (conv_in, bn_cache, pre_act) in zip(reversed(model.layers),
                                                   reversed(tape)):
        entry = []
        if layer.bn is not None:
            grad = nn.elu_grad(grad, pre_act)
            grad, g_gamma, g_beta = nn.batchnorm2d_grad(grad, bn_cache)
            entry = [g_gamma, g_beta]
        if layer.transposed:
            grad, g_w, g_b = nn.conv_transpose2d_grad(grad, conv_in, layer.conv)
        else:
            grad, g_w, g_b = nn.conv2d_grad(grad, conv_in, layer.conv)
        grads.append([g_w, g_b] + entry)
    flat = []
    for entry in reversed(grads):
        flat.extend(entry)
    return loss, flat


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings for :func:`train`."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 8
    max_epochs: int = 30
    early_stop_loss_threshold: float = 1e-3
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if self.early_stop_loss_threshold <= 0:
            raise ConfigError("early_stop_loss_threshold must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")


def _batches(dataset, order, batch_size):
    """Group shuffled sample indices into batches of equal spatial size."""
    by_shape = {}
    for i in order:
        by_shape.setdefault(dataset[i][0].shape, []).append(i)
    for shape in sorted(by_shape, key=lambda s: (s[0], s[1])):
        idx = by_shape[shape]
        for start in range(0, len(idx), batch_size):
            yield idx[start:start + batch_size]


def train(model: FcDaeModel, dataset, config: TrainConfig):
    """Optimize the model on (noisy, target) pairs of standardized 2-D maps.

    Runs shuffled mini-batches with Adam until the epoch-mean loss drops
    below the early-stopping threshold or max_epochs is reached.  Pairs are
    batched by matching spatial size.  Returns (model, loss_history) with
    one mean-loss entry per completed epoch; deterministic for fixed seeds.
    """
    if len(dataset) == 0:
        raise ConfigError("training dataset is empty")
    dataset = [(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))
               for a, b in dataset]
    for a, b in dataset:
        if a.shape != b.shape or a.ndim != 2:
            raise ShapeError("each training pair must be two equal-size 2-D maps")
    params = model.parameters()
    state = nn.AdamState(params, lr=config.learning_rate,
                         beta1=config.beta1, beta2=config.beta2)
    rng = np.random.default_rng(config.shuffle_seed)
    loss_history = []
    for epoch in range(config.max_epochs):
        order = rng.permutation(len(dataset))
        total = 0.0
        count = 0
        for batch_idx in _batches(dataset, order, config.batch_size):
            noisy = np.stack([dataset[i][0] for i in batch_idx])[:, None, :, :]
            target = np.stack([dataset[i][1] for i in batch_idx])[:, None, :, :]
            loss, grads = loss_and_grads(model, noisy, target, mode="train")
            nn.adam_step(params, grads, state)
            total += loss * len(batch_idx)
            count += len(batch_idx)
        epoch_loss = total / count
        loss_history.append(epoch_loss)
        if epoch_loss < config.early_stop_loss_threshold:
            break
    model.epochs_trained = len(loss_history)
    model.final_loss = loss_history[-1]
    return model, loss_history


def denoise(model: FcDaeModel, c2: C2Matrix) -> C2Matrix:
    """Standardize, run the network in eval mode, destandardize, symmetrize.

    The target scale is restored with the input's own statistics; the
    result is exactly symmetric.  The input is left untouched.
    """
    if c2.n_frames < model.arch.kernel_size:
        raise ShapeError(
            f"map size {c2.n_frames} is smaller than the kernel "
            f"({model.arch.kernel_size})")
    try:
        c2_std, params = standardize(c2)
    except NumericError as exc:
        raise NumericError("constant input") from exc
    out = forward(model, c2_std.values[None, None, :, :], mode="eval")[0, 0]
    restored = destandardize(C2Matrix(out, c2.frame_interval_s, c2.q_label), params)
    sym = (restored.values + restored.values.T) / 2.0
    return C2Matrix(sym, c2.frame_interval_s, c2.q_label)


# ---------------------------------------------------------------------------
# checkpoints

def _blob_arrays(model: FcDaeModel):
    """All persisted arrays in forward-layer order (includes running stats)."""
    out = []
    for layer in model.layers:
        out.append(layer.conv.weights)
        out.append(layer.conv.bias)
        if layer.bn is not None:
            out.extend([layer.bn.gamma, layer.bn.beta_shift,
                        layer.bn.running_mean, layer.bn.running_var])
    return out


def save_checkpoint(path: str, model: FcDaeModel) -> None:
    """Serialize the model: FCDA magic, version, text header, float64 blob."""
    header = "\n".join([
        "channels:" + ",".join(str(c) for c in model.arch.encoder_out_channels),
        f"kernel_size:{model.arch.kernel_size}",
        f"input_channels:{model.arch.input_channels}",
        f"seed:{model.rng_seed}",
        f"epochs:{model.epochs_trained}",
        f"final_loss:{model.final_loss!r}",
    ]).encode("utf-8")
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(np.uint32(CHECKPOINT_VERSION).tobytes())
    buf.write(np.uint32(len(header)).tobytes())
    buf.write(header)
    for arr in _blob_arrays(model):
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    atomic_write_bytes(path, buf.getvalue())


def load_checkpoint(path: str) -> FcDaeModel:
    """Read a checkpoint; validates magic, version and blob length."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise BadMagicError(f"{path}: bad magic {blob[:4]!r}, expected FCDA")
    if len(blob) < 12:
        raise TruncatedError(f"{path}: header truncated")
    version = int(np.frombuffer(blob[4:8], dtype="<u4")[0])
    if version != CHECKPOINT_VERSION:
        raise VersionError(f"{path}: unsupported checkpoint version {version}")
    header_len = int(np.frombuffer(blob[8:12], dtype="<u4")[0])
    if len(blob) < 12 + header_len:
        raise TruncatedError(f"{path}: header truncated")
    fields = {}
    for line in blob[12:12 + header_len].decode("utf-8").splitlines():
        key, _, val = line.partition(":")
        fields[key] = val
    try:
        arch = FcDaeArchitecture(
            tuple(int(c) for c in fields["channels"].split(",")),
            int(fields["kernel_size"]),
            int(fields["input_channels"]),
        )
        seed = int(fields["seed"])
        epochs = int(fields["epochs"])
        final_loss = float(fields["final_loss"])
    except (KeyError, ValueError) as exc:
        raise VersionError(f"{path}: malformed checkpoint header ({exc})") from exc
    model = build_model(arch, seed)
    model.epochs_trained = epochs
    model.final_loss = final_loss
    flat = np.frombuffer(blob[12 + header_len:], dtype="<f8")
    needed = sum(a.size for a in _blob_arrays(model))
    if flat.size < needed:
        raise TruncatedError(
            f"{path}: parameter blob has {flat.size} values, expected {needed}")
    if flat.size > needed:
        raise TruncatedError(
            f"{path}: parameter blob has {flat.size - needed} trailing values")
    cursor = 0
    for arr in _blob_arrays(model):
        arr[...] = flat[cursor:cursor + arr.size].reshape(arr.shape)
        cursor += arr.size
    return model


def train_ensemble(arch: FcDaeArchitecture, dataset, config: TrainConfig,
                   seeds, allow_duplicate_seeds: bool = False):
    """Train one model per initialization seed, all else identical.

    Returns the list of trained models in seed order.
    """
    seeds = list(seeds)
    if not allow_duplicate_seeds and len(set(seeds)) != len(seeds):
        raise ConfigError("ensemble seeds must be distinct")
    models = []
    for seed in seeds:
        model = build_model(arch, seed)
        model, _ = train(model, dataset, config)
        models.append(model)
    return models
