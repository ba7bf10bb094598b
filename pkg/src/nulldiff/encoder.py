"""Temporal convolutional EEG encoder.

Each EEG window runs through stacked stride-2 conv blocks (conv, batch
norm, exact-GELU), is average-pooled over time, and projected by a
two-layer MLP to the conditioning embedding. A sequence of windows encodes
row-by-row into the conditioning matrix consumed by the denoiser's
cross-attention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backend as B
from .backend import Tensor
from .data import EegSegment
from .errors import ConfigError, DimensionError

__all__ = ["EncoderConfig", "EegEncoderParams", "encode_window", "encode_sequence"]


@dataclass(frozen=True)
class EncoderConfig:
    in_channels: int
    window_samples: int
    widths: tuple[int, ...] = (32, 64, 128, 256)
    kernel_size: int = 5
    embed_dim: int = 512
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1

    def __post_init__(self):
        if self.in_channels < 1 or self.embed_dim < 1:
            raise ConfigError("channel and embedding sizes must be >= 1")
        if not self.widths:
            raise ConfigError("need at least one conv stage")
        t = self.window_samples
        for _ in self.widths:
            if t < self.kernel_size:
                raise ConfigError(
                    f"window of {self.window_samples} samples too short for "
                    f"{len(self.widths)} stride-2 stages of kernel {self.kernel_size}"
                )
            t = (t - self.kernel_size) // 2 + 1
        if t < 1:
            raise ConfigError("window collapses to zero length before pooling")


@dataclass
class ConvStage:
    weight: Tensor  # (C_out, C_in, k)
    bias: Tensor  # (C_out,)
    gain: Tensor  # (C_out,)
    shift: Tensor  # (C_out,)
    running_mean: np.ndarray = field(repr=False, default=None)
    running_var: np.ndarray = field(repr=False, default=None)


@dataclass
class EegEncoderParams:
    config: EncoderConfig
    stages: list[ConvStage]
    proj_w1: Tensor
    proj_b1: Tensor
    proj_w2: Tensor
    proj_b2: Tensor

    @classmethod
    def init(cls, config: EncoderConfig, seed: int | np.random.SeedSequence = 0) -> "EegEncoderParams":
        rng = np.random.default_rng(seed)
        stages = []
        c_in = config.in_channels
        for c_out in config.widths:
            std = np.sqrt(2.0 / (c_in * config.kernel_size))
            stages.append(
                ConvStage(
                    weight=Tensor(
                        rng.standard_normal((c_out, c_in, config.kernel_size)) * std,
                        requires_grad=True,
                    ),
                    bias=Tensor(np.zeros(c_out), requires_grad=True),
                    gain=Tensor(np.ones(c_out), requires_grad=True),
                    shift=Tensor(np.zeros(c_out), requires_grad=True),
                    running_mean=np.zeros(c_out),
                    running_var=np.ones(c_out),
                )
            )
            c_in = c_out
        d_e = config.embed_dim
        w1 = rng.standard_normal((c_in, d_e)) * np.sqrt(1.0 / c_in)
        w2 = rng.standard_normal((d_e, d_e)) * np.sqrt(1.0 / d_e)
        return cls(
            config=config,
            stages=stages,
            proj_w1=Tensor(w1, requires_grad=True),
            proj_b1=Tensor(np.zeros(d_e), requires_grad=True),
            proj_w2=Tensor(w2, requires_grad=True),
            proj_b2=Tensor(np.zeros(d_e), requires_grad=True),
        )

    def named_parameters(self) -> dict[str, Tensor]:
        out = {}
        for i, s in enumerate(self.stages):
            out[f"stage{i}.weight"] = s.weight
            out[f"stage{i}.bias"] = s.bias
            out[f"stage{i}.gain"] = s.gain
            out[f"stage{i}.shift"] = s.shift
        out["proj.w1"] = self.proj_w1
        out["proj.b1"] = self.proj_b1
        out["proj.w2"] = self.proj_w2
        out["proj.b2"] = self.proj_b2
        return out

    def named_buffers(self) -> dict[str, np.ndarray]:
        out = {}
        for i, s in enumerate(self.stages):
            out[f"stage{i}.running_mean"] = s.running_mean
            out[f"stage{i}.running_var"] = s.running_var
        return out


def _batch_norm(x: Tensor, stage: ConvStage, eps: float, momentum: float, train: bool) -> Tensor:
    # x: (B, C, T); normalize per channel
    if train:
        mu = B.tmean(x, axis=(0, 2), keepdims=True)
        centered = B.sub(x, mu)
        var = B.tmean(B.mul(centered, centered), axis=(0, 2), keepdims=True)
        stage.running_mean *= 1.0 - momentum
        stage.running_mean += momentum * mu.data.reshape(-1)
        stage.running_var *= 1.0 - momentum
        stage.running_var += momentum * var.data.reshape(-1)
        normed = B.div(centered, B.sqrt(var + eps))
    else:
        mu = stage.running_mean.reshape(1, -1, 1)
        var = stage.running_var.reshape(1, -1, 1)
        normed = B.div(B.sub(x, Tensor(mu)), Tensor(np.sqrt(var + eps)))
    gain = B.reshape(stage.gain, (1, -1, 1))
    shift = B.reshape(stage.shift, (1, -1, 1))
    return B.add(B.mul(normed, gain), shift)


def encode_windows(params: EegEncoderParams, windows, train: bool = False) -> Tensor:
    """Encode a batch of windows (B, C, W) -> (B, d_e).

    Eval mode uses running batch-norm statistics and is deterministic;
    train mode uses batch statistics and updates the running buffers.
    """
    cfg = params.config
    x = windows if isinstance(windows, Tensor) else Tensor(windows)
    if x.ndim != 3:
        raise DimensionError("expected a (B, C, W) batch of EEG windows")
    if x.shape[1] != cfg.in_channels:
        raise DimensionError(f"expected {cfg.in_channels} channels, got {x.shape[1]}")
    if x.shape[2] != cfg.window_samples:
        raise ConfigError(
            f"window has {x.shape[2]} samples, encoder configured for {cfg.window_samples}"
        )
    for stage in params.stages:
        x = B.conv1d(x, stage.weight, stride=2)
        x = B.add(x, B.reshape(stage.bias, (1, -1, 1)))
        x = _batch_norm(x, stage, cfg.bn_eps, cfg.bn_momentum, train)
        x = B.gelu(x)
    pooled = B.tmean(x, axis=2)  # (B, C_last)
    hidden = B.gelu(B.add(B.matmul(pooled, params.proj_w1), params.proj_b1))
    return B.add(B.matmul(hidden, params.proj_w2), params.proj_b2)


def encode_window(params: EegEncoderParams, window, train: bool = False) -> Tensor:
    """Encode one (C, W) window to its embedding vector (d_e,)."""
    w = window if isinstance(window, Tensor) else Tensor(window)
    if w.ndim != 2:
        raise DimensionError("expected a single (C, W) window")
    out = encode_windows(params, B.reshape(w, (1,) + w.shape), train=train)
    return B.reshape(out, (out.shape[1],))


def encode_sequence(params: EegEncoderParams, segment: EegSegment, train: bool = False) -> Tensor:
    """Encode all windows of a segment; row k is window k's embedding."""
    return encode_windows(params, segment.windows, train=train)
