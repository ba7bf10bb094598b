"""Transformer noise predictor over latent frame tokens.

One token per frame latent. Tokens carry learned per-frame positional
embeddings and a sinusoidal step embedding; every layer self-attends over
frames and cross-attends to the per-frame EEG conditioning rows
(pre-norm residual blocks). The output projection starts at zero so a
fresh model predicts zero noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend as B
from .backend import Tensor
from .errors import ConfigError, DimensionError
from .schedule import NoiseSchedule

__all__ = [
    "DenoiserConfig",
    "DenoiserParams",
    "predict_noise",
    "estimate_x0",
    "timestep_features",
]


@dataclass(frozen=True)
class DenoiserConfig:
    latent_dim: int
    cond_dim: int
    frames_per_window: int
    hidden_dim: int = 128
    n_layers: int = 2
    n_heads: int = 4
    ln_eps: float = 1e-5

    def __post_init__(self):
        if self.n_layers < 1:
            raise ConfigError("need at least one transformer layer")
        if self.hidden_dim % self.n_heads != 0:
            raise ConfigError(
                f"heads ({self.n_heads}) must divide hidden dim ({self.hidden_dim})"
            )
        if self.hidden_dim % 2 != 0:
            raise ConfigError("hidden dim must be even for the sinusoidal step features")
        if min(self.latent_dim, self.cond_dim, self.frames_per_window) < 1:
            raise ConfigError("dims must be >= 1")


def _linear_init(rng, fan_in: int, fan_out: int) -> np.ndarray:
    return rng.standard_normal((fan_in, fan_out)) * np.sqrt(1.0 / fan_in)


@dataclass
class AttentionParams:
    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor
    bq: Tensor
    bk: Tensor
    bv: Tensor
    bo: Tensor


@dataclass
class LayerParams:
    ln1_gain: Tensor
    ln1_bias: Tensor
    self_attn: AttentionParams
    ln2_gain: Tensor
    ln2_bias: Tensor
    ln_cond_gain: Tensor  # pre-norm also applies to the conditioning memory
    ln_cond_bias: Tensor
    cross_attn: AttentionParams
    ln3_gain: Tensor
    ln3_bias: Tensor
    ffn_w1: Tensor
    ffn_b1: Tensor
    ffn_w2: Tensor
    ffn_b2: Tensor


@dataclass
class DenoiserParams:
    config: DenoiserConfig
    in_w: Tensor
    in_b: Tensor
    pos: Tensor  # (K_w, hidden) learned frame positions for tokens
    cond_pos: Tensor  # (K_w, cond_dim) learned frame positions for EEG rows
    time_w1: Tensor
    time_b1: Tensor
    time_w2: Tensor
    time_b2: Tensor
    layers: list[LayerParams]
    final_gain: Tensor
    final_bias: Tensor
    out_w: Tensor
    out_b: Tensor

    @classmethod
    def init(cls, config: DenoiserConfig, seed: int | np.random.SeedSequence = 0) -> "DenoiserParams":
        rng = np.random.default_rng(seed)
        h, d, de = config.hidden_dim, config.latent_dim, config.cond_dim

        def attn(kv_dim: int) -> AttentionParams:
            return AttentionParams(
                wq=Tensor(_linear_init(rng, h, h), requires_grad=True),
                wk=Tensor(_linear_init(rng, kv_dim, h), requires_grad=True),
                wv=Tensor(_linear_init(rng, kv_dim, h), requires_grad=True),
                wo=Tensor(_linear_init(rng, h, h), requires_grad=True),
                bq=Tensor(np.zeros(h), requires_grad=True),
                bk=Tensor(np.zeros(h), requires_grad=True),
                bv=Tensor(np.zeros(h), requires_grad=True),
                bo=Tensor(np.zeros(h), requires_grad=True),
            )

        def ones(n):
            return Tensor(np.ones(n), requires_grad=True)

        def zeros(n):
            return Tensor(np.zeros(n), requires_grad=True)

        layers = [
            LayerParams(
                ln1_gain=ones(h),
                ln1_bias=zeros(h),
                self_attn=attn(h),
                ln2_gain=ones(h),
                ln2_bias=zeros(h),
                ln_cond_gain=ones(de),
                ln_cond_bias=zeros(de),
                cross_attn=attn(de),
                ln3_gain=ones(h),
                ln3_bias=zeros(h),
                ffn_w1=Tensor(_linear_init(rng, h, 4 * h), requires_grad=True),
                ffn_b1=zeros(4 * h),
                ffn_w2=Tensor(_linear_init(rng, 4 * h, h), requires_grad=True),
                ffn_b2=zeros(h),
            )
            for _ in range(config.n_layers)
        ]
        return cls(
            config=config,
            in_w=Tensor(_linear_init(rng, d, h), requires_grad=True),
            in_b=zeros(h),
            pos=Tensor(
                rng.standard_normal((config.frames_per_window, h)) * 0.02, requires_grad=True
            ),
            cond_pos=Tensor(
                rng.standard_normal((config.frames_per_window, de)) * 0.02, requires_grad=True
            ),
            time_w1=Tensor(_linear_init(rng, h, h), requires_grad=True),
            time_b1=zeros(h),
            time_w2=Tensor(_linear_init(rng, h, h), requires_grad=True),
            time_b2=zeros(h),
            layers=layers,
            final_gain=ones(h),
            final_bias=zeros(h),
            out_w=Tensor(np.zeros((h, d)), requires_grad=True),
            out_b=zeros(d),
        )

    def named_parameters(self) -> dict[str, Tensor]:
        out = {
            "in_w": self.in_w,
            "in_b": self.in_b,
            "pos": self.pos,
            "cond_pos": self.cond_pos,
            "time_w1": self.time_w1,
            "time_b1": self.time_b1,
            "time_w2": self.time_w2,
            "time_b2": self.time_b2,
            "final_gain": self.final_gain,
            "final_bias": self.final_bias,
            "out_w": self.out_w,
            "out_b": self.out_b,
        }
        for i, layer in enumerate(self.layers):
            p = f"layer{i}."
            out[p + "ln1_gain"] = layer.ln1_gain
            out[p + "ln1_bias"] = layer.ln1_bias
            out[p + "ln2_gain"] = layer.ln2_gain
            out[p + "ln2_bias"] = layer.ln2_bias
            out[p + "ln_cond_gain"] = layer.ln_cond_gain
            out[p + "ln_cond_bias"] = layer.ln_cond_bias
            out[p + "ln3_gain"] = layer.ln3_gain
            out[p + "ln3_bias"] = layer.ln3_bias
            for tag, attn in (("self", layer.self_attn), ("cross", layer.cross_attn)):
                out[p + tag + ".wq"] = attn.wq
                out[p + tag + ".wk"] = attn.wk
                out[p + tag + ".wv"] = attn.wv
                out[p + tag + ".wo"] = attn.wo
                out[p + tag + ".bq"] = attn.bq
                out[p + tag + ".bk"] = attn.bk
                out[p + tag + ".bv"] = attn.bv
                out[p + tag + ".bo"] = attn.bo
            out[p + "ffn_w1"] = layer.ffn_w1
            out[p + "ffn_b1"] = layer.ffn_b1
            out[p + "ffn_w2"] = layer.ffn_w2
            out[p + "ffn_b2"] = layer.ffn_b2
        return out


def timestep_features(steps: np.ndarray, dim: int) -> np.ndarray:
    """Sinusoidal features of the diffusion step index, (B, dim)."""
    steps = np.asarray(steps, dtype=np.float64).reshape(-1)
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / max(half - 1, 1))
    args = steps[:, None] * freqs[None, :]
    return np.concatenate([np.sin(args), np.cos(args)], axis=1)


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    b, t, h = x.shape
    x = B.reshape(x, (b, t, n_heads, h // n_heads))
    return B.transpose(x, (0, 2, 1, 3))


def _merge_heads(x: Tensor) -> Tensor:
    b, nh, t, dh = x.shape
    return B.reshape(B.transpose(x, (0, 2, 1, 3)), (b, t, nh * dh))


def _mha(tokens: Tensor, kv: Tensor, p: AttentionParams, n_heads: int) -> Tensor:
    q = B.add(B.matmul(tokens, p.wq), p.bq)
    k = B.add(B.matmul(kv, p.wk), p.bk)
    v = B.add(B.matmul(kv, p.wv), p.bv)
    att = B.attention(_split_heads(q, n_heads), _split_heads(k, n_heads), _split_heads(v, n_heads))
    return B.add(B.matmul(_merge_heads(att), p.wo), p.bo)


def predict_noise(params: DenoiserParams, x_n, n, h_eeg) -> Tensor:
    """Predict the injected noise for a latent window.

    ``x_n`` is (K_w, d) or batched (B, K_w, d); ``n`` a step index or one
    per batch item; ``h_eeg`` the matching (.., K_w, cond_dim) conditioning
    rows. Deterministic given parameters; differentiable end to end.
    """
    cfg = params.config
    x = x_n if isinstance(x_n, Tensor) else Tensor(x_n)
    cond = h_eeg if isinstance(h_eeg, Tensor) else Tensor(h_eeg)
    single = x.ndim == 2
    if single:
        x = B.reshape(x, (1,) + x.shape)
    if cond.ndim == 2:
        cond = B.reshape(cond, (1,) + cond.shape)
    if x.ndim != 3 or x.shape[1] != cfg.frames_per_window or x.shape[2] != cfg.latent_dim:
        raise DimensionError(
            f"latent window {x.shape} does not match (B, {cfg.frames_per_window}, {cfg.latent_dim})"
        )
    if cond.shape[1] != cfg.frames_per_window or cond.shape[2] != cfg.cond_dim:
        raise DimensionError(
            f"conditioning {cond.shape} does not match (B, {cfg.frames_per_window}, {cfg.cond_dim})"
        )
    if cond.shape[0] != x.shape[0]:
        raise DimensionError("batch sizes of latents and conditioning differ")

    steps = np.broadcast_to(np.asarray(n, dtype=np.float64).reshape(-1), (x.shape[0],))
    tfeat = Tensor(timestep_features(steps, cfg.hidden_dim))
    temb = B.gelu(B.add(B.matmul(tfeat, params.time_w1), params.time_b1))
    temb = B.add(B.matmul(temb, params.time_w2), params.time_b2)
    temb = B.reshape(temb, (x.shape[0], 1, cfg.hidden_dim))

    tokens = B.add(B.matmul(x, params.in_w), params.in_b)
    tokens = B.add(tokens, params.pos)
    tokens = B.add(tokens, temb)
    cond = B.add(cond, params.cond_pos)

    eps = cfg.ln_eps
    for layer in params.layers:
        normed = B.layer_norm(tokens, layer.ln1_gain, layer.ln1_bias, eps)
        tokens = B.add(tokens, _mha(normed, normed, layer.self_attn, cfg.n_heads))
        normed = B.layer_norm(tokens, layer.ln2_gain, layer.ln2_bias, eps)
        cond_normed = B.layer_norm(cond, layer.ln_cond_gain, layer.ln_cond_bias, eps)
        tokens = B.add(tokens, _mha(normed, cond_normed, layer.cross_attn, cfg.n_heads))
        normed = B.layer_norm(tokens, layer.ln3_gain, layer.ln3_bias, eps)
        ff = B.gelu(B.add(B.matmul(normed, layer.ffn_w1), layer.ffn_b1))
        ff = B.add(B.matmul(ff, layer.ffn_w2), layer.ffn_b2)
        tokens = B.add(tokens, ff)

    tokens = B.layer_norm(tokens, params.final_gain, params.final_bias, eps)
    out = B.add(B.matmul(tokens, params.out_w), params.out_b)
    return B.reshape(out, (cfg.frames_per_window, cfg.latent_dim)) if single else out


def estimate_x0(sched: NoiseSchedule, x_n: np.ndarray, eps_hat: np.ndarray, n: int) -> np.ndarray:
    """Invert the forward jump given a noise estimate:
    x0 = (x_n - sqrt(1 - abar_n) eps_hat) / sqrt(abar_n)."""
    sched._check_step(n)
    x_n = np.asarray(x_n, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    if x_n.shape != eps_hat.shape:
        raise DimensionError("state and noise-estimate shapes differ")
    abar = sched.alpha_bar[n - 1]
    return (x_n - np.sqrt(1.0 - abar) * eps_hat) / np.sqrt(abar)
