"""Reverse-process inference: EEG-conditioned translation sampling and
anchored intermediate-frame reconstruction.

Both modes run the same loop; anchored mode additionally splices the
encoded anchor frames into the clean estimate at every step (range/null
projection), which pins the observed frames exactly while the generative
prior fills the rest. The projection happens in latent space, which is
exact because frame masking commutes with the linear autoencoder.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autoencoder import decode_frame, encode_frame
from .data import EegSegment, FmriSequence, MeasurementOperator
from .denoiser import estimate_x0, predict_noise
from .encoder import encode_sequence
from .errors import ConfigError, DimensionError, InputError, NumericError
from .model import ModelState
from .schedule import NoiseSchedule

__all__ = [
    "SamplerConfig",
    "SampleResult",
    "step_schedule",
    "project_nullspace",
    "sample_translation",
    "sample_interrecon",
    "linear_interpolate",
]


@dataclass(frozen=True)
class SamplerConfig:
    steps: int = 50
    eta: float = 0.0
    seed: int = 0
    # clean-estimate clip in multiples of the model's training latent RMS;
    # None disables (early-step estimates then amplify prediction error by
    # 1/sqrt(abar) and can lock the trajectory far out of distribution)
    clip_x0: float | None = 6.0

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError("sampler needs at least one step")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError("eta must lie in [0, 1]")
        if self.clip_x0 is not None and self.clip_x0 <= 0:
            raise ConfigError("clip_x0 must be positive or None")

    def with_seed(self, seed: int) -> "SamplerConfig":
        return SamplerConfig(self.steps, self.eta, seed, self.clip_x0)


@dataclass
class SampleResult:
    """Decoded frames plus everything needed to replay the run."""

    frames: FmriSequence
    latent: np.ndarray
    mode: str
    config: SamplerConfig
    anchor_trace: list[float] = field(default_factory=list)


def step_schedule(n_total: int, steps: int) -> np.ndarray:
    """Descending sub-schedule over [1, n_total], endpoints included."""
    if steps > n_total:
        raise ConfigError(f"{steps} inference steps exceed the {n_total}-step schedule")
    if steps == 1:
        return np.array([n_total], dtype=np.int64)
    ns = np.unique(np.round(np.linspace(1, n_total, steps)).astype(np.int64))
    return ns[::-1]


def project_nullspace(
    op: MeasurementOperator, y_latent: np.ndarray, x0_hat: np.ndarray
) -> np.ndarray:
    """Replace observed frames of the clean estimate with the encoded
    anchors; missing frames pass through. Guarantees the masked output
    equals the measurement exactly."""
    y_latent = np.asarray(y_latent, dtype=np.float64)
    x0_hat = np.asarray(x0_hat, dtype=np.float64)
    if x0_hat.shape != y_latent.shape:
        raise DimensionError("anchor latents and estimate shapes differ")
    if x0_hat.shape[0] != op.n_frames:
        raise DimensionError(
            f"mask covers {op.n_frames} frames, estimate has {x0_hat.shape[0]}"
        )
    out = x0_hat.copy()
    out[op.frame_mask] = y_latent[op.frame_mask]
    return out


def _accelerated_step(
    sched: NoiseSchedule,
    x0_hat: np.ndarray,
    eps_hat: np.ndarray,
    n: int,
    n_prev: int,
    eta: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Deterministic-family update to the previous sub-schedule step.

    x_prev = sqrt(abar_prev) x0 + sqrt(1 - abar_prev - sigma^2) eps + sigma e',
    sigma = eta * posterior sigma of the skip. With eta=1 and consecutive
    steps this is algebraically the ancestral posterior update; with eta=0
    it is fully deterministic.
    """
    if n_prev == 0:
        return x0_hat.copy()
    abar_n = sched.alpha_bar_at(n)
    abar_prev = sched.alpha_bar_at(n_prev)
    var = (1.0 - abar_prev) / (1.0 - abar_n) * (1.0 - abar_n / abar_prev)
    sigma = eta * np.sqrt(max(var, 0.0))
    out = np.sqrt(abar_prev) * x0_hat + np.sqrt(max(1.0 - abar_prev - sigma**2, 0.0)) * eps_hat
    if sigma > 0.0:
        out = out + sigma * rng.standard_normal(x0_hat.shape)
    return out


def _check_model_finite(model: ModelState):
    for name, arr in model.named_tensors().items():
        if not np.isfinite(arr).all():
            raise NumericError(f"model parameter {name!r} contains non-finite values")


def _reverse_loop(
    model: ModelState,
    eeg: EegSegment,
    cfg: SamplerConfig,
    op: MeasurementOperator | None = None,
    y_latent: np.ndarray | None = None,
    trace: list[float] | None = None,
) -> np.ndarray:
    sched = model.schedule
    kw, d = model.config.frames_per_window, model.config.latent_dim
    if eeg.n_windows != kw:
        raise DimensionError(f"model expects {kw} EEG windows, got {eeg.n_windows}")
    _check_model_finite(model)
    h_eeg = encode_sequence(model.encoder, eeg).data

    rng = np.random.default_rng(cfg.seed)
    x = rng.standard_normal((kw, d))
    ns = step_schedule(sched.n_steps, cfg.steps)
    bound = None if cfg.clip_x0 is None else cfg.clip_x0 * float(model.latent_scale[0])
    for i, n in enumerate(ns):
        n_prev = int(ns[i + 1]) if i + 1 < len(ns) else 0
        eps_hat = predict_noise(model.denoiser, x, int(n), h_eeg).data
        if not np.isfinite(eps_hat).all():
            raise NumericError(f"noise prediction diverged at step {int(n)}")
        x0_hat = estimate_x0(sched, x, eps_hat, int(n))
        if bound is not None:
            np.clip(x0_hat, -bound, bound, out=x0_hat)
        if op is not None:
            x0_hat = project_nullspace(op, y_latent, x0_hat)
            if trace is not None:
                obs = op.frame_mask
                trace.append(float(np.abs(x0_hat[obs] - y_latent[obs]).max(initial=0.0)))
        x = _accelerated_step(sched, x0_hat, eps_hat, int(n), n_prev, cfg.eta, rng)
    return x


def _decoded(model: ModelState, latent: np.ndarray, eeg: EegSegment) -> FmriSequence:
    tr = eeg.window_samples / eeg.sample_rate_hz
    return FmriSequence(decode_frame(model.autoencoder, latent), tr)


def sample_translation(model: ModelState, eeg: EegSegment, cfg: SamplerConfig) -> SampleResult:
    """Reconstruct a full window from EEG alone, starting from pure noise."""
    latent = _reverse_loop(model, eeg, cfg)
    return SampleResult(
        frames=_decoded(model, latent, eeg), latent=latent, mode="translation", config=cfg
    )


def sample_interrecon(
    model: ModelState,
    eeg: EegSegment,
    anchors: np.ndarray,
    op: MeasurementOperator,
    cfg: SamplerConfig,
) -> SampleResult:
    """Reconstruct missing frames between observed anchors.

    ``anchors`` is a (K_w, N_v) array whose rows at observed mask positions
    hold the anchor frames (other rows are ignored). The anchors are
    encoded once; at every reverse step the clean estimate is projected so
    the observed latent rows equal the encoded anchors exactly. The result
    carries the per-step anchor discrepancy trace (all zeros by
    construction).
    """
    anchors = np.asarray(anchors, dtype=np.float64)
    if anchors.shape != (model.config.frames_per_window, model.config.n_vertices):
        raise DimensionError(
            f"anchors shape {anchors.shape} != "
            f"{(model.config.frames_per_window, model.config.n_vertices)}"
        )
    if not np.isfinite(anchors[op.frame_mask]).all():
        raise InputError("anchor frames contain non-finite values")
    op.require_mixed()
    y_latent = np.zeros((op.n_frames, model.config.latent_dim))
    y_latent[op.frame_mask] = encode_frame(model.autoencoder, anchors[op.frame_mask])
    trace: list[float] = []
    latent = _reverse_loop(model, eeg, cfg, op=op, y_latent=y_latent, trace=trace)
    return SampleResult(
        frames=_decoded(model, latent, eeg),
        latent=latent,
        mode="interrecon",
        config=cfg,
        anchor_trace=trace,
    )


def linear_interpolate(
    anchors: np.ndarray,
    anchor_positions: tuple[int, int],
    query_positions,
) -> np.ndarray:
    """Framewise affine blend of two anchor frames by temporal position."""
    anchors = np.asarray(anchors, dtype=np.float64)
    if anchors.ndim != 2 or anchors.shape[0] != 2:
        raise DimensionError("expected exactly two anchor frames (2, N_v)")
    a, b = anchor_positions
    if b == a:
        raise InputError("anchor positions must differ")
    q = np.asarray(query_positions, dtype=np.float64)
    w = (q - a) / (b - a)
    return (1.0 - w)[:, None] * anchors[0] + w[:, None] * anchors[1]
