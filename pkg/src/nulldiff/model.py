"""Bundled model state: EEG encoder, linear frame autoencoder, denoiser,
and the diffusion schedule, with named-tensor access for checkpoints."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .autoencoder import LinearAeParams
from .backend import Tensor
from .denoiser import DenoiserConfig, DenoiserParams
from .encoder import EegEncoderParams, EncoderConfig
from .errors import ConfigError
from .schedule import NoiseSchedule, make_linear_schedule

__all__ = ["ModelConfig", "ModelState", "desk_model_config", "paper_scale_model_config"]


@dataclass(frozen=True)
class ModelConfig:
    n_vertices: int
    frames_per_window: int
    eeg_channels: int
    eeg_window_samples: int
    latent_dim: int
    embed_dim: int = 512
    encoder_widths: tuple[int, ...] = (32, 64, 128, 256)
    encoder_kernel: int = 5
    denoiser_hidden: int = 128
    denoiser_layers: int = 2
    denoiser_heads: int = 4
    diffusion_steps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02

    def __post_init__(self):
        if self.latent_dim > self.n_vertices:
            raise ConfigError("latent dim cannot exceed vertex count")
        object.__setattr__(self, "encoder_widths", tuple(int(w) for w in self.encoder_widths))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["encoder_widths"] = list(self.encoder_widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["encoder_widths"] = tuple(d["encoder_widths"])
        return cls(**d)


def desk_model_config(
    n_vertices: int,
    frames_per_window: int,
    eeg_channels: int,
    eeg_window_samples: int,
    latent_dim: int | None = None,
    **overrides,
) -> ModelConfig:
    """CPU-sized defaults; latent dim defaults to a quarter of the vertices."""
    return ModelConfig(
        n_vertices=n_vertices,
        frames_per_window=frames_per_window,
        eeg_channels=eeg_channels,
        eeg_window_samples=eeg_window_samples,
        latent_dim=latent_dim if latent_dim is not None else max(1, n_vertices // 4),
        **overrides,
    )


def paper_scale_model_config(
    n_vertices: int,
    frames_per_window: int,
    eeg_channels: int,
    eeg_window_samples: int,
) -> ModelConfig:
    """The full-size configuration: 6 layers, 8 heads, 1024 hidden, 1024
    latent, 512 conditioning dims."""
    return ModelConfig(
        n_vertices=n_vertices,
        frames_per_window=frames_per_window,
        eeg_channels=eeg_channels,
        eeg_window_samples=eeg_window_samples,
        latent_dim=1024,
        embed_dim=512,
        denoiser_hidden=1024,
        denoiser_layers=6,
        denoiser_heads=8,
    )


@dataclass
class ModelState:
    config: ModelConfig
    encoder: EegEncoderParams
    autoencoder: LinearAeParams
    denoiser: DenoiserParams
    schedule: NoiseSchedule
    seed: int
    # running RMS of training latents; sampling clips clean estimates
    # relative to it so an early bad estimate cannot lock the trajectory
    latent_scale: np.ndarray = None

    def __post_init__(self):
        if self.latent_scale is None:
            self.latent_scale = np.ones(1)

    @classmethod
    def init(cls, config: ModelConfig, seed: int = 0) -> "ModelState":
        enc_seed, ae_seed, den_seed = np.random.SeedSequence(seed).spawn(3)
        encoder_cfg = EncoderConfig(
            in_channels=config.eeg_channels,
            window_samples=config.eeg_window_samples,
            widths=config.encoder_widths,
            kernel_size=config.encoder_kernel,
            embed_dim=config.embed_dim,
        )
        denoiser_cfg = DenoiserConfig(
            latent_dim=config.latent_dim,
            cond_dim=config.embed_dim,
            frames_per_window=config.frames_per_window,
            hidden_dim=config.denoiser_hidden,
            n_layers=config.denoiser_layers,
            n_heads=config.denoiser_heads,
        )
        return cls(
            config=config,
            encoder=EegEncoderParams.init(encoder_cfg, enc_seed),
            autoencoder=LinearAeParams.init(config.n_vertices, config.latent_dim, ae_seed),
            denoiser=DenoiserParams.init(denoiser_cfg, den_seed),
            schedule=make_linear_schedule(
                config.diffusion_steps, config.beta_start, config.beta_end
            ),
            seed=seed,
        )

    def named_parameters(self) -> dict[str, Tensor]:
        out = {}
        for prefix, params in (
            ("encoder.", self.encoder),
            ("autoencoder.", self.autoencoder),
            ("denoiser.", self.denoiser),
        ):
            for name, t in params.named_parameters().items():
                out[prefix + name] = t
        return out

    def named_buffers(self) -> dict[str, np.ndarray]:
        out = {"encoder." + k: v for k, v in self.encoder.named_buffers().items()}
        out["latent_scale"] = self.latent_scale
        return out

    def named_tensors(self) -> dict[str, np.ndarray]:
        """Parameters plus buffers, as raw arrays (checkpoint payload)."""
        out = {name: t.data for name, t in self.named_parameters().items()}
        out.update(self.named_buffers())
        return out
