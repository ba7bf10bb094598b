"""Sectioned key-value configuration (INI) with typed coercion.

Sections: [synth], [model], [train], [sampler], [regions]. Flag values
passed by the CLI override file values; the merged effective config is
echoed into every output's metadata record.
"""

from __future__ import annotations

import configparser
import os

import numpy as np

from .data import RegionMask
from .errors import ConfigError
from .model import ModelConfig, desk_model_config, paper_scale_model_config
from .sampler import SamplerConfig
from .synth import Session, SynthConfig
from .trainer import TrainConfig

__all__ = [
    "load_config_file",
    "build_synth_config",
    "build_train_config",
    "build_sampler_config",
    "build_model_config",
    "parse_regions",
    "windowing_params",
    "effective_sections",
]

_SYNTH_KEYS = {
    "n_sources": int,
    "n_vertices": int,
    "n_channels": int,
    "sample_rate_hz": int,
    "tr_seconds": float,
    "hemo_shift_seconds": float,
    "session_seconds": float,
    "noise_std_eeg": float,
    "noise_std_fmri": float,
    "seed": int,
}

_MODEL_KEYS = {
    "scale": str,  # desk | paper
    "frames_per_window": int,
    "latent_dim": int,
    "embed_dim": int,
    "encoder_widths": "int_tuple",
    "encoder_kernel": int,
    "denoiser_hidden": int,
    "denoiser_layers": int,
    "denoiser_heads": int,
    "diffusion_steps": int,
    "beta_start": float,
    "beta_end": float,
    "seed": int,
}

_TRAIN_KEYS = {
    "epochs": int,
    "batch_size": int,
    "learning_rate": float,
    "adam_beta1": float,
    "adam_beta2": float,
    "adam_eps": float,
    "weight_decay": float,
    "lambda_recon": float,
    "seed": int,
    "checkpoint_every": int,
    "val_windows": int,
    "stride_frames": int,
    "max_eval_windows": int,
}

_SAMPLER_KEYS = {"steps": int, "eta": float, "seed": int, "clip_x0": float}

_SCHEMAS = {
    "synth": _SYNTH_KEYS,
    "model": _MODEL_KEYS,
    "train": _TRAIN_KEYS,
    "sampler": _SAMPLER_KEYS,
}


def _coerce(section: str, key: str, raw: str):
    kind = _SCHEMAS[section].get(key)
    if kind is None:
        raise ConfigError(f"unknown key {key!r} in section [{section}]")
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw.strip()
        if kind == "int_tuple":
            return tuple(int(p) for p in raw.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r} in [{section}]: {raw!r}") from exc
    raise ConfigError(f"unhandled schema kind for {key!r}")


def load_config_file(path: str) -> dict[str, dict]:
    """Parse and type-check; unknown sections/keys are rejected loudly."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    out: dict[str, dict] = {}
    for section in parser.sections():
        if section == "regions":
            out["regions"] = dict(parser.items("regions"))
            continue
        if section not in _SCHEMAS:
            raise ConfigError(f"unknown config section [{section}]")
        out[section] = {k: _coerce(section, k, v) for k, v in parser.items(section)}
    return out


def _merged(cfg: dict, section: str, overrides: dict) -> dict:
    vals = dict(cfg.get(section, {}))
    vals.update({k: v for k, v in overrides.items() if v is not None})
    return vals


def build_synth_config(cfg: dict, **overrides) -> SynthConfig:
    return SynthConfig(**_merged(cfg, "synth", overrides))


def build_train_config(cfg: dict, **overrides) -> TrainConfig:
    vals = _merged(cfg, "train", overrides)
    vals.pop("stride_frames", None)
    vals.pop("max_eval_windows", None)
    return TrainConfig(**vals)


def build_sampler_config(cfg: dict, **overrides) -> SamplerConfig:
    return SamplerConfig(**_merged(cfg, "sampler", overrides))


def windowing_params(cfg: dict, frames_override: int | None = None) -> tuple[int, int | None]:
    """(frames_per_window, stride) for cutting sessions into windows."""
    frames = frames_override or cfg.get("model", {}).get("frames_per_window", 5)
    stride = cfg.get("train", {}).get("stride_frames")
    return int(frames), stride


def build_model_config(cfg: dict, session: Session, frames_override: int | None = None) -> tuple[ModelConfig, int]:
    """Model dims come from the session; everything else from [model].

    Returns (config, init seed)."""
    vals = dict(cfg.get("model", {}))
    scale = vals.pop("scale", "desk")
    seed = vals.pop("seed", 0)
    if frames_override is not None:
        vals["frames_per_window"] = frames_override
    vals.setdefault("frames_per_window", 5)
    scfg = session.config
    base = dict(
        n_vertices=scfg.n_vertices,
        eeg_channels=scfg.n_channels,
        eeg_window_samples=scfg.window_samples,
        frames_per_window=vals.pop("frames_per_window"),
    )
    if scale == "paper":
        extra = set(vals) - {"latent_dim"}
        if extra:
            raise ConfigError(f"paper scale fixes {sorted(extra)[0]!r}; remove it from [model]")
        return paper_scale_model_config(**base), seed
    if scale != "desk":
        raise ConfigError(f"unknown model scale {scale!r} (expected desk or paper)")
    if "encoder_widths" in vals:
        vals["encoder_widths"] = tuple(vals["encoder_widths"])
    return desk_model_config(**base, **vals), seed


def parse_regions(cfg: dict, n_vertices: int, only: str | None = None) -> list[RegionMask]:
    """[regions] entries: ``name = lo-hi`` (inclusive range) or an explicit
    comma-separated index list."""
    out = []
    for name, spec in cfg.get("regions", {}).items():
        if only is not None and name != only:
            continue
        spec = spec.strip()
        try:
            if "-" in spec and "," not in spec:
                lo, hi = (int(p) for p in spec.split("-", 1))
                idx = np.arange(lo, hi + 1)
            else:
                idx = np.array(sorted({int(p) for p in spec.split(",")}))
        except ValueError as exc:
            raise ConfigError(f"bad region spec {name!r}: {spec!r}") from exc
        if idx.size and idx.max() >= n_vertices:
            raise ConfigError(f"region {name!r} exceeds vertex count {n_vertices}")
        out.append(RegionMask(name, idx))
    if only is not None and not out:
        raise ConfigError(f"region {only!r} not defined in config")
    return out


def effective_sections(cfg: dict, **section_objects) -> dict:
    """Echoable merged config: file values plus the dataclasses actually
    used (dataclass fields win)."""
    echo = {k: dict(v) for k, v in cfg.items()}
    for section, obj in section_objects.items():
        if obj is None:
            continue
        if hasattr(obj, "__dataclass_fields__"):
            vals = {
                k: (list(v) if isinstance(v, tuple) else v)
                for k, v in vars(obj).items()
                if not k.startswith("_")
            }
        else:
            vals = dict(obj)
        echo[section] = vals
    return echo
