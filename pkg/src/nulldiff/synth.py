"""Synthetic paired EEG/fMRI sessions with a known linear coupling.

Latent band-limited sources drive both modalities: EEG is an instantaneous
channel mixture at full rate, fMRI is a vertex mixture of the
hemodynamically filtered sources sampled once per frame period. The
coupling is linear by construction so a closed-form ridge regression gives
a performance ceiling for any learned model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.signal import fftconvolve

from .data import EegSegment, FmriSequence, SampleWindow
from .errors import ConfigError, InputError

__all__ = [
    "SynthConfig",
    "HrfKernel",
    "Session",
    "double_gamma_hrf",
    "generate_session",
    "window_session",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynthConfig:
    """Desk-scale defaults: small enough to train on a CPU in minutes."""

    n_sources: int = 8
    n_vertices: int = 256
    n_channels: int = 16
    sample_rate_hz: int = 250
    tr_seconds: float = 0.8
    hemo_shift_seconds: float = 4.0
    session_seconds: float = 1200.0
    noise_std_eeg: float = 0.0
    noise_std_fmri: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("n_sources", "n_vertices", "n_channels", "sample_rate_hz"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.tr_seconds <= 0 or self.session_seconds <= 0:
            raise ConfigError("durations must be positive")
        if self.noise_std_eeg < 0 or self.noise_std_fmri < 0:
            raise ConfigError("noise levels must be >= 0")
        if self.hemo_shift_seconds < 0:
            raise ConfigError("hemodynamic shift must be >= 0")
        if self.session_seconds <= self.hemo_shift_seconds + self.tr_seconds:
            raise ConfigError("session too short to fit any frame after the shift")

    @property
    def window_samples(self) -> int:
        return int(round(self.tr_seconds * self.sample_rate_hz))

    @property
    def total_samples(self) -> int:
        return int(round(self.session_seconds * self.sample_rate_hz))


@dataclass(frozen=True)
class HrfKernel:
    """Discretized hemodynamic impulse response at the EEG rate."""

    taps: np.ndarray
    peak_seconds: float

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)
        if taps.ndim != 1 or taps.size < 2:
            raise ConfigError("HRF taps must be a vector")
        if taps.sum() <= 0:
            raise ConfigError("HRF taps must sum to a positive value")
        if not (2.0 < self.peak_seconds < 8.0):
            raise ConfigError(f"HRF peak {self.peak_seconds}s outside (2s, 8s)")


def double_gamma_hrf(
    sample_rate_hz: int,
    peak_seconds: float = 4.0,
    undershoot_seconds: float = 15.0,
    undershoot_ratio: float = 0.35,
    duration_seconds: float = 30.0,
) -> HrfKernel:
    """Double-gamma response: a positive lobe peaking at ``peak_seconds``
    minus a late undershoot, truncated at ``duration_seconds`` and
    normalized to unit sum.

    The default peak equals the EEG->fMRI alignment shift so that frames
    lag their generating activity by exactly that shift.
    """
    a1, a2 = 6.0, 12.0
    b1 = peak_seconds / a1
    b2 = undershoot_seconds / a2
    t = np.arange(int(round(duration_seconds * sample_rate_hz))) / sample_rate_hz
    with np.errstate(divide="ignore", invalid="ignore"):
        lobe = (t / peak_seconds) ** a1 * np.exp((peak_seconds - t) / b1)
        dip = (t / undershoot_seconds) ** a2 * np.exp((undershoot_seconds - t) / b2)
    taps = np.nan_to_num(lobe - undershoot_ratio * dip, nan=0.0)
    taps = taps / taps.sum()
    peak = float(t[int(np.argmax(taps))])
    return HrfKernel(taps=taps, peak_seconds=peak)


@dataclass(frozen=True)
class Session:
    """A full synthetic recording plus its generating ground truth."""

    eeg: np.ndarray  # (C, T_s), channel-normalized to [-1, 1]
    fmri: np.ndarray  # (K, N_v), z-scored per vertex
    sources: np.ndarray  # (n_sources, T_s) on the EEG grid
    acquisition_samples: np.ndarray  # (K,) EEG-sample index of each frame
    config: SynthConfig
    hrf: HrfKernel

    @property
    def n_frames(self) -> int:
        return self.fmri.shape[0]

    @property
    def split_frame(self) -> int:
        """First frame of the held-out final 20% of session time."""
        return int(0.8 * self.n_frames)


def _default_sources(
    cfg: SynthConfig, rng: np.random.Generator
) -> Callable[[np.ndarray], np.ndarray]:
    """Sums of fixed-frequency sinusoids per source, unit variance.

    Slow band (0.03-0.25 Hz): fast enough that linear interpolation across
    a few frame periods is visibly wrong, slow enough to survive the
    hemodynamic low-pass.
    """
    n_osc = 3
    freqs = rng.uniform(0.03, 0.25, size=(cfg.n_sources, n_osc))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(cfg.n_sources, n_osc))
    amps = rng.uniform(0.5, 1.5, size=(cfg.n_sources, n_osc))
    # analytic std of a sinusoid sum with independent phases
    scale = np.sqrt((amps**2).sum(axis=1) / 2.0)

    def evaluate(t: np.ndarray) -> np.ndarray:
        args = 2.0 * np.pi * freqs[:, :, None] * t[None, None, :] + phases[:, :, None]
        z = (amps[:, :, None] * np.sin(args)).sum(axis=1)
        return z / scale[:, None]

    return evaluate


def generate_session(
    cfg: SynthConfig,
    source_fn: Callable[[np.ndarray], np.ndarray] | None = None,
) -> Session:
    """Draw one paired session deterministically from the config seed.

    ``source_fn(t) -> (n_sources, len(t))`` overrides the default random
    oscillators; it is evaluated on an extended time grid (negative times
    included) so the hemodynamic convolution has no start-up transient.
    """
    rng = np.random.default_rng(cfg.seed)
    hrf = double_gamma_hrf(cfg.sample_rate_hz, peak_seconds=cfg.hemo_shift_seconds)
    mix_eeg = rng.standard_normal((cfg.n_channels, cfg.n_sources)) / np.sqrt(cfg.n_sources)
    mix_fmri = rng.standard_normal((cfg.n_vertices, cfg.n_sources)) / np.sqrt(cfg.n_sources)
    if source_fn is None:
        source_fn = _default_sources(cfg, rng)

    n_taps = hrf.taps.size
    t_total = cfg.total_samples
    rate = cfg.sample_rate_hz
    # extended grid: (n_taps - 1) samples of history before t=0
    t_ext = (np.arange(t_total + n_taps - 1) - (n_taps - 1)) / rate
    sources_ext = np.asarray(source_fn(t_ext), dtype=np.float64)
    if sources_ext.shape != (cfg.n_sources, t_ext.size):
        raise ConfigError(
            f"source function returned shape {sources_ext.shape}, "
            f"expected {(cfg.n_sources, t_ext.size)}"
        )
    if not np.isfinite(sources_ext).all():
        raise InputError("source signals contain non-finite values")
    sources = sources_ext[:, n_taps - 1 :]

    # frame k is acquired at k*TR + shift; its window is [k*TR, k*TR + W)
    tr, shift = cfg.tr_seconds, cfg.hemo_shift_seconds
    n_frames = int(np.floor((cfg.session_seconds - shift) / tr - 1e-9)) + 1
    acq = np.round((np.arange(n_frames) * tr + shift) * rate).astype(np.int64)
    n_frames = int((acq <= t_total - 1).sum())
    # every frame's EEG window [k*TR, k*TR + W) must also fit the recording
    n_frames = min(n_frames, t_total // cfg.window_samples)
    acq = acq[:n_frames]
    if n_frames < 1:
        raise ConfigError("session too short: no frame fits after the shift")

    convolved = fftconvolve(sources_ext, hrf.taps[None, :], mode="valid", axes=1)
    fmri = (mix_fmri @ convolved[:, acq]).T
    if cfg.noise_std_fmri > 0:
        fmri = fmri + cfg.noise_std_fmri * rng.standard_normal(fmri.shape)
    mean = fmri.mean(axis=0)
    std = fmri.std(axis=0)
    std[std < 1e-12] = 1.0
    fmri = (fmri - mean) / std

    eeg = mix_eeg @ sources
    if cfg.noise_std_eeg > 0:
        eeg = eeg + cfg.noise_std_eeg * rng.standard_normal(eeg.shape)
    peak = np.abs(eeg).max(axis=1)
    peak[peak < 1e-12] = 1.0
    eeg = eeg / peak[:, None]

    return Session(
        eeg=eeg,
        fmri=fmri,
        sources=sources,
        acquisition_samples=acq,
        config=cfg,
        hrf=hrf,
    )


def _slice_windows(session: Session, start: int, n_frames: int) -> tuple[np.ndarray, np.ndarray]:
    cfg = session.config
    w = cfg.window_samples
    frames = session.fmri[start : start + n_frames]
    eeg = np.empty((n_frames, cfg.n_channels, w))
    for i in range(n_frames):
        s0 = int(round((start + i) * cfg.tr_seconds * cfg.sample_rate_hz))
        eeg[i] = session.eeg[:, s0 : s0 + w]
    return frames, eeg


def window_session(
    session: Session, frames_per_window: int, stride_frames: int | None = None
) -> list[SampleWindow]:
    """Cut the session into windows and split train/test.

    The final 20% of session time is held out; the boundary snaps down to
    a window-start multiple so no window straddles it. Windows entirely
    before the boundary are train, windows starting at or after it are
    test. If the session only admits windows that straddle (e.g. a single
    session-length window), everything is assigned to train with a warning.
    """
    cfg = session.config
    k = session.n_frames
    kw = frames_per_window
    stride = kw if stride_frames is None else stride_frames
    if kw < 1 or stride < 1:
        raise ConfigError("window length and stride must be >= 1")
    if kw > k:
        raise ConfigError(f"window of {kw} frames exceeds session length {k}")

    boundary = (int(0.8 * k) // stride) * stride
    starts = list(range(0, k - kw + 1, stride))
    windows: list[SampleWindow] = []
    wid = 0
    for a in starts:
        if a + kw <= boundary:
            tag = "train"
        elif a >= boundary:
            tag = "test"
        else:
            continue  # straddles the split boundary
        frames, eeg = _slice_windows(session, a, kw)
        windows.append(
            SampleWindow(
                fmri=FmriSequence(frames, cfg.tr_seconds),
                eeg=EegSegment(eeg, cfg.sample_rate_hz, cfg.hemo_shift_seconds),
                window_id=wid,
                split_tag=tag,
                start_frame=a,
            )
        )
        wid += 1

    if not windows and starts:
        log.warning(
            "degenerate split: every window straddles the 80%% boundary; "
            "assigning all %d window(s) to train",
            len(starts),
        )
        for a in starts:
            frames, eeg = _slice_windows(session, a, kw)
            windows.append(
                SampleWindow(
                    fmri=FmriSequence(frames, cfg.tr_seconds),
                    eeg=EegSegment(eeg, cfg.sample_rate_hz, cfg.hemo_shift_seconds),
                    window_id=wid,
                    split_tag="train",
                    start_frame=a,
                )
            )
            wid += 1
    return windows
