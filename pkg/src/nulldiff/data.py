"""Domain types: BOLD frame sequences, EEG windows, region masks, and the
frame-diagonal measurement operator used for anchored reconstruction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InputError, MaskError

__all__ = [
    "FmriSequence",
    "EegSegment",
    "RegionMask",
    "MeasurementOperator",
    "SampleWindow",
    "apply_operator",
    "pseudoinverse_apply",
    "restrict_to_region",
]


def _frozen_f64(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FmriSequence:
    """A window of BOLD-like activation: frames (K_w, N_v), z-scored and
    unitless, at a fixed frame period."""

    frames: np.ndarray
    tr_seconds: float = 0.8

    def __post_init__(self):
        object.__setattr__(self, "frames", _frozen_f64(self.frames))
        if self.frames.ndim != 2 or min(self.frames.shape) < 1:
            raise DimensionError("fMRI frames must be a (K_w, N_v) array")
        if not np.isfinite(self.frames).all():
            raise InputError("fMRI frames contain non-finite values")
        if self.tr_seconds <= 0:
            raise InputError("frame period must be positive")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_vertices(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class EegSegment:
    """One EEG window per fMRI frame: (K_w, C, W) samples normalized to
    [-1, 1], where W equals one frame period of samples."""

    windows: np.ndarray
    sample_rate_hz: int
    hemo_shift_seconds: float = 4.0

    def __post_init__(self):
        object.__setattr__(self, "windows", _frozen_f64(self.windows))
        if self.windows.ndim != 3:
            raise DimensionError("EEG windows must be a (K_w, C, W) array")
        if not np.isfinite(self.windows).all():
            raise InputError("EEG windows contain non-finite values")
        if np.abs(self.windows).max(initial=0.0) > 1.0:
            raise InputError("EEG windows must be normalized to [-1, 1]")
        if self.sample_rate_hz < 1:
            raise InputError("sample rate must be >= 1 Hz")

    @property
    def n_windows(self) -> int:
        return self.windows.shape[0]

    @property
    def n_channels(self) -> int:
        return self.windows.shape[1]

    @property
    def window_samples(self) -> int:
        return self.windows.shape[2]


@dataclass(frozen=True)
class RegionMask:
    """Named subset of vertices, strictly increasing indices.

    Reference full-data sizes: whole brain 91282, V1 8405, V1+A1 18946;
    synthetic runs use scaled masks from configuration.
    """

    name: str
    vertex_indices: np.ndarray

    def __post_init__(self):
        idx = np.array(self.vertex_indices, dtype=np.int64)
        idx.setflags(write=False)
        object.__setattr__(self, "vertex_indices", idx)
        if idx.ndim != 1 or idx.size == 0:
            raise MaskError("region mask must be a non-empty index vector")
        if idx.min() < 0:
            raise MaskError("region mask indices must be non-negative")
        if not (np.diff(idx) > 0).all():
            raise MaskError("region mask indices must be strictly increasing")

    @property
    def size(self) -> int:
        return int(self.vertex_indices.size)


@dataclass(frozen=True)
class MeasurementOperator:
    """Binary frame-diagonal measurement: observed frames pass through,
    missing frames map to zero. For this operator the pseudoinverse equals
    the operator itself, so range/null projections are exact row splices."""

    frame_mask: np.ndarray

    def __post_init__(self):
        mask = np.array(self.frame_mask, dtype=bool)
        mask.setflags(write=False)
        object.__setattr__(self, "frame_mask", mask)
        if mask.ndim != 1 or mask.size == 0:
            raise DimensionError("frame mask must be a non-empty vector")

    @property
    def n_frames(self) -> int:
        return int(self.frame_mask.size)

    @property
    def observed_indices(self) -> np.ndarray:
        return np.flatnonzero(self.frame_mask)

    @property
    def missing_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.frame_mask)

    def require_mixed(self):
        """Anchored reconstruction needs >=1 observed and >=1 missing frame."""
        if not self.frame_mask.any():
            raise InputError("measurement mask observes no frames")
        if self.frame_mask.all():
            from .errors import NoIntermediateFramesError

            raise NoIntermediateFramesError("measurement mask leaves no frames to reconstruct")


@dataclass(frozen=True)
class SampleWindow:
    """A paired training/evaluation item: one fMRI window plus its aligned
    EEG windows and bookkeeping for the split."""

    fmri: FmriSequence
    eeg: EegSegment
    window_id: int
    split_tag: str = "train"
    start_frame: int = field(default=0)

    def __post_init__(self):
        if self.fmri.n_frames != self.eeg.n_windows:
            raise DimensionError(
                f"window {self.window_id}: {self.fmri.n_frames} fMRI frames vs "
                f"{self.eeg.n_windows} EEG windows"
            )
        if self.split_tag not in ("train", "test"):
            raise InputError(f"unknown split tag {self.split_tag!r}")

    @property
    def n_frames(self) -> int:
        return self.fmri.n_frames


def _mask_frames(mask: np.ndarray, frames: np.ndarray) -> np.ndarray:
    out = np.zeros_like(frames)
    out[mask] = frames[mask]
    return out


def apply_operator(op: MeasurementOperator, x: FmriSequence) -> FmriSequence:
    """y = A x: copy observed frames, zero out missing ones."""
    if op.n_frames != x.n_frames:
        raise DimensionError(f"mask has {op.n_frames} frames, sequence has {x.n_frames}")
    return FmriSequence(_mask_frames(op.frame_mask, x.frames), x.tr_seconds)


def pseudoinverse_apply(op: MeasurementOperator, y: FmriSequence) -> FmriSequence:
    """For a binary frame-diagonal operator the pseudoinverse is the
    operator itself."""
    return apply_operator(op, y)


def restrict_to_region(x: FmriSequence, region: RegionMask) -> FmriSequence:
    """Gather the region's vertices from every frame, order preserved."""
    if region.vertex_indices.max() >= x.n_vertices:
        raise MaskError(
            f"region {region.name!r} max index {int(region.vertex_indices.max())} "
            f">= N_v={x.n_vertices}"
        )
    return FmriSequence(x.frames[:, region.vertex_indices], x.tr_seconds)
