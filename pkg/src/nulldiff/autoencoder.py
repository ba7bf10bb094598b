"""Strictly linear per-frame compressor for fMRI frames.

No biases and no nonlinearity: linearity is what makes frame masking
commute with encoding, so the range/null splice can run in the compressed
space and still be exact. Breaking this (a bias, an activation) silently
invalidates anchored sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend as B
from .backend import Tensor
from .data import MeasurementOperator
from .errors import ConfigError, DimensionError

__all__ = [
    "LinearAeParams",
    "encode_frame",
    "decode_frame",
    "latent_measurement_commute_check",
]


@dataclass
class LinearAeParams:
    encode_w: Tensor  # (d, N_v)
    decode_w: Tensor  # (N_v, d)

    def __post_init__(self):
        d, nv = self.encode_w.shape
        if self.decode_w.shape != (nv, d):
            raise DimensionError(
                f"decoder shape {self.decode_w.shape} does not mirror encoder {(d, nv)}"
            )
        if d > nv:
            raise ConfigError(f"latent dim {d} exceeds vertex count {nv}")

    @property
    def latent_dim(self) -> int:
        return self.encode_w.shape[0]

    @property
    def n_vertices(self) -> int:
        return self.encode_w.shape[1]

    @classmethod
    def init(cls, n_vertices: int, latent_dim: int, seed: int | np.random.SeedSequence = 0) -> "LinearAeParams":
        """Orthonormal-row encoder with the transposed decoder, so the
        initial round-trip is the orthogonal projection onto the row space."""
        if latent_dim > n_vertices:
            raise ConfigError(f"latent dim {latent_dim} exceeds vertex count {n_vertices}")
        rng = np.random.default_rng(seed)
        q, _ = np.linalg.qr(rng.standard_normal((n_vertices, latent_dim)))
        return cls(
            encode_w=Tensor(q.T.copy(), requires_grad=True),
            decode_w=Tensor(q.copy(), requires_grad=True),
        )

    def named_parameters(self) -> dict[str, Tensor]:
        return {"encode_w": self.encode_w, "decode_w": self.decode_w}


def _apply_linear(x, w: Tensor, in_dim: int, what: str):
    """x (..., in_dim) @ w.T for both raw arrays and tracked tensors."""
    if isinstance(x, Tensor):
        if x.shape[-1] != in_dim:
            raise DimensionError(f"{what}: last axis {x.shape[-1]} != {in_dim}")
        flat = x.ndim == 1
        if flat:
            x = B.reshape(x, (1, -1))
        wt = B.transpose(w, (1, 0))
        out = B.matmul(x, wt)
        return B.reshape(out, (out.shape[-1],)) if flat else out
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != in_dim:
        raise DimensionError(f"{what}: last axis {x.shape[-1]} != {in_dim}")
    return x @ w.data.T


def encode_frame(params: LinearAeParams, x):
    """z = E x for one frame (N_v,) or stacked frames (..., N_v)."""
    return _apply_linear(x, params.encode_w, params.n_vertices, "encode")


def decode_frame(params: LinearAeParams, z):
    """x_hat = D z for one latent (d,) or stacked latents (..., d)."""
    return _apply_linear(z, params.decode_w, params.latent_dim, "decode")


def latent_measurement_commute_check(
    params: LinearAeParams, op: MeasurementOperator, frames: np.ndarray
) -> float:
    """Max |encode(A X) - A~ encode(X)| over all latent entries.

    Structural identity for any per-frame linear map; a nonzero value
    means the autoencoder is no longer safe for latent-space anchoring.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] != op.n_frames:
        raise DimensionError("frames must be (K_w, N_v) matching the mask")
    masked = np.zeros_like(frames)
    masked[op.frame_mask] = frames[op.frame_mask]
    lhs = encode_frame(params, masked)
    rhs = encode_frame(params, frames)
    rhs_masked = np.zeros_like(rhs)
    rhs_masked[op.frame_mask] = rhs[op.frame_mask]
    return float(np.abs(lhs - rhs_masked).max())
