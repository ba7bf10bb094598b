"""Variance schedule, forward noising process, and the ancestral posterior
update of the reverse process."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError

__all__ = ["NoiseSchedule", "make_linear_schedule", "q_sample", "posterior_step"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step variances beta_n with derived alpha_n = 1 - beta_n and
    alpha_bar_n = prod_{i<=n} alpha_i. Arrays are indexed by step n-1 for
    n in [1, N]; alpha_bar at n=0 is 1 by convention."""

    n_steps: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    def __post_init__(self):
        for name in ("beta", "alpha", "alpha_bar"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (len(self.beta) == len(self.alpha) == len(self.alpha_bar) == self.n_steps):
            raise ConfigError("schedule arrays must all have length N")
        if self.beta.min() <= 0.0 or self.beta.max() >= 1.0:
            raise ConfigError("beta values must lie strictly inside (0, 1)")
        if not (np.diff(self.beta) > 0).all():
            raise ConfigError("beta values must be strictly increasing")
        if not (np.diff(self.alpha_bar) < 0).all():
            raise ConfigError("alpha_bar must be strictly decreasing")
        if self.alpha_bar[-1] >= 0.01:
            # fine for toy step counts; the default 1000-step schedule ends ~4e-5
            log.warning(
                "terminal alpha_bar %.3g >= 0.01: the forward process does not "
                "reach near-pure noise",
                self.alpha_bar[-1],
            )

    def alpha_bar_at(self, n: int) -> float:
        """alpha_bar_n with the n=0 convention; n in [0, N]."""
        if not 0 <= n <= self.n_steps:
            raise IndexError(f"step {n} outside [0, {self.n_steps}]")
        return 1.0 if n == 0 else float(self.alpha_bar[n - 1])

    def _check_step(self, n: int):
        if not 1 <= n <= self.n_steps:
            raise IndexError(f"diffusion step {n} outside [1, {self.n_steps}]")


def make_linear_schedule(n_steps: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> NoiseSchedule:
    """Linearly interpolated beta values, endpoints inclusive."""
    if n_steps < 2:
        raise ConfigError("schedule needs at least 2 steps")
    if not (0.0 < beta_start < beta_end < 1.0):
        raise ConfigError(
            f"need 0 < beta_start < beta_end < 1, got ({beta_start}, {beta_end})"
        )
    beta = np.linspace(beta_start, beta_end, n_steps)
    alpha = 1.0 - beta
    return NoiseSchedule(n_steps, beta, alpha, np.cumprod(alpha))


def q_sample(sched: NoiseSchedule, x0: np.ndarray, n: int, eps: np.ndarray) -> np.ndarray:
    """Jump directly to the noisy state at step n:
    x_n = sqrt(abar_n) x0 + sqrt(1 - abar_n) eps."""
    sched._check_step(n)
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise DimensionError(f"noise shape {eps.shape} != data shape {x0.shape}")
    abar = sched.alpha_bar[n - 1]
    return np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * eps


def posterior_variance(sched: NoiseSchedule, n: int) -> float:
    """sigma_n^2 = ((1 - abar_{n-1}) / (1 - abar_n)) * beta_n; zero at n=1."""
    sched._check_step(n)
    abar_prev = sched.alpha_bar_at(n - 1)
    abar = sched.alpha_bar[n - 1]
    return (1.0 - abar_prev) / (1.0 - abar) * sched.beta[n - 1]


def posterior_coefficients(sched: NoiseSchedule, n: int) -> tuple[float, float]:
    """Weights (on the clean estimate, on the current state) of the
    ancestral posterior mean."""
    sched._check_step(n)
    abar_prev = sched.alpha_bar_at(n - 1)
    abar = sched.alpha_bar[n - 1]
    beta = sched.beta[n - 1]
    alpha = sched.alpha[n - 1]
    c_clean = np.sqrt(abar_prev) * beta / (1.0 - abar)
    c_state = np.sqrt(alpha) * (1.0 - abar_prev) / (1.0 - abar)
    return float(c_clean), float(c_state)


def posterior_step(
    sched: NoiseSchedule,
    x_n: np.ndarray,
    x0_hat: np.ndarray,
    n: int,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """One ancestral reverse step:
    x_{n-1} = c_clean * x0_hat + c_state * x_n + sigma_n * noise.

    At n=1 the state coefficient vanishes and sigma is zero, so the clean
    estimate is returned exactly (special-cased: the general formula is
    only equal up to rounding).
    """
    sched._check_step(n)
    x_n = np.asarray(x_n, dtype=np.float64)
    x0_hat = np.asarray(x0_hat, dtype=np.float64)
    if x_n.shape != x0_hat.shape:
        raise DimensionError("state and clean-estimate shapes differ")
    if n == 1:
        return x0_hat.copy()
    c_clean, c_state = posterior_coefficients(sched, n)
    out = c_clean * x0_hat + c_state * x_n
    if noise is not None:
        out = out + np.sqrt(posterior_variance(sched, n)) * np.asarray(noise, dtype=np.float64)
    return out
