"""End-to-end optimization of the encoder, autoencoder, and denoiser under
the joint noise-prediction + frame-reconstruction objective."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import metrics as metrics_mod
from .autoencoder import decode_frame, encode_frame
from .backend import GradTape, Tensor, tensor, tmean, mul, add, sub
from .data import SampleWindow
from .denoiser import estimate_x0, predict_noise
from .encoder import encode_windows
from .errors import ConfigError, NumericError
from .model import ModelState

__all__ = ["TrainConfig", "TrainReport", "AdamW", "diffusion_loss", "train", "shuffled_pairing"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.01
    lambda_recon: float = 1.0
    seed: int = 0
    checkpoint_every: int = 0  # epochs between checkpoint writes; 0 = off
    val_windows: int = 8

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch size must be >= 1")
        if self.learning_rate < 0 or self.weight_decay < 0 or self.lambda_recon < 0:
            raise ConfigError("rates and weights must be >= 0")
        for b in (self.adam_beta1, self.adam_beta2):
            if not 0.0 < b < 1.0:
                raise ConfigError("Adam betas must lie in (0, 1)")


@dataclass
class EpochStats:
    epoch: int
    diffusion_loss: float
    recon_loss: float
    val_mse: float
    val_pearson: float
    val_cosine: float
    seconds: float


@dataclass
class TrainReport:
    epochs: list[EpochStats] = field(default_factory=list)
    diverged: bool = False
    total_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "diverged": self.diverged,
            "total_seconds": self.total_seconds,
            "epochs": [vars(e) for e in self.epochs],
        }


class AdamW:
    """Adam with decoupled weight decay:
    p <- p - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * p."""

    def __init__(self, params: dict[str, Tensor], cfg: TrainConfig):
        self.params = params
        self.cfg = cfg
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]):
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.adam_beta1**self.t
        bc2 = 1.0 - c.adam_beta2**self.t
        for name, p in self.params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= c.adam_beta1
            m += (1.0 - c.adam_beta1) * g
            v *= c.adam_beta2
            v += (1.0 - c.adam_beta2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + c.adam_eps)
            p.data = p.data - c.learning_rate * update - c.learning_rate * c.weight_decay * p.data


def _stack_batch(batch: list[SampleWindow]) -> tuple[np.ndarray, np.ndarray]:
    frames = np.stack([w.fmri.frames for w in batch])
    eeg = np.stack([w.eeg.windows for w in batch])
    return frames, eeg


def diffusion_loss(
    model: ModelState,
    batch: list[SampleWindow],
    rng: np.random.Generator,
    lambda_recon: float = 1.0,
    predictor=None,
    noise: np.ndarray | None = None,
) -> tuple[float, float, float, dict[str, np.ndarray]]:
    """One training forward/backward over a batch.

    Per item: draw a uniform step n, noise the encoded frames to x_n, and
    score the mean squared noise-prediction error plus lambda times the
    autoencoder round-trip error. Returns (total, diffusion term,
    reconstruction term, gradients by parameter name).

    ``predictor`` overrides the model's noise head (testing hook);
    ``noise`` pins the per-item noise draw instead of sampling it.
    """
    if not batch:
        raise ConfigError("empty batch")
    sched = model.schedule
    frames_np, eeg_np = _stack_batch(batch)
    bsz, kw, _ = frames_np.shape
    if kw != model.config.frames_per_window:
        raise ConfigError(
            f"window length {kw} does not match model ({model.config.frames_per_window})"
        )

    steps = rng.integers(1, sched.n_steps + 1, size=bsz)
    if noise is None:
        noise = rng.standard_normal((bsz, kw, model.config.latent_dim))
    abar = sched.alpha_bar[steps - 1][:, None, None]

    params = model.named_parameters()
    with GradTape() as tape:
        h_eeg = encode_windows(
            model.encoder, eeg_np.reshape(bsz * kw, *eeg_np.shape[2:]), train=True
        )
        h_eeg = h_eeg if h_eeg.ndim == 3 else _reshape3(h_eeg, bsz, kw)
        z0 = encode_frame(model.autoencoder, Tensor(frames_np))
        x_n = add(mul(z0, tensor(np.sqrt(abar))), tensor(np.sqrt(1.0 - abar) * noise))
        if predictor is None:
            eps_hat = predict_noise(model.denoiser, x_n, steps, h_eeg)
        else:
            eps_hat = predictor(x_n, steps, h_eeg)
        model.latent_scale[0] = 0.99 * model.latent_scale[0] + 0.01 * float(
            np.sqrt(np.mean(z0.data**2))
        )
        diff = sub(eps_hat, tensor(noise))
        loss_diff = tmean(mul(diff, diff))
        recon = sub(decode_frame(model.autoencoder, z0), tensor(frames_np))
        loss_recon = tmean(mul(recon, recon))
        loss = add(loss_diff, mul(tensor(float(lambda_recon)), loss_recon))
        if not np.isfinite(loss.data):
            raise NumericError(
                f"non-finite loss (diffusion={float(loss_diff.data)!r}, "
                f"recon={float(loss_recon.data)!r}) on batch of {bsz}"
            )
        grad_list = tape.gradients(loss, list(params.values()))
    grads = dict(zip(params.keys(), grad_list))
    return float(loss.data), float(loss_diff.data), float(loss_recon.data), grads


def _reshape3(t: Tensor, bsz: int, kw: int) -> Tensor:
    from .backend import reshape

    return reshape(t, (bsz, kw, t.shape[-1]))


def _validate(model: ModelState, windows: list[SampleWindow], rng: np.random.Generator) -> tuple[float, float, float]:
    """Cheap conditioning probe: single-step clean estimate from full noise."""
    if not windows:
        return float("nan"), float("nan"), float("nan")
    sched = model.schedule
    n = sched.n_steps
    mses, rs, cos = [], [], []
    for w in windows:
        h = encode_windows(model.encoder, w.eeg.windows).data
        z0 = encode_frame(model.autoencoder, w.fmri.frames)
        eps = rng.standard_normal(z0.shape)
        from .schedule import q_sample

        x_n = q_sample(sched, z0, n, eps)
        eps_hat = predict_noise(model.denoiser, x_n, n, h).data
        x0_hat = estimate_x0(sched, x_n, eps_hat, n)
        pred = decode_frame(model.autoencoder, x0_hat)
        try:
            m = metrics_mod.sequence_metrics(pred, w.fmri.frames)
            mses.append(m.mse)
            rs.append(m.pearson)
            cos.append(m.cosine)
        except Exception:  # constant frames etc.; skip the probe window
            continue
    if not mses:
        return float("nan"), float("nan"), float("nan")
    return float(np.mean(mses)), float(np.mean(rs)), float(np.mean(cos))


def train(
    model: ModelState,
    windows: list[SampleWindow],
    cfg: TrainConfig,
    checkpoint_path: str | None = None,
) -> tuple[ModelState, TrainReport]:
    """Optimize the model in place over the train split of ``windows``.

    Deterministic given the seed: shuffling, step draws, and noise come
    from one generator in a fixed order. Divergence (epoch loss above 10x
    the first epoch for 3 consecutive epochs) stops early with
    ``report.diverged`` set.
    """
    train_windows = [w for w in windows if w.split_tag == "train"]
    val_windows = [w for w in windows if w.split_tag == "test"][: cfg.val_windows]
    if not train_windows:
        raise ConfigError("no training windows in dataset")

    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    rng = np.random.default_rng(seeds[0])
    val_rng_seed = seeds[1]

    params = model.named_parameters()
    opt = AdamW(params, cfg)
    report = TrainReport()
    first_epoch_loss = None
    bad_epochs = 0
    t_start = time.perf_counter()

    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(len(train_windows))
        diff_losses, recon_losses = [], []
        for i in range(0, len(order), cfg.batch_size):
            batch = [train_windows[j] for j in order[i : i + cfg.batch_size]]
            _, ld, lr_, grads = diffusion_loss(model, batch, rng, cfg.lambda_recon)
            opt.step(grads)
            diff_losses.append(ld)
            recon_losses.append(lr_)
        epoch_diff = float(np.mean(diff_losses))
        epoch_recon = float(np.mean(recon_losses))
        val_mse, val_r, val_cos = _validate(
            model, val_windows, np.random.default_rng(val_rng_seed)
        )
        report.epochs.append(
            EpochStats(
                epoch=epoch,
                diffusion_loss=epoch_diff,
                recon_loss=epoch_recon,
                val_mse=val_mse,
                val_pearson=val_r,
                val_cosine=val_cos,
                seconds=time.perf_counter() - t0,
            )
        )
        log.info(
            "epoch %d: diffusion %.4f recon %.4f val_r %.3f (%.1fs)",
            epoch,
            epoch_diff,
            epoch_recon,
            val_r,
            report.epochs[-1].seconds,
        )

        total = epoch_diff + cfg.lambda_recon * epoch_recon
        if first_epoch_loss is None:
            first_epoch_loss = total
        bad_epochs = bad_epochs + 1 if total > 10.0 * first_epoch_loss else 0
        if bad_epochs >= 3:
            report.diverged = True
            log.warning("training diverged (loss > 10x initial for 3 epochs); stopping early")
            break

        if checkpoint_path and cfg.checkpoint_every > 0 and (epoch + 1) % cfg.checkpoint_every == 0:
            from .io import save_checkpoint

            save_checkpoint(checkpoint_path, model)

    report.total_seconds = time.perf_counter() - t_start
    return model, report


def shuffled_pairing(windows: list[SampleWindow], seed: int = 0) -> list[SampleWindow]:
    """Control dataset: EEG permuted across train windows so the pairing is
    destroyed while both marginals stay intact. Test windows keep their
    true pairing, which is what the trained control is evaluated on."""
    rng = np.random.default_rng(seed)
    train_idx = [i for i, w in enumerate(windows) if w.split_tag == "train"]
    perm = rng.permutation(len(train_idx))
    if len(train_idx) > 1:
        while np.array_equal(perm, np.arange(len(train_idx))):
            perm = rng.permutation(len(train_idx))
    out = list(windows)
    for slot, src in zip(train_idx, (train_idx[p] for p in perm)):
        w = windows[slot]
        out[slot] = SampleWindow(
            fmri=w.fmri,
            eeg=windows[src].eeg,
            window_id=w.window_id,
            split_tag=w.split_tag,
            start_frame=w.start_frame,
        )
    return out
