"""Reconstruction metrics and the evaluation protocols.

Aggregation rule (fixed so numbers are reproducible): every metric is
computed per frame over vertices, averaged over the frames of a window,
then averaged over windows. Constant inputs raise instead of silently
returning a convention value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import FmriSequence, MeasurementOperator, RegionMask, restrict_to_region
from .errors import ConfigError, DimensionError, UndefinedMetricError
from .model import ModelState
from .sampler import (
    SamplerConfig,
    linear_interpolate,
    sample_interrecon,
    sample_translation,
)

__all__ = [
    "MetricReport",
    "SequenceMetrics",
    "mse",
    "pearson_r",
    "cosine_sim",
    "sequence_metrics",
    "evaluate_translation",
    "evaluate_interrecon",
]


def mse(pred, truth) -> float:
    """Mean squared difference over all frames and vertices."""
    p = pred.frames if isinstance(pred, FmriSequence) else np.asarray(pred, dtype=np.float64)
    t = truth.frames if isinstance(truth, FmriSequence) else np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape:
        raise DimensionError(f"shape mismatch: {p.shape} vs {t.shape}")
    return float(np.mean((p - t) ** 2))


def pearson_r(pred, truth) -> float:
    """Pearson correlation of two vectors; errors on constant input."""
    p = np.asarray(pred, dtype=np.float64).reshape(-1)
    t = np.asarray(truth, dtype=np.float64).reshape(-1)
    if p.shape != t.shape:
        raise DimensionError(f"length mismatch: {p.size} vs {t.size}")
    if p.size < 2:
        raise DimensionError("correlation needs at least 2 entries")
    pc = p - p.mean()
    tc = t - t.mean()
    sp = np.sqrt((pc * pc).sum())
    st = np.sqrt((tc * tc).sum())
    if sp == 0.0 or st == 0.0:
        raise UndefinedMetricError("correlation undefined for constant input")
    return float((pc * tc).sum() / (sp * st))


def cosine_sim(pred, truth) -> float:
    """Cosine similarity of two vectors; errors on a zero vector."""
    p = np.asarray(pred, dtype=np.float64).reshape(-1)
    t = np.asarray(truth, dtype=np.float64).reshape(-1)
    if p.shape != t.shape:
        raise DimensionError(f"length mismatch: {p.size} vs {t.size}")
    np_ = np.sqrt((p * p).sum())
    nt = np.sqrt((t * t).sum())
    if np_ == 0.0 or nt == 0.0:
        raise UndefinedMetricError("cosine similarity undefined for a zero vector")
    return float((p * t).sum() / (np_ * nt))


@dataclass(frozen=True)
class SequenceMetrics:
    mse: float
    pearson: float
    cosine: float


def sequence_metrics(pred, truth) -> SequenceMetrics:
    """Per-frame r and cosine over vertices, averaged over frames; MSE over
    everything."""
    p = pred.frames if isinstance(pred, FmriSequence) else np.asarray(pred, dtype=np.float64)
    t = truth.frames if isinstance(truth, FmriSequence) else np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape:
        raise DimensionError(f"shape mismatch: {p.shape} vs {t.shape}")
    if p.ndim != 2:
        raise DimensionError("expected (K, N_v) frame stacks")
    rs = [pearson_r(p[k], t[k]) for k in range(p.shape[0])]
    cs = [cosine_sim(p[k], t[k]) for k in range(p.shape[0])]
    return SequenceMetrics(
        mse=float(np.mean((p - t) ** 2)),
        pearson=float(np.mean(rs)),
        cosine=float(np.mean(cs)),
    )


@dataclass
class MetricReport:
    """Scores for one (method, region, frame-length) cell.

    ``per_window`` holds one (mse, r, cos) triple per evaluated window or
    trial; the aggregate fields are their means.
    """

    method: str
    region: str
    frame_count: int
    per_window: list[SequenceMetrics] = field(default_factory=list)
    mse: float = float("nan")
    pearson: float = float("nan")
    cosine: float = float("nan")
    gap: int | None = None

    def finalize(self) -> "MetricReport":
        if self.per_window:
            self.mse = float(np.mean([m.mse for m in self.per_window]))
            self.pearson = float(np.mean([m.pearson for m in self.per_window]))
            self.cosine = float(np.mean([m.cosine for m in self.per_window]))
        return self

    def median_mse(self) -> float:
        return float(np.median([m.mse for m in self.per_window]))


def evaluate_translation(
    model: ModelState,
    windows,
    sampler_cfg: SamplerConfig | None = None,
    regions: list[RegionMask] | None = None,
    max_windows: int | None = None,
) -> list[MetricReport]:
    """Full sampling on each window, scored whole-mask and per region."""
    sampler_cfg = sampler_cfg or SamplerConfig()
    regions = regions or []
    eval_windows = list(windows)[: max_windows or len(windows)]
    if not eval_windows:
        raise ConfigError("no windows to evaluate")
    kw = model.config.frames_per_window
    reports = {
        r.name: MetricReport(method="translation", region=r.name, frame_count=kw)
        for r in regions
    }
    reports["all"] = MetricReport(method="translation", region="all", frame_count=kw)
    for i, w in enumerate(eval_windows):
        cfg_i = sampler_cfg.with_seed(sampler_cfg.seed + i)
        result = sample_translation(model, w.eeg, cfg_i)
        reports["all"].per_window.append(sequence_metrics(result.frames, w.fmri))
        for r in regions:
            reports[r.name].per_window.append(
                sequence_metrics(
                    restrict_to_region(result.frames, r), restrict_to_region(w.fmri, r)
                )
            )
    return [rep.finalize() for rep in reports.values()]


def _anchor_setup(kw: int, gap: int) -> tuple[int, int, list[int]]:
    center = kw // 2
    lo, hi = center - gap, center + gap
    if gap < 1:
        raise ConfigError("gap must be >= 1")
    if lo < 0 or hi > kw - 1:
        raise ConfigError(f"gap {gap} does not fit a {kw}-frame window")
    return lo, hi, list(range(lo + 1, hi))


def evaluate_interrecon(
    model: ModelState,
    windows,
    gaps,
    methods=("linear", "no_null", "null"),
    sampler_cfg: SamplerConfig | None = None,
    n_trials: int = 20,
) -> list[MetricReport]:
    """Anchored-reconstruction comparison on test windows.

    For each gap, anchors sit at center +/- gap and the frames strictly
    between them are scored. ``no_null`` runs the identical checkpoint and
    seeds in translation mode (projection disabled); ``linear`` blends the
    anchor frames. One trial = one (window, seed) pair, windows cycled.
    """
    sampler_cfg = sampler_cfg or SamplerConfig()
    windows = list(windows)
    if not windows:
        raise ConfigError("no windows to evaluate")
    kw = model.config.frames_per_window
    reports = []
    for gap in gaps:
        lo, hi, queries = _anchor_setup(kw, gap)
        mask = np.zeros(kw, dtype=bool)
        mask[lo] = mask[hi] = True
        op = MeasurementOperator(mask)
        per_method = {
            m: MetricReport(method=m, region="all", frame_count=kw, gap=gap) for m in methods
        }
        for trial in range(n_trials):
            w = windows[trial % len(windows)]
            truth_q = w.fmri.frames[queries]
            cfg_t = sampler_cfg.with_seed(sampler_cfg.seed + trial)
            if "linear" in per_method:
                pred = linear_interpolate(w.fmri.frames[[lo, hi]], (lo, hi), queries)
                per_method["linear"].per_window.append(sequence_metrics(pred, truth_q))
            if "no_null" in per_method:
                res = sample_translation(model, w.eeg, cfg_t)
                per_method["no_null"].per_window.append(
                    sequence_metrics(res.frames.frames[queries], truth_q)
                )
            if "null" in per_method:
                res = sample_interrecon(model, w.eeg, w.fmri.frames, op, cfg_t)
                per_method["null"].per_window.append(
                    sequence_metrics(res.frames.frames[queries], truth_q)
                )
        reports.extend(rep.finalize() for rep in per_method.values())
    return reports
