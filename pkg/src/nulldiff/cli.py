"""Command-line surface: gen-data | train | reconstruct | interrecon | eval.

Every run is seeded, echoes its effective config into a sidecar metadata
record, and fails with a machine-parsable one-line error plus a distinct
exit code per failure class.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import config as cfgmod
from . import io as iomod
from .data import MeasurementOperator
from .errors import NoIntermediateFramesError, NulldiffError
from .metrics import MetricReport, evaluate_interrecon, evaluate_translation
from .model import ModelState
from .sampler import SamplerConfig, sample_interrecon, sample_translation
from .synth import generate_session, window_session
from .trainer import train

__all__ = ["main"]


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", required=True, help="sectioned key-value config file")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nulldiff",
        description="EEG-conditioned diffusion reconstruction of fMRI sequences",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic paired session")
    _add_common(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train a model on a session file")
    _add_common(p)
    p.add_argument("--session", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--frames", type=int, default=None, help="frames per window")

    p = sub.add_parser("reconstruct", help="sample fMRI windows from EEG")
    _add_common(p)
    p.add_argument("--session", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("translation", "interrecon"), default="translation")
    p.add_argument("--delta", type=int, default=None, help="anchor stride (interrecon mode)")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--max-windows", type=int, default=None)

    p = sub.add_parser("interrecon", help="reconstruct frames between anchors")
    _add_common(p)
    p.add_argument("--session", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument(
        "--delta",
        type=int,
        required=True,
        help="anchor stride in frames: every delta-th frame of a window is "
        "observed; delta=1 leaves nothing to reconstruct",
    )
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--max-windows", type=int, default=None)

    p = sub.add_parser("eval", help="score a checkpoint on a session")
    _add_common(p)
    p.add_argument("--session", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="CSV report path")
    p.add_argument("--region", default=None, help="restrict to one configured region")
    p.add_argument("--gaps", default=None, help="comma list of anchored-reconstruction gaps")
    p.add_argument("--max-windows", type=int, default=None)
    return parser


def _anchor_mask(frames_per_window: int, delta: int) -> MeasurementOperator:
    if delta < 1:
        raise NoIntermediateFramesError("anchor stride must be >= 1")
    mask = np.zeros(frames_per_window, dtype=bool)
    mask[::delta] = True
    op = MeasurementOperator(mask)
    op.require_mixed()  # delta=1 observes everything -> dedicated error
    return op


def _load_model_and_windows(args, cfg) -> tuple[ModelState, list]:
    model = iomod.load_checkpoint(args.checkpoint)
    session = iomod.load_session(args.session)
    _, stride = cfgmod.windowing_params(cfg)
    windows = window_session(session, model.config.frames_per_window, stride)
    return model, windows


def _meta(args, cfg_echo: dict, **extra) -> dict:
    record = {
        "command": args.command,
        "config": cfg_echo,
        "seed": getattr(args, "seed", None),
    }
    for name in ("session", "checkpoint"):
        path = getattr(args, name, None)
        if path:
            record[f"{name}_sha256"] = iomod.file_sha256(path)
    record.update(extra)
    return record


def cmd_gen_data(args, cfg) -> int:
    synth_cfg = cfgmod.build_synth_config(cfg, seed=args.seed)
    session = generate_session(synth_cfg)
    iomod.save_session(args.out, session)
    echo = cfgmod.effective_sections(cfg, synth=synth_cfg)
    iomod.write_meta_record(
        args.out,
        _meta(args, echo, out_sha256=iomod.file_sha256(args.out), n_frames=session.n_frames),
    )
    print(f"wrote {args.out}: {session.n_frames} frames, {session.eeg.shape[1]} EEG samples")
    return 0


def cmd_train(args, cfg) -> int:
    session = iomod.load_session(args.session)
    frames, stride = cfgmod.windowing_params(cfg, args.frames)
    windows = window_session(session, frames, stride)
    model_cfg, model_seed = cfgmod.build_model_config(cfg, session, frames_override=frames)
    train_cfg = cfgmod.build_train_config(cfg, seed=args.seed)
    model = ModelState.init(model_cfg, seed=model_seed)
    model, report = train(model, windows, train_cfg, checkpoint_path=args.out)
    iomod.save_checkpoint(args.out, model)
    with open(args.out + ".report.json", "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
    echo = cfgmod.effective_sections(cfg, train=train_cfg, model=model_cfg.to_dict())
    iomod.write_meta_record(
        args.out, _meta(args, echo, out_sha256=iomod.file_sha256(args.out))
    )
    last = report.epochs[-1]
    print(
        f"trained {train_cfg.epochs} epochs: diffusion {last.diffusion_loss:.4f}, "
        f"recon {last.recon_loss:.4f}, val r {last.val_pearson:.3f}"
    )
    return 3 if report.diverged else 0


def _write_windows(args, cfg, model, results, kind: str, extra_header: dict) -> int:
    header = {
        "kind": kind,
        "window_ids": [r[0] for r in results],
        "start_frames": [r[1] for r in results],
        "tr_seconds": float(results[0][2].frames.tr_seconds) if results else 0.0,
        **extra_header,
    }
    iomod.save_reconstruction(args.out, header, [r[2].frames.frames for r in results])
    echo = cfgmod.effective_sections(cfg, model=model.config.to_dict())
    iomod.write_meta_record(
        args.out, _meta(args, echo, out_sha256=iomod.file_sha256(args.out), **extra_header)
    )
    print(f"wrote {args.out}: {len(results)} window(s)")
    return 0


def cmd_reconstruct(args, cfg) -> int:
    if args.mode == "interrecon":
        if args.delta is None:
            raise NulldiffError("interrecon mode needs --delta")
        return cmd_interrecon(args, cfg)
    model, windows = _load_model_and_windows(args, cfg)
    chosen = [w for w in windows if w.split_tag == args.split][: args.max_windows]
    base = cfgmod.build_sampler_config(cfg, seed=args.seed)
    results = []
    for i, w in enumerate(chosen):
        scfg = base.with_seed(base.seed + i)
        results.append((w.window_id, w.start_frame, sample_translation(model, w.eeg, scfg)))
    return _write_windows(
        args, cfg, model, results, "translation", {"steps": base.steps, "eta": base.eta}
    )


def cmd_interrecon(args, cfg) -> int:
    model, windows = _load_model_and_windows(args, cfg)
    op = _anchor_mask(model.config.frames_per_window, args.delta)
    chosen = [w for w in windows if w.split_tag == args.split][: args.max_windows]
    base = cfgmod.build_sampler_config(cfg, seed=args.seed)
    results = []
    missing = op.missing_indices
    errs = []
    for i, w in enumerate(chosen):
        scfg = base.with_seed(base.seed + i)
        res = sample_interrecon(model, w.eeg, w.fmri.frames, op, scfg)
        errs.append(float(np.mean((res.frames.frames[missing] - w.fmri.frames[missing]) ** 2)))
        results.append((w.window_id, w.start_frame, res))
    code = _write_windows(
        args,
        cfg,
        model,
        results,
        "interrecon",
        {
            "steps": base.steps,
            "eta": base.eta,
            "delta": args.delta,
            "frame_mask": [bool(b) for b in op.frame_mask],
        },
    )
    print(f"missing-frame mse: {float(np.mean(errs)):.4f} over {len(errs)} window(s)")
    return code


def _report_rows(reports: list[MetricReport]) -> list[dict]:
    rows = []
    for rep in reports:
        for i, m in enumerate(rep.per_window):
            rows.append(
                {
                    "method": rep.method,
                    "region": rep.region,
                    "gap": "" if rep.gap is None else rep.gap,
                    "frame_count": rep.frame_count,
                    "window": i,
                    "mse": f"{m.mse:.10g}",
                    "pearson": f"{m.pearson:.10g}",
                    "cosine": f"{m.cosine:.10g}",
                }
            )
        rows.append(
            {
                "method": rep.method,
                "region": rep.region,
                "gap": "" if rep.gap is None else rep.gap,
                "frame_count": rep.frame_count,
                "window": "mean",
                "mse": f"{rep.mse:.10g}",
                "pearson": f"{rep.pearson:.10g}",
                "cosine": f"{rep.cosine:.10g}",
            }
        )
    return rows


def cmd_eval(args, cfg) -> int:
    model, windows = _load_model_and_windows(args, cfg)
    test = [w for w in windows if w.split_tag == "test"]
    base = cfgmod.build_sampler_config(cfg, seed=args.seed)
    regions = cfgmod.parse_regions(cfg, model.config.n_vertices, only=args.region)
    max_windows = args.max_windows or cfg.get("train", {}).get("max_eval_windows")
    reports = evaluate_translation(model, test, base, regions=regions, max_windows=max_windows)
    if args.gaps:
        gaps = [int(g) for g in args.gaps.split(",")]
        reports += evaluate_interrecon(model, test, gaps, sampler_cfg=base)
    rows = _report_rows(reports)
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    echo = cfgmod.effective_sections(cfg, sampler=base)
    iomod.write_meta_record(args.out, _meta(args, echo, out_sha256=iomod.file_sha256(args.out)))

    print(f"{'method':<12} {'region':<12} {'gap':>4} {'mse':>9} {'r':>8} {'cos':>8}")
    for rep in reports:
        gap = "" if rep.gap is None else rep.gap
        print(
            f"{rep.method:<12} {rep.region:<12} {gap:>4} "
            f"{rep.mse:>9.4f} {rep.pearson:>8.4f} {rep.cosine:>8.4f}"
        )
    return 0


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "reconstruct": cmd_reconstruct,
    "interrecon": cmd_interrecon,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load_config_file(args.config)
        return _COMMANDS[args.command](args, cfg)
    except NulldiffError as exc:
        print(f"error kind={exc.kind} code={exc.exit_code}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error kind=missing-file code=2: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # unexpected: still one parsable line
        print(f"error kind=internal code=1: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
