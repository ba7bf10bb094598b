"""Bit-exact single-file binary formats plus run metadata records.

Layout shared by all formats: a 4-byte magic, a u16 format version, a
length-prefixed canonical-JSON header, format-specific payload blocks, and
a trailing sha256 of everything before it. All numeric payloads are
little-endian with explicit dtype tags in the header; files are verified
before any state is constructed, so a truncated or corrupted file never
yields partial state. Writes go to a temp file and are renamed into place.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct

import numpy as np

from .errors import CheckpointError, ConfigError, InputError
from .model import ModelConfig, ModelState
from .synth import Session, SynthConfig, double_gamma_hrf

__all__ = [
    "save_checkpoint",
    "load_checkpoint",
    "save_session",
    "load_session",
    "save_reconstruction",
    "load_reconstruction",
    "write_meta_record",
    "file_sha256",
]

CHECKPOINT_MAGIC = b"NDCK"
SESSION_MAGIC = b"NDSS"
RECON_MAGIC = b"NDRC"
FORMAT_VERSION = 1

_DTYPE_TAGS = {0: "<f8", 1: "<f4", 2: "<i8"}
_TAG_FOR = {v: k for k, v in _DTYPE_TAGS.items()}


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _atomic_write(path: str, blob: bytes):
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def file_sha256(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _frame(magic: bytes, header: dict, blocks: list[bytes]) -> bytes:
    head = _canonical_json(header)
    body = magic + struct.pack("<HI", FORMAT_VERSION, len(head)) + head + b"".join(blocks)
    return body + hashlib.sha256(body).digest()


def _unframe(blob: bytes, magic: bytes, what: str) -> tuple[dict, bytes]:
    if len(blob) < 42:
        raise CheckpointError(f"{what}: file too short to be valid")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError(f"{what}: checksum mismatch (corrupt or truncated file)")
    if body[:4] != magic:
        raise CheckpointError(f"{what}: bad magic {body[:4]!r}, expected {magic!r}")
    version, head_len = struct.unpack("<HI", body[4:10])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{what}: unsupported format version {version}")
    header = json.loads(body[10 : 10 + head_len].decode("utf-8"))
    return header, body[10 + head_len :]


def _pack_array(arr: np.ndarray, dtype: str) -> bytes:
    return np.ascontiguousarray(arr, dtype=np.dtype(dtype)).tobytes()


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(path: str, model: ModelState, dtype: str = "<f8"):
    """Serialize all named tensors (parameters + buffers) with the config
    snapshot. Default 64-bit storage keeps reload bitwise exact; "<f4"
    halves the size at the cost of rounding."""
    if dtype not in _TAG_FOR:
        raise ConfigError(f"unsupported checkpoint dtype {dtype!r}")
    header = {
        "config": model.config.to_dict(),
        "schedule": {
            "n_steps": model.config.diffusion_steps,
            "beta_start": model.config.beta_start,
            "beta_end": model.config.beta_end,
        },
        "seed": model.seed,
        "dtype": dtype,
    }
    tensors = model.named_tensors()
    blocks = [struct.pack("<I", len(tensors))]
    for name in sorted(tensors):
        arr = tensors[name]
        encoded = name.encode("utf-8")
        blocks.append(struct.pack("<H", len(encoded)))
        blocks.append(encoded)
        blocks.append(struct.pack("<BB", _TAG_FOR[dtype], arr.ndim))
        blocks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        blocks.append(_pack_array(arr, dtype))
    _atomic_write(path, _frame(CHECKPOINT_MAGIC, header, blocks))


def load_checkpoint(path: str) -> ModelState:
    """Verify, parse, and rebuild the model; any structural problem raises
    before state is touched."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint: {exc}") from exc
    header, payload = _unframe(blob, CHECKPOINT_MAGIC, "checkpoint")

    offset = 0

    def take(n: int) -> bytes:
        nonlocal offset
        if offset + n > len(payload):
            raise CheckpointError("checkpoint payload ends mid-tensor")
        chunk = payload[offset : offset + n]
        offset += n
        return chunk

    (n_tensors,) = struct.unpack("<I", take(4))
    table: dict[str, np.ndarray] = {}
    for _ in range(n_tensors):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        tag, ndim = struct.unpack("<BB", take(2))
        if tag not in _DTYPE_TAGS:
            raise CheckpointError(f"checkpoint tensor {name!r} has unknown dtype tag {tag}")
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        dt = np.dtype(_DTYPE_TAGS[tag])
        raw = take(int(np.prod(shape)) * dt.itemsize)
        if name in table:
            raise CheckpointError(f"checkpoint tensor {name!r} appears twice")
        table[name] = np.frombuffer(raw, dtype=dt).reshape(shape).astype(np.float64)

    config = ModelConfig.from_dict(header["config"])
    model = ModelState.init(config, seed=header.get("seed", 0))
    params = model.named_parameters()
    buffers = model.named_buffers()
    expected = set(params) | set(buffers)
    missing = expected - set(table)
    extra = set(table) - expected
    if missing:
        raise CheckpointError(f"checkpoint is missing tensor {sorted(missing)[0]!r}")
    if extra:
        raise CheckpointError(f"checkpoint has unexpected tensor {sorted(extra)[0]!r}")
    for name, tensor_ in params.items():
        if table[name].shape != tensor_.data.shape:
            raise CheckpointError(
                f"checkpoint tensor {name!r} shape {table[name].shape} != {tensor_.data.shape}"
            )
        tensor_.data = table[name]
    for name, buf in buffers.items():
        if table[name].shape != buf.shape:
            raise CheckpointError(
                f"checkpoint buffer {name!r} shape {table[name].shape} != {buf.shape}"
            )
        buf[...] = table[name]
    return model


# ---------------------------------------------------------------------------
# sessions
# ---------------------------------------------------------------------------


def save_session(path: str, session: Session, include_sources: bool = True):
    """Arrays as little-endian 32-bit floats; generation config and split
    boundary in the header."""
    cfg = session.config
    header = {
        "n_sources": cfg.n_sources,
        "n_vertices": cfg.n_vertices,
        "n_channels": cfg.n_channels,
        "sample_rate_hz": cfg.sample_rate_hz,
        "tr_seconds": cfg.tr_seconds,
        "hemo_shift_seconds": cfg.hemo_shift_seconds,
        "session_seconds": cfg.session_seconds,
        "noise_std_eeg": cfg.noise_std_eeg,
        "noise_std_fmri": cfg.noise_std_fmri,
        "seed": cfg.seed,
        "n_frames": session.n_frames,
        "n_eeg_samples": session.eeg.shape[1],
        "split_frame": session.split_frame,
        "has_sources": bool(include_sources),
        "array_dtype": "<f4",
        "index_dtype": "<i8",
    }
    blocks = [
        _pack_array(session.eeg, "<f4"),
        _pack_array(session.fmri, "<f4"),
        _pack_array(session.acquisition_samples, "<i8"),
    ]
    if include_sources:
        blocks.append(_pack_array(session.sources, "<f4"))
    _atomic_write(path, _frame(SESSION_MAGIC, header, blocks))


def load_session(path: str) -> Session:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read session: {exc}") from exc
    header, payload = _unframe(blob, SESSION_MAGIC, "session")
    cfg = SynthConfig(
        n_sources=header["n_sources"],
        n_vertices=header["n_vertices"],
        n_channels=header["n_channels"],
        sample_rate_hz=header["sample_rate_hz"],
        tr_seconds=header["tr_seconds"],
        hemo_shift_seconds=header["hemo_shift_seconds"],
        session_seconds=header["session_seconds"],
        noise_std_eeg=header["noise_std_eeg"],
        noise_std_fmri=header["noise_std_fmri"],
        seed=header["seed"],
    )
    k, ts = header["n_frames"], header["n_eeg_samples"]
    sizes = [cfg.n_channels * ts * 4, k * cfg.n_vertices * 4, k * 8]
    if header["has_sources"]:
        sizes.append(cfg.n_sources * ts * 4)
    if len(payload) != sum(sizes):
        raise InputError(
            f"session payload is {len(payload)} bytes, header implies {sum(sizes)}"
        )
    views = []
    at = 0
    for sz in sizes:
        views.append(payload[at : at + sz])
        at += sz
    eeg = np.frombuffer(views[0], dtype="<f4").reshape(cfg.n_channels, ts).astype(np.float64)
    fmri = np.frombuffer(views[1], dtype="<f4").reshape(k, cfg.n_vertices).astype(np.float64)
    acq = np.frombuffer(views[2], dtype="<i8").copy()
    if header["has_sources"]:
        sources = np.frombuffer(views[3], dtype="<f4").reshape(cfg.n_sources, ts).astype(np.float64)
    else:
        sources = np.zeros((cfg.n_sources, 0))
    # f32 rounding can nudge normalized EEG past 1.0 by one ulp; clip back
    np.clip(eeg, -1.0, 1.0, out=eeg)
    hrf = double_gamma_hrf(cfg.sample_rate_hz, peak_seconds=cfg.hemo_shift_seconds)
    return Session(
        eeg=eeg, fmri=fmri, sources=sources, acquisition_samples=acq, config=cfg, hrf=hrf
    )


# ---------------------------------------------------------------------------
# reconstructions
# ---------------------------------------------------------------------------


def save_reconstruction(path: str, header: dict, windows: list[np.ndarray]):
    """Stacked reconstructed windows, one (K_w, N_v) f32 block each."""
    header = dict(header)
    header["n_windows"] = len(windows)
    if windows:
        header["frames_per_window"] = int(windows[0].shape[0])
        header["n_vertices"] = int(windows[0].shape[1])
    header["array_dtype"] = "<f4"
    blocks = [_pack_array(w, "<f4") for w in windows]
    _atomic_write(path, _frame(RECON_MAGIC, header, blocks))


def load_reconstruction(path: str) -> tuple[dict, list[np.ndarray]]:
    with open(path, "rb") as fh:
        blob = fh.read()
    header, payload = _unframe(blob, RECON_MAGIC, "reconstruction")
    n, kw, nv = header["n_windows"], header.get("frames_per_window", 0), header.get("n_vertices", 0)
    out = []
    stride = kw * nv * 4
    if len(payload) != n * stride:
        raise InputError("reconstruction payload size disagrees with header")
    for i in range(n):
        chunk = payload[i * stride : (i + 1) * stride]
        out.append(np.frombuffer(chunk, dtype="<f4").reshape(kw, nv).astype(np.float64))
    return header, out


# ---------------------------------------------------------------------------
# run metadata
# ---------------------------------------------------------------------------


def write_meta_record(out_path: str, record: dict):
    """Sidecar JSON next to every CLI output: effective config + its hash,
    the seed, and input-file hashes - enough to replay the run exactly."""
    record = dict(record)
    if "config" in record:
        record["config_sha256"] = hashlib.sha256(
            _canonical_json(record["config"])
        ).hexdigest()
    _atomic_write(out_path + ".meta.json", json.dumps(record, sort_keys=True, indent=2).encode())
