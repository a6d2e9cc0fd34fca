"""WAV ingestion, synthetic corpus generation, checkpointing, metrics export.

Checkpoints and spectrogram caches share one binary container:

    magic (8 bytes) | u32 format_version | u32 meta_len | meta JSON
    | float64 little-endian arrays, row-major, in declared order
    | 8-byte blake2b checksum of everything before it

JSON float serialization uses repr, which round-trips doubles exactly, so
load(save(x)) is bit-exact.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import models
from .dsp import Spectrogram
from .mathcore import Rng
from .training import NormalizationStats, TrainConfig

MAGIC = b"GBRBMCK1"
FORMAT_VERSION = 1


class MalformedHeaderError(ValueError):
    pass


class UnsupportedEncodingError(ValueError):
    pass


class EmptyAudioError(ValueError):
    pass


class VersionMismatchError(ValueError):
    pass


class CorruptPayloadError(ValueError):
    pass


# ---------------------------------------------------------------------------
# audio


@dataclass
class AudioClip:
    samples: np.ndarray  # float64 in [-1, 1]
    sample_rate: int
    source_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")


def read_wav(path) -> AudioClip:
    """Read a RIFF WAV file (PCM16 or float32; first channel of multichannel)."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise MalformedHeaderError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        cid = raw[pos:pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise MalformedHeaderError(f"{path}: truncated '{cid.decode(errors='replace')}' chunk")
        if cid == b"fmt ":
            if size < 16:
                raise MalformedHeaderError(f"{path}: fmt chunk too small")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            data = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned
    if fmt is None or data is None:
        raise MalformedHeaderError(f"{path}: missing fmt or data chunk")

    audio_format, channels, sample_rate, _, _, bits = fmt
    if audio_format == 1 and bits == 16:
        samples = np.frombuffer(data[: len(data) - len(data) % 2], dtype="<i2")
        samples = samples.astype(np.float64) / 32768.0
    elif audio_format == 3 and bits == 32:
        samples = np.frombuffer(data[: len(data) - len(data) % 4], dtype="<f4")
        samples = samples.astype(np.float64)
    else:
        raise UnsupportedEncodingError(
            f"{path}: unsupported encoding (format {audio_format}, {bits}-bit)")
    if channels > 1:
        samples = samples[: len(samples) - len(samples) % channels]
        samples = samples.reshape(-1, channels)[:, 0]
    if samples.size == 0:
        raise EmptyAudioError(f"{path}: no audio samples")
    return AudioClip(samples=samples, sample_rate=sample_rate, source_id=str(path))


def write_wav(path, samples, sample_rate: int):
    """Write mono PCM16; samples are clipped to [-1, 1] before quantization."""
    samples = np.asarray(samples, dtype=np.float64)
    pcm = np.clip(np.round(samples * 32768.0), -32768, 32767).astype("<i2")
    payload = pcm.tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, sample_rate,
                                    sample_rate * 2, 2, 16)
    header += b"data" + struct.pack("<I", len(payload))
    Path(path).write_bytes(header + payload)


def synth_speechlike(rng: Rng, seconds: float, sample_rate: int = 16000,
                     source_id: str = "synth") -> AudioClip:
    """Speech-like test signal: drifting harmonic source shaped by formant-like
    resonances, with syllabic amplitude modulation and inserted silences."""
    if seconds <= 0:
        raise ValueError("seconds must be positive")
    n = int(round(seconds * sample_rate))
    t = np.arange(n) / sample_rate

    # fundamental drifts between 80 and 300 Hz through random control points
    ctrl = rng.gen.uniform(80.0, 300.0, size=max(2, int(seconds * 4) + 1))
    f0 = np.interp(np.arange(n), np.linspace(0, n - 1, ctrl.size), ctrl)
    phase = 2.0 * np.pi * np.cumsum(f0) / sample_rate

    centers = rng.gen.uniform([300.0, 1000.0, 2200.0], [800.0, 1800.0, 3200.0])
    widths = rng.gen.uniform(80.0, 160.0, size=3)

    x = np.zeros(n)
    nyq_cut = 0.45 * sample_rate
    for k in range(1, 41):
        fk = k * f0
        gain = sum(np.exp(-0.5 * ((fk - fc) / bw) ** 2)
                   for fc, bw in zip(centers, widths))
        gain = np.where(fk < nyq_cut, gain + (0.3 if k == 1 else 0.0), 0.0)
        x += gain * np.sin(k * phase)

    am_rate = rng.gen.uniform(2.0, 5.0)
    am_phase = rng.gen.uniform(0.0, 2.0 * np.pi)
    x *= 0.55 + 0.45 * np.sin(2.0 * np.pi * am_rate * t + am_phase)

    # carve out silences (~15% of the clip in a few chunks)
    n_sil = max(1, int(round(seconds)))
    for _ in range(n_sil):
        dur = int(rng.gen.uniform(0.08, 0.18) * sample_rate)
        start = int(rng.gen.uniform(0, max(1, n - dur)))
        x[start:start + dur] = 0.0

    peak = np.max(np.abs(x))
    if peak > 0:
        x *= 0.9 / peak
    return AudioClip(samples=x, sample_rate=sample_rate, source_id=source_id)


# ---------------------------------------------------------------------------
# binary container


def _pack(kind: str, arrays: dict[str, np.ndarray], meta: dict) -> bytes:
    header_meta = {
        "model_kind": kind,
        "arrays": [[name, list(arr.shape)] for name, arr in arrays.items()],
        **meta,
    }
    meta_bytes = json.dumps(header_meta, sort_keys=True).encode()
    blob = MAGIC + struct.pack("<II", FORMAT_VERSION, len(meta_bytes)) + meta_bytes
    for arr in arrays.values():
        blob += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    return blob + hashlib.blake2b(blob, digest_size=8).digest()


def _unpack(raw: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if len(raw) < 24 or raw[:8] != MAGIC:
        raise CorruptPayloadError("bad magic or truncated file")
    body, checksum = raw[:-8], raw[-8:]
    if hashlib.blake2b(body, digest_size=8).digest() != checksum:
        raise CorruptPayloadError("checksum mismatch")
    version, meta_len = struct.unpack_from("<II", raw, 8)
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"file format version {version}, this build reads version {FORMAT_VERSION}")
    meta = json.loads(raw[16:16 + meta_len].decode())
    pos = 16 + meta_len
    arrays = {}
    for name, shape in meta["arrays"]:
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(body[pos:pos + 8 * count], dtype="<f8")
        if arr.size != count:
            raise CorruptPayloadError(f"array '{name}' truncated")
        arrays[name] = arr.reshape(shape).copy()
        pos += 8 * count
    return meta, arrays


# ---------------------------------------------------------------------------
# checkpoints


@dataclass
class Checkpoint:
    model_kind: str  # "gamma" | "gauss" | "bern"
    params: object  # matching *RbmParams instance
    norm_stats: NormalizationStats | None = None
    train_config: TrainConfig | None = None


_PARAM_CLASSES = {
    "gamma": models.GammaRbmParams,
    "gauss": models.GaussRbmParams,
    "bern": models.BernRbmParams,
}


def _stats_to_meta(stats: NormalizationStats | None):
    if stats is None:
        return None
    return {
        "kind": stats.kind,
        "per_dim_mean": stats.per_dim_mean.tolist(),
        "per_dim_std": None if stats.per_dim_std is None else stats.per_dim_std.tolist(),
        "alpha_norm": stats.alpha_norm,
    }


def _stats_from_meta(meta):
    if meta is None:
        return None
    return NormalizationStats(
        kind=meta["kind"],
        per_dim_mean=np.array(meta["per_dim_mean"], dtype=np.float64),
        per_dim_std=None if meta["per_dim_std"] is None
        else np.array(meta["per_dim_std"], dtype=np.float64),
        alpha_norm=meta["alpha_norm"],
    )


def save_checkpoint(path, ckpt: Checkpoint):
    if ckpt.model_kind not in _PARAM_CLASSES:
        raise ValueError(f"unknown model kind: {ckpt.model_kind}")
    p = ckpt.params
    meta = {
        "n_visible": p.n_visible,
        "n_hidden": p.n_hidden,
        "scalars": {"epsilon": p.epsilon} if ckpt.model_kind == "gamma" else {},
        "norm_stats": _stats_to_meta(ckpt.norm_stats),
        "train_config": None if ckpt.train_config is None
        else dataclasses.asdict(ckpt.train_config),
    }
    Path(path).write_bytes(_pack(ckpt.model_kind, p.arrays(), meta))


def load_checkpoint(path) -> Checkpoint:
    meta, arrays = _unpack(Path(path).read_bytes())
    kind = meta["model_kind"]
    if kind not in _PARAM_CLASSES:
        raise CorruptPayloadError(f"not a model checkpoint (kind '{kind}')")
    params = _PARAM_CLASSES[kind](**arrays, **meta.get("scalars", {}))
    cfg = meta.get("train_config")
    return Checkpoint(
        model_kind=kind,
        params=params,
        norm_stats=_stats_from_meta(meta.get("norm_stats")),
        train_config=None if cfg is None else TrainConfig(**cfg),
    )


# ---------------------------------------------------------------------------
# spectrogram cache (same container, distinct kind tag)


def save_spectrogram_cache(path, spec: Spectrogram):
    meta = {
        "sample_rate": spec.sample_rate,
        "win_len": spec.win_len,
        "hop": spec.hop,
    }
    arrays = {"frames": spec.frames, "phase": spec.phase}
    Path(path).write_bytes(_pack("spectrogram", arrays, meta))


def load_spectrogram_cache(path) -> Spectrogram:
    meta, arrays = _unpack(Path(path).read_bytes())
    if meta["model_kind"] != "spectrogram":
        raise CorruptPayloadError(f"not a spectrogram cache (kind '{meta['model_kind']}')")
    return Spectrogram(
        frames=arrays["frames"],
        phase=arrays["phase"],
        sample_rate=int(meta["sample_rate"]),
        win_len=int(meta["win_len"]),
        hop=int(meta["hop"]),
    )


# ---------------------------------------------------------------------------
# metrics export


def export_metrics(log, path, config: dict | None = None):
    """Write per-epoch metrics as CSV: epoch, mse_amp, mse_log, exact_ll.

    exact_ll is left blank when unavailable. Optional config items are
    echoed as leading '# key=value' comment lines.
    """
    if not log:
        raise ValueError("metrics log is empty")
    lines = []
    if config:
        for key in sorted(config):
            lines.append(f"# {key}={config[key]}")
    lines.append("epoch,mse_amp,mse_log,exact_ll")
    for m in log:
        ll = "" if m.exact_ll is None else f"{m.exact_ll:.10f}"
        lines.append(f"{m.epoch},{m.mse_amp:.10f},{m.mse_log:.10f},{ll}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_metrics(path):
    """Parse a metrics file back into (header_config, rows of floats/None)."""
    config = {}
    rows = []
    lines = Path(path).read_text().splitlines()
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            config[key] = value
        elif line and not line.startswith("epoch,"):
            epoch, amp, lg, ll = line.split(",")
            rows.append((int(epoch), float(amp), float(lg),
                         None if ll == "" else float(ll)))
    return config, rows
