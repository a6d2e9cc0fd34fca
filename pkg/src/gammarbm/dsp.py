"""STFT analysis/synthesis and amplitude-spectrogram conditioning.

Conventions (fixed so cached spectrograms are bit-stable):
  - symmetric Hamming window, 0.54 - 0.46 cos(2 pi n / (L-1))
  - forward DFT unnormalized, inverse scaled by 1/L (numpy rfft/irfft)
  - one-sided bins 0 .. L/2, so 256-sample windows give 129 dimensions
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_SILENCE_DB = -60.0
DEFAULT_FLOOR_REL = 1e-5


class SignalTooShortError(ValueError):
    pass


class AllFramesRemovedError(ValueError):
    pass


@dataclass
class Spectrogram:
    """Frame-major amplitude spectrogram with phase retained for resynthesis."""

    frames: np.ndarray  # (N, I) linear amplitude, >= 0
    phase: np.ndarray  # (N, I) radians
    sample_rate: int
    win_len: int
    hop: int

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        self.phase = np.asarray(self.phase, dtype=np.float64)
        if self.frames.shape != self.phase.shape:
            raise ValueError("frames and phase shapes differ")
        if self.frames.shape[1] != self.win_len // 2 + 1:
            raise ValueError("bin count does not match win_len/2 + 1")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_bins(self) -> int:
        return self.frames.shape[1]


def hamming(win_len: int) -> np.ndarray:
    n = np.arange(win_len)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / (win_len - 1))


def stft(signal, win_len: int = 256, hop: int = 64, sample_rate: int = 16000) -> Spectrogram:
    """One-sided magnitude/phase STFT of a real signal."""
    signal = np.asarray(signal, dtype=np.float64)
    if win_len % 2 != 0:
        raise ValueError("win_len must be even")
    if signal.size < win_len:
        raise SignalTooShortError(
            f"signal of {signal.size} samples is shorter than the {win_len}-sample window")
    n_frames = 1 + (signal.size - win_len) // hop
    w = hamming(win_len)
    idx = np.arange(win_len)[None, :] + hop * np.arange(n_frames)[:, None]
    spec = np.fft.rfft(signal[idx] * w, axis=1)
    return Spectrogram(
        frames=np.abs(spec),
        phase=np.angle(spec),
        sample_rate=sample_rate,
        win_len=win_len,
        hop=hop,
    )


def istft(spec: Spectrogram) -> np.ndarray:
    """Weighted overlap-add resynthesis with window-squared normalization."""
    if spec.hop <= 0 or spec.hop > spec.win_len:
        raise ValueError("inconsistent spectrogram metadata: hop must be in (0, win_len]")
    w = hamming(spec.win_len)
    segs = np.fft.irfft(spec.frames * np.exp(1j * spec.phase), n=spec.win_len, axis=1)
    out_len = spec.win_len + (spec.n_frames - 1) * spec.hop
    num = np.zeros(out_len)
    den = np.zeros(out_len)
    for m in range(spec.n_frames):
        sl = slice(m * spec.hop, m * spec.hop + spec.win_len)
        num[sl] += w * segs[m]
        den[sl] += w * w
    return num / den


def frame_energies(spec: Spectrogram) -> np.ndarray:
    return np.sum(spec.frames**2, axis=1)


def discard_silence(spec: Spectrogram, threshold_db: float = DEFAULT_SILENCE_DB) -> Spectrogram:
    """Drop frames whose energy is below threshold_db relative to the peak frame."""
    energy = frame_energies(spec)
    peak = energy.max() if energy.size else 0.0
    keep = energy >= peak * 10.0 ** (threshold_db / 10.0)
    if not keep.any():
        raise AllFramesRemovedError(
            f"silence threshold {threshold_db} dB removed every frame")
    return Spectrogram(
        frames=spec.frames[keep],
        phase=spec.phase[keep],
        sample_rate=spec.sample_rate,
        win_len=spec.win_len,
        hop=spec.hop,
    )


def floor_amplitude(frames: np.ndarray, rel: float = DEFAULT_FLOOR_REL) -> np.ndarray:
    """Clamp amplitudes at rel * max so the gamma model sees strictly positive data."""
    frames = np.asarray(frames, dtype=np.float64)
    peak = frames.max() if frames.size else 0.0
    if peak <= 0:
        raise ValueError("cannot floor an all-zero spectrogram")
    return np.maximum(frames, rel * peak)
