"""Deterministic reconstruction and the linear/log-amplitude MSE metrics.

Reconstruction uses mean-field hidden expectations and the conditional
mean of the visibles; no sampling is involved, so repeated calls agree
bit for bit. Metrics are meant to be computed in the denormalized
(original amplitude) domain; the caller inverts normalization first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import models
from .mathcore import DomainError
from .training import NormalizationStats, invert_normalization


@dataclass
class ReconReport:
    mse_amp: float
    mse_log: float
    negative_bin_count: int
    frames: int


def reconstruct(v, params, kind: str):
    """Conditional-mean reconstruction v -> E[v | E[h|v]] in the model's domain."""
    v = np.asarray(v, dtype=np.float64)
    if kind == "gamma":
        ph = models.gamma_p_h_given_v(v, params)
        cond = models.gamma_p_v_given_h(ph, params)
        return cond.alpha / cond.beta
    if kind == "gauss":
        ph = models.gauss_p_h_given_v(v, params)
        mean, _ = models.gauss_p_v_given_h(ph, params)
        return mean
    if kind == "bern":
        ph = models.bern_p_h_given_v(v, params)
        return models.bern_p_v_given_h(ph, params)
    raise ValueError(f"unknown model kind: {kind}")


def mse_amp(orig, recon) -> float:
    """Mean over frames of the squared L2 reconstruction error."""
    orig = np.atleast_2d(np.asarray(orig, dtype=np.float64))
    recon = np.atleast_2d(np.asarray(recon, dtype=np.float64))
    if orig.shape != recon.shape:
        raise ValueError(f"shape mismatch: {orig.shape} vs {recon.shape}")
    return float(np.mean(np.sum((orig - recon) ** 2, axis=1)))


def mse_log(orig, recon, floor: float | None = None) -> float:
    """Squared L2 error between log-amplitudes, averaged over frames.

    `floor` clamps the reconstruction before the log (needed for models
    that can emit nonpositive amplitudes); the original is expected to be
    floored upstream.
    """
    orig = np.atleast_2d(np.asarray(orig, dtype=np.float64))
    recon = np.atleast_2d(np.asarray(recon, dtype=np.float64))
    if orig.shape != recon.shape:
        raise ValueError(f"shape mismatch: {orig.shape} vs {recon.shape}")
    if floor is not None:
        recon = np.maximum(recon, floor)
    if not (np.all(orig > 0) and np.all(recon > 0)):
        raise DomainError("mse_log requires strictly positive amplitudes")
    return float(np.mean(np.sum((np.log(orig) - np.log(recon)) ** 2, axis=1)))


def count_negative_bins(recon) -> int:
    return int(np.sum(np.asarray(recon) < 0))


def evaluate_reconstruction(v_norm, params, kind: str,
                            norm_stats: NormalizationStats | None = None,
                            floor_rel: float = 1e-5) -> ReconReport:
    """Full protocol: reconstruct in the normalized domain, score denormalized."""
    v_norm = np.atleast_2d(np.asarray(v_norm, dtype=np.float64))
    recon = reconstruct(v_norm, params, kind)
    if norm_stats is not None:
        orig = invert_normalization(v_norm, norm_stats)
        recon = invert_normalization(recon, norm_stats)
    else:
        orig = v_norm
    # clamp only for the log metric, and only for models that can go nonpositive
    log_floor = None if kind == "gamma" else floor_rel * float(np.max(np.abs(orig)))
    return ReconReport(
        mse_amp=mse_amp(orig, recon),
        mse_log=mse_log(orig, recon, floor=log_floor),
        negative_bin_count=count_negative_bins(recon),
        frames=v_norm.shape[0],
    )
