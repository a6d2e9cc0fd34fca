"""Normalization, Adam, and the minibatch training loop.

The loop is deterministic given (data, config, seed): epoch shuffles,
Gibbs chains, and parameter initialization each draw from their own
Rng stream derived from the config seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import models
from .mathcore import DomainError, Rng

# Rng stream ids, one per purpose
_STREAM_INIT = 1
_STREAM_SHUFFLE = 2
_STREAM_GIBBS = 3


class TrainingError(RuntimeError):
    """Training failure annotated with epoch/batch context."""


@dataclass
class NormalizationStats:
    """Forward/inverse per-dimension normalization.

    gamma-scale: x -> alpha_norm * x / mean (maximum-likelihood rate for an
    assumed gamma with shape alpha_norm), keeping the data positive.
    gaussian-standardize: x -> (x - mean) / std with population std.
    """

    kind: str  # "gamma-scale" | "gaussian-standardize"
    per_dim_mean: np.ndarray
    per_dim_std: np.ndarray | None = None
    alpha_norm: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gamma-scale", "gaussian-standardize"):
            raise ValueError(f"unknown normalization kind: {self.kind}")
        self.per_dim_mean = np.asarray(self.per_dim_mean, dtype=np.float64)
        if self.per_dim_std is not None:
            self.per_dim_std = np.asarray(self.per_dim_std, dtype=np.float64)


def fit_normalization(data, kind: str) -> NormalizationStats:
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if data.size == 0:
        raise ValueError("cannot fit normalization on an empty batch")
    mean = data.mean(axis=0)
    if kind == "gamma-scale":
        if not np.all(data > 0):
            raise DomainError("gamma-scale normalization requires strictly positive data")
        return NormalizationStats(kind=kind, per_dim_mean=mean)
    if kind == "gaussian-standardize":
        std = data.std(axis=0)  # population convention
        std = np.where(std > 0, std, 1.0)
        return NormalizationStats(kind=kind, per_dim_mean=mean, per_dim_std=std)
    raise ValueError(f"unknown normalization kind: {kind}")


def apply_normalization(data, stats: NormalizationStats):
    data = np.asarray(data, dtype=np.float64)
    if data.shape[-1] != stats.per_dim_mean.shape[0]:
        raise ValueError("dimension mismatch between data and normalization stats")
    if stats.kind == "gamma-scale":
        return data * (stats.alpha_norm / stats.per_dim_mean)
    return (data - stats.per_dim_mean) / stats.per_dim_std


def invert_normalization(data, stats: NormalizationStats):
    data = np.asarray(data, dtype=np.float64)
    if data.shape[-1] != stats.per_dim_mean.shape[0]:
        raise ValueError("dimension mismatch between data and normalization stats")
    if stats.kind == "gamma-scale":
        return data * (stats.per_dim_mean / stats.alpha_norm)
    return data * stats.per_dim_std + stats.per_dim_mean


@dataclass
class TrainConfig:
    batch_size: int = 100
    learning_rate: float = 0.01
    epochs: int = 100
    cd_k: int = 1
    hidden_units: int = 100
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    epsilon: float = 1e-4  # gamma shape shift; ignored by the other models
    eval_on_train: bool = True  # epoch metrics on training data unless eval set given

    def __post_init__(self):
        if self.batch_size < 1 or self.hidden_units < 1:
            raise ValueError("batch_size and hidden_units must be positive")
        if self.epochs < 0 or self.cd_k < 0:
            raise ValueError("epochs and cd_k must be nonnegative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("adam betas must lie in (0, 1)")
        if self.adam_eps <= 0:
            raise ValueError("adam_eps must be positive")


@dataclass
class AdamState:
    first_moment: dict[str, np.ndarray]
    second_moment: dict[str, np.ndarray]
    step_count: int = 0

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            first_moment={k: np.zeros_like(v) for k, v in params.items()},
            second_moment={k: np.zeros_like(v) for k, v in params.items()},
        )


def adam_update(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
                state: AdamState, cfg: TrainConfig):
    """One Adam ascent step (gradients are of the log-likelihood)."""
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    t = state.step_count + 1
    new_params = {}
    for k, theta in params.items():
        g = grads[k]
        if g.shape != theta.shape:
            raise ValueError(f"gradient/parameter shape mismatch for {k}")
        m = state.first_moment[k] = b1 * state.first_moment[k] + (1 - b1) * g
        v = state.second_moment[k] = b2 * state.second_moment[k] + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_params[k] = theta + cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
    state.step_count = t
    return new_params, state


@dataclass
class EpochMetrics:
    epoch: int
    mse_amp: float
    mse_log: float
    exact_ll: float | None = None


_MODEL_KINDS = {
    "gamma": (models.GammaRbmParams, models.gamma_cd_gradients),
    "gauss": (models.GaussRbmParams, models.gauss_cd_gradients),
    "bern": (models.BernRbmParams, models.bern_cd_gradients),
}


def init_params(kind: str, rng: Rng, n_visible: int, cfg: TrainConfig):
    cls = _MODEL_KINDS[kind][0]
    if kind == "gamma":
        return cls.init(rng, n_visible, cfg.hidden_units, epsilon=cfg.epsilon)
    return cls.init(rng, n_visible, cfg.hidden_units)


def _epoch_metrics(epoch, kind, params, eval_norm, norm_stats, floor):
    # local import: evaluation depends on models only, no cycle at runtime
    from .evaluation import mse_amp, mse_log, reconstruct

    recon = reconstruct(eval_norm, params, kind)
    if norm_stats is not None:
        orig = invert_normalization(eval_norm, norm_stats)
        recon = invert_normalization(recon, norm_stats)
    else:
        orig = eval_norm
    log_floor = floor if kind != "gamma" else None
    try:
        m_log = mse_log(orig, recon, floor=log_floor)
    except DomainError:
        # raw data with nonpositive entries: the log metric is undefined
        m_log = float("nan")
    ll = None
    if params.n_hidden <= models.MAX_EXACT_HIDDEN:
        if kind == "gamma" and params.epsilon > 0:
            ll = models.gamma_exact_log_likelihood(eval_norm, params)
        elif kind == "gauss":
            ll = models.gauss_exact_log_likelihood(eval_norm, params)
    return EpochMetrics(
        epoch=epoch,
        mse_amp=mse_amp(orig, recon),
        mse_log=m_log,
        exact_ll=ll,
    )


def train(data, kind: str, cfg: TrainConfig, *, eval_data=None, norm_stats=None,
          initial=None):
    """Train an RBM with CD-k and Adam; returns (params, list of EpochMetrics).

    `data` must already be normalized to match the model kind. Epoch metrics
    are computed on `eval_data` when given (otherwise the training data),
    denormalized through `norm_stats` when provided. Exact log-likelihood is
    logged whenever the hidden layer is small enough to enumerate.
    """
    if kind not in _MODEL_KINDS:
        raise ValueError(f"unknown model kind: {kind}")
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    n, n_visible = data.shape
    root = Rng(cfg.seed)
    params = initial if initial is not None else init_params(
        kind, root.stream(_STREAM_INIT), n_visible, cfg)
    cd_grads = _MODEL_KINDS[kind][1]

    shuffle_rng = root.stream(_STREAM_SHUFFLE)
    gibbs_rng = root.stream(_STREAM_GIBBS)
    state = AdamState.zeros_like(params.arrays())

    eval_norm = np.atleast_2d(np.asarray(
        eval_data if eval_data is not None else data, dtype=np.float64))
    floor = None
    if norm_stats is not None:
        orig_eval = invert_normalization(eval_norm, norm_stats)
        floor = 1e-5 * float(np.max(np.abs(orig_eval))) if orig_eval.size else None
    elif kind != "gamma":
        floor = 1e-5 * float(np.max(np.abs(eval_norm))) if eval_norm.size else None

    log: list[EpochMetrics] = []
    for epoch in range(cfg.epochs):
        perm = shuffle_rng.gen.permutation(n)
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            batch = data[perm[start:start + cfg.batch_size]]
            try:
                grads = cd_grads(batch, params, gibbs_rng, cfg.cd_k)
                new_arrays, state = adam_update(params.arrays(), grads, state, cfg)
                params = params.with_arrays(new_arrays)
            except (DomainError, FloatingPointError, ValueError) as err:
                raise TrainingError(f"epoch {epoch}, batch {b}: {err}") from err
        log.append(_epoch_metrics(epoch, kind, params, eval_norm, norm_stats, floor))
    return params, log
