"""Special functions, probability densities, and seeded random sampling.

Everything downstream (energies, Gibbs chains, training) builds on the
primitives here. All arithmetic is float64; samplers are deterministic
given an (seed, stream_id) pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

# Smallest value a gamma draw is floored to, so log(sample) stays finite
# even when the shape parameter is tiny and the true draw underflows.
_SAMPLE_FLOOR = 1e-300


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class Rng:
    """Counter-based random stream addressed by (seed, stream_id).

    Philox keys on the pair, so identical pairs replay identical draw
    sequences across runs and platforms, and distinct stream_ids give
    statistically independent streams (one per worker / purpose).
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = int(stream_id) & 0xFFFFFFFFFFFFFFFF
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self.gen = np.random.Generator(np.random.Philox(key=key))

    def stream(self, stream_id: int) -> "Rng":
        """Fresh, independent stream sharing this Rng's seed."""
        return Rng(self.seed, stream_id)

    def __repr__(self):
        return f"Rng(seed={self.seed}, stream_id={self.stream_id})"


@dataclass
class GammaParams:
    """Shape/rate parameters of a gamma distribution (scalar or array)."""

    alpha: np.ndarray | float
    beta: np.ndarray | float

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        self.beta = np.asarray(self.beta, dtype=np.float64)
        if not np.all(self.alpha > 0):
            raise DomainError("gamma shape parameter must be strictly positive")
        if not np.all(self.beta > 0):
            raise DomainError("gamma rate parameter must be strictly positive")

    @property
    def mean(self):
        return self.alpha / self.beta

    @property
    def variance(self):
        return self.alpha / self.beta**2


def sigmoid(x):
    """Element-wise logistic function, overflow-safe at extreme inputs."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def log_gamma_fn(x):
    """log Gamma(x) for x > 0."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(x > 0):
        raise DomainError("log_gamma_fn requires x > 0")
    return gammaln(x)


def gamma_log_pdf(x, p: GammaParams):
    """Log density of the gamma distribution at x > 0."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(x > 0):
        raise DomainError("gamma_log_pdf requires x > 0")
    a, b = p.alpha, p.beta
    return a * np.log(b) - gammaln(a) + (a - 1.0) * np.log(x) - b * x


def _standard_gamma(gen: np.random.Generator, alpha):
    """Marsaglia-Tsang draws with unit rate; vectorized over alpha.

    Shapes below 1 use the boosting identity: draw at alpha+1 and
    multiply by U^(1/alpha).
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    scalar = alpha.ndim == 0
    a = np.atleast_1d(alpha).ravel().copy()
    boost = a < 1.0
    a_eff = np.where(boost, a + 1.0, a)
    d = a_eff - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)

    out = np.zeros_like(a_eff)
    todo = np.arange(a_eff.size)
    while todo.size:
        x = gen.standard_normal(todo.size)
        v = (1.0 + c[todo] * x) ** 3
        u = gen.random(todo.size)
        pos = v > 0.0
        squeeze = pos & (u < 1.0 - 0.0331 * x**4)
        safe_v = np.where(pos, v, 1.0)
        full = pos & (np.log(np.maximum(u, _SAMPLE_FLOOR))
                      < 0.5 * x * x + d[todo] * (1.0 - v + np.log(safe_v)))
        acc = squeeze | full
        hit = todo[acc]
        out[hit] = d[hit] * v[acc]
        todo = todo[~acc]

    if boost.any():
        u = gen.random(int(boost.sum()))
        out[boost] *= np.exp(np.log(np.maximum(u, _SAMPLE_FLOOR)) / a[boost])
    np.maximum(out, _SAMPLE_FLOOR, out=out)
    if scalar:
        return float(out[0])
    return out.reshape(alpha.shape)


def gamma_sample(rng: Rng, p: GammaParams, size=None):
    """Gamma draw(s) with shape alpha and rate beta.

    When `size` is given, alpha/beta are broadcast to that shape and an
    array of independent draws is returned.
    """
    alpha, beta = p.alpha, p.beta
    if size is not None:
        alpha = np.broadcast_to(alpha, size)
        beta = np.broadcast_to(beta, size)
    return _standard_gamma(rng.gen, alpha) / beta


def gaussian_sample(rng: Rng, mean, variance, size=None):
    """Normal draw(s) with the given mean and variance."""
    variance = np.asarray(variance, dtype=np.float64)
    if not np.all(variance > 0):
        raise DomainError("gaussian_sample requires variance > 0")
    return rng.gen.normal(mean, np.sqrt(variance), size=size)


def bernoulli_sample(rng: Rng, p):
    """Independent 0/1 draws with success probabilities p (returned as floats)."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0) or np.any(p > 1):
        raise DomainError("bernoulli probabilities must lie in [0, 1]")
    return (rng.gen.random(p.shape) < p).astype(np.float64)
