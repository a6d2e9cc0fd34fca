"""Energy functions, conditionals, CD gradients, and exact small-model oracles.

Three RBM variants live here: the gamma-Bernoulli model (visible units
gamma-distributed, supporting both linear and log amplitude terms), the
Gaussian-Bernoulli baseline, and the binary Bernoulli-Bernoulli baseline.
Energies accept single vectors; conditionals and gradient routines accept
either a single vector or a batch (rows are samples).

The gamma model keeps W and V positive through an exp reparametrization:
W = -exp(W_tilde), V = exp(V_tilde). Gradients are taken with respect to
the free parameters (W_tilde, V_tilde, c, d).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln, logsumexp

from .mathcore import (
    DomainError,
    GammaParams,
    Rng,
    bernoulli_sample,
    gamma_sample,
    gaussian_sample,
    sigmoid,
)

E = np.e

# 2^J enumeration beyond this is refused by the exact-likelihood oracles.
MAX_EXACT_HIDDEN = 20


class DegenerateShapeError(DomainError):
    """A gamma shape parameter came out nonpositive (alpha = V h + eps <= 0)."""


# ---------------------------------------------------------------------------
# parameter containers


@dataclass
class GammaRbmParams:
    """Free parameters of the gamma-Bernoulli RBM.

    W = -exp(W_tilde) is strictly negative, V = exp(V_tilde) strictly
    positive, which keeps the conditional gamma rate/shape valid for any
    finite free parameters. epsilon shifts the shape parameter so that
    alpha = V h + epsilon stays positive even at h = 0.
    """

    W_tilde: np.ndarray  # (I, J)
    V_tilde: np.ndarray  # (I, J)
    c: np.ndarray  # (J,)
    d: np.ndarray  # (J,)
    epsilon: float = 1e-4

    def __post_init__(self):
        self.W_tilde = np.asarray(self.W_tilde, dtype=np.float64)
        self.V_tilde = np.asarray(self.V_tilde, dtype=np.float64)
        self.c = np.asarray(self.c, dtype=np.float64)
        self.d = np.asarray(self.d, dtype=np.float64)
        self.epsilon = float(self.epsilon)
        i, j = self.W_tilde.shape
        if self.V_tilde.shape != (i, j) or self.c.shape != (j,) or self.d.shape != (j,):
            raise ValueError("inconsistent gamma-RBM parameter shapes")
        if self.epsilon < 0:
            raise DomainError("epsilon must be nonnegative")
        for arr in (self.W_tilde, self.V_tilde, self.c, self.d):
            if not np.all(np.isfinite(arr)):
                raise DomainError("gamma-RBM parameters must be finite")

    @property
    def W(self) -> np.ndarray:
        return -np.exp(self.W_tilde)

    @property
    def V(self) -> np.ndarray:
        return np.exp(self.V_tilde)

    @property
    def n_visible(self) -> int:
        return self.W_tilde.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.W_tilde.shape[1]

    @classmethod
    def init(cls, rng: Rng, n_visible: int, n_hidden: int, epsilon: float = 1e-4):
        # W_tilde, V_tilde near -0.5 log I so that |W|, V start around 1/sqrt(I)
        base = -0.5 * np.log(n_visible)
        jitter = lambda: rng.gen.uniform(-0.01, 0.01, size=(n_visible, n_hidden))
        return cls(
            W_tilde=base + jitter(),
            V_tilde=base + jitter(),
            c=np.zeros(n_hidden),
            d=np.zeros(n_hidden),
            epsilon=epsilon,
        )

    def arrays(self) -> dict[str, np.ndarray]:
        return {"W_tilde": self.W_tilde, "V_tilde": self.V_tilde, "c": self.c, "d": self.d}

    def with_arrays(self, arrs: dict[str, np.ndarray]) -> "GammaRbmParams":
        return replace(self, **arrs)


@dataclass
class GaussRbmParams:
    """Gaussian-Bernoulli RBM parameters; the variance is trained as log_var."""

    W: np.ndarray  # (I, J)
    b: np.ndarray  # (I,)
    c: np.ndarray  # (J,)
    log_var: np.ndarray  # (I,)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.c = np.asarray(self.c, dtype=np.float64)
        self.log_var = np.asarray(self.log_var, dtype=np.float64)
        i, j = self.W.shape
        if self.b.shape != (i,) or self.c.shape != (j,) or self.log_var.shape != (i,):
            raise ValueError("inconsistent Gaussian-RBM parameter shapes")

    @property
    def variance(self) -> np.ndarray:
        return np.exp(self.log_var)

    @property
    def n_visible(self) -> int:
        return self.W.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.W.shape[1]

    @classmethod
    def init(cls, rng: Rng, n_visible: int, n_hidden: int):
        return cls(
            W=rng.gen.normal(0.0, 0.01, size=(n_visible, n_hidden)),
            b=np.zeros(n_visible),
            c=np.zeros(n_hidden),
            log_var=np.zeros(n_visible),
        )

    def arrays(self) -> dict[str, np.ndarray]:
        return {"W": self.W, "b": self.b, "c": self.c, "log_var": self.log_var}

    def with_arrays(self, arrs: dict[str, np.ndarray]) -> "GaussRbmParams":
        return replace(self, **arrs)


@dataclass
class BernRbmParams:
    """Bernoulli-Bernoulli RBM parameters."""

    W: np.ndarray  # (I, J)
    b: np.ndarray  # (I,)
    c: np.ndarray  # (J,)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.c = np.asarray(self.c, dtype=np.float64)
        i, j = self.W.shape
        if self.b.shape != (i,) or self.c.shape != (j,):
            raise ValueError("inconsistent Bernoulli-RBM parameter shapes")

    @property
    def n_visible(self) -> int:
        return self.W.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.W.shape[1]

    @classmethod
    def init(cls, rng: Rng, n_visible: int, n_hidden: int):
        return cls(
            W=rng.gen.normal(0.0, 0.01, size=(n_visible, n_hidden)),
            b=np.zeros(n_visible),
            c=np.zeros(n_hidden),
        )

    def arrays(self) -> dict[str, np.ndarray]:
        return {"W": self.W, "b": self.b, "c": self.c}

    def with_arrays(self, arrs: dict[str, np.ndarray]) -> "BernRbmParams":
        return replace(self, **arrs)


def _check_positive_visible(v):
    v = np.asarray(v, dtype=np.float64)
    if not np.all(v > 0):
        raise DomainError("gamma-model visible values must be strictly positive")
    return v


# ---------------------------------------------------------------------------
# energies


def gamma_energy(v, h, p: GammaRbmParams) -> float:
    """Energy of the gamma-Bernoulli RBM at (v, h); h may be mean-field."""
    v = _check_positive_visible(v)
    h = np.asarray(h, dtype=np.float64)
    eh = np.exp(h)
    logv = np.log(v)
    return float(
        -v @ p.W @ eh
        - p.c @ eh
        - logv @ (p.V @ h - (1.0 - p.epsilon))
        - p.d @ h
    )


def general_gamma_energy(x, U, u, S, s) -> float:
    """Unrestricted positive-variable energy with quadratic and log terms."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(x > 0):
        raise DomainError("general gamma energy requires x > 0")
    lx = np.log(x)
    return float(-0.5 * x @ U @ x - u @ x - 0.5 * lx @ S @ lx - s @ lx)


def gamma_block_assembly(p: GammaRbmParams):
    """(U, u, S, s) blocks whose general energy on [v; exp(h)] equals gamma_energy."""
    i, j = p.n_visible, p.n_hidden
    W, V = p.W, p.V
    U = np.zeros((i + j, i + j))
    U[:i, i:] = W
    U[i:, :i] = W.T
    u = np.concatenate([np.zeros(i), p.c])
    S = np.zeros((i + j, i + j))
    S[:i, i:] = V
    S[i:, :i] = V.T
    s = np.concatenate([np.full(i, -1.0 + p.epsilon), p.d])
    return U, u, S, s


def gauss_energy(v, h, p: GaussRbmParams) -> float:
    v = np.asarray(v, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    inv_var = np.exp(-p.log_var)
    return float(0.5 * (v * v) @ inv_var - v @ p.W @ h - p.b @ v - p.c @ h)


def bern_energy(v, h, p: BernRbmParams) -> float:
    v = np.asarray(v, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    return float(-v @ p.W @ h - p.b @ v - p.c @ h)


# ---------------------------------------------------------------------------
# conditionals (vector or batch input)


def gamma_p_h_given_v(v, p: GammaRbmParams):
    """Bernoulli probabilities of the hidden units given positive v."""
    v = _check_positive_visible(v)
    arg = (E - 1.0) * (p.c + v @ p.W) + p.d + np.log(v) @ p.V
    return sigmoid(arg)


def gamma_p_v_given_h(h, p: GammaRbmParams) -> GammaParams:
    """Per-dimension gamma parameters of v given (possibly mean-field) h."""
    h = np.asarray(h, dtype=np.float64)
    alpha = h @ p.V.T + p.epsilon
    beta = np.exp(h) @ (-p.W).T
    if not np.all(alpha > 0):
        raise DegenerateShapeError(
            "gamma shape parameter alpha = V h + eps is nonpositive; "
            "use eps > 0 or nonzero h"
        )
    return GammaParams(alpha=alpha, beta=beta)


def gauss_p_h_given_v(v, p: GaussRbmParams):
    v = np.asarray(v, dtype=np.float64)
    return sigmoid(p.c + v @ p.W)


def gauss_p_v_given_h(h, p: GaussRbmParams):
    """Mean and per-dimension variance of v given h."""
    h = np.asarray(h, dtype=np.float64)
    var = p.variance
    mean = var * (p.b + h @ p.W.T)
    return mean, np.broadcast_to(var, mean.shape)


def bern_p_h_given_v(v, p: BernRbmParams):
    v = np.asarray(v, dtype=np.float64)
    return sigmoid(p.c + v @ p.W)


def bern_p_v_given_h(h, p: BernRbmParams):
    h = np.asarray(h, dtype=np.float64)
    return sigmoid(p.b + h @ p.W.T)


def bern_conditionals(x, p: BernRbmParams, given: str):
    """Dispatch helper: given='v' maps v -> p(h|v); given='h' maps h -> p(v|h)."""
    if given == "v":
        return bern_p_h_given_v(x, p)
    if given == "h":
        return bern_p_v_given_h(x, p)
    raise ValueError("given must be 'v' or 'h'")


# ---------------------------------------------------------------------------
# per-sample negative energy gradients  -dE/dtheta
#
# Batch versions return the gradient averaged over rows.


def gamma_energy_grads(v, h, p: GammaRbmParams) -> dict[str, np.ndarray]:
    """-dE/d(W_tilde, V_tilde, c, d) at a single (v, h)."""
    v = _check_positive_visible(v)
    h = np.asarray(h, dtype=np.float64)
    eh = np.exp(h)
    return {
        "W_tilde": p.W * np.outer(v, eh),
        "V_tilde": p.V * np.outer(np.log(v), h),
        "c": eh,
        "d": h.copy(),
    }


def gauss_energy_grads(v, h, p: GaussRbmParams) -> dict[str, np.ndarray]:
    v = np.asarray(v, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    return {
        "W": np.outer(v, h),
        "b": v.copy(),
        "c": h.copy(),
        "log_var": 0.5 * v * v * np.exp(-p.log_var),
    }


def bern_energy_grads(v, h, p: BernRbmParams) -> dict[str, np.ndarray]:
    v = np.asarray(v, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    return {"W": np.outer(v, h), "b": v.copy(), "c": h.copy()}


def _gamma_batch_stats(v, h, p: GammaRbmParams):
    n = v.shape[0]
    eh = np.exp(h)
    return {
        "W_tilde": p.W * (v.T @ eh) / n,
        "V_tilde": p.V * (np.log(v).T @ h) / n,
        "c": eh.mean(axis=0),
        "d": h.mean(axis=0),
    }


def _gauss_batch_stats(v, h, p: GaussRbmParams):
    n = v.shape[0]
    return {
        "W": (v.T @ h) / n,
        "b": v.mean(axis=0),
        "c": h.mean(axis=0),
        "log_var": 0.5 * np.exp(-p.log_var) * (v * v).mean(axis=0),
    }


def _bern_batch_stats(v, h, p: BernRbmParams):
    n = v.shape[0]
    return {"W": (v.T @ h) / n, "b": v.mean(axis=0), "c": h.mean(axis=0)}


def _sub(a: dict, b: dict) -> dict:
    return {k: a[k] - b[k] for k in a}


# ---------------------------------------------------------------------------
# contrastive divergence


def gamma_cd_gradients(v_data, p: GammaRbmParams, rng: Rng, k: int = 1):
    """CD-k log-likelihood gradient estimate for the gamma-Bernoulli RBM.

    Data-side hidden statistics are mean-field expectations; the Gibbs
    chain starts at the data and alternates sampled h / sampled v. k=0 is
    a test hook that makes the reconstruction equal the data.
    """
    v = np.atleast_2d(_check_positive_visible(v_data))
    ph = gamma_p_h_given_v(v, p)
    vk, phk = v, ph
    for _ in range(k):
        hs = bernoulli_sample(rng, phk)
        cond = gamma_p_v_given_h(hs, p)
        vk = gamma_sample(rng, cond)
        phk = gamma_p_h_given_v(vk, p)
    return _sub(_gamma_batch_stats(v, ph, p), _gamma_batch_stats(vk, phk, p))


def gauss_cd_gradients(v_data, p: GaussRbmParams, rng: Rng, k: int = 1):
    """CD-k gradient estimate for the Gaussian-Bernoulli RBM."""
    v = np.atleast_2d(np.asarray(v_data, dtype=np.float64))
    ph = gauss_p_h_given_v(v, p)
    vk, phk = v, ph
    for _ in range(k):
        hs = bernoulli_sample(rng, phk)
        mean, var = gauss_p_v_given_h(hs, p)
        vk = gaussian_sample(rng, mean, var)
        phk = gauss_p_h_given_v(vk, p)
    return _sub(_gauss_batch_stats(v, ph, p), _gauss_batch_stats(vk, phk, p))


def bern_cd_gradients(v_data, p: BernRbmParams, rng: Rng, k: int = 1):
    """CD-k gradient estimate for the Bernoulli-Bernoulli RBM."""
    v = np.atleast_2d(np.asarray(v_data, dtype=np.float64))
    ph = bern_p_h_given_v(v, p)
    vk, phk = v, ph
    for _ in range(k):
        hs = bernoulli_sample(rng, phk)
        pv = bern_p_v_given_h(hs, p)
        vk = bernoulli_sample(rng, pv)
        phk = bern_p_h_given_v(vk, p)
    return _sub(_bern_batch_stats(v, ph, p), _bern_batch_stats(vk, phk, p))


# ---------------------------------------------------------------------------
# exact likelihood oracles (small J: hidden states enumerated, v integrated
# analytically)


def _enumerate_hidden(n_hidden: int) -> np.ndarray:
    if n_hidden > MAX_EXACT_HIDDEN:
        raise ValueError(
            f"exact enumeration refused for J={n_hidden} > {MAX_EXACT_HIDDEN}"
        )
    m = 1 << n_hidden
    bits = (np.arange(m)[:, None] >> np.arange(n_hidden)[None, :]) & 1
    return bits.astype(np.float64)


def gamma_log_partition(p: GammaRbmParams) -> float:
    """log Z by enumerating h and integrating v analytically per dimension."""
    if p.epsilon <= 0:
        raise DomainError("exact gamma partition requires eps > 0 (Z diverges at h=0)")
    H = _enumerate_hidden(p.n_hidden)
    eH = np.exp(H)
    alpha = H @ p.V.T + p.epsilon  # (M, I)
    beta = eH @ (-p.W).T
    terms = eH @ p.c + H @ p.d + np.sum(gammaln(alpha) - alpha * np.log(beta), axis=1)
    return float(logsumexp(terms))


def _gamma_unnorm_log_marginal(v, p: GammaRbmParams) -> np.ndarray:
    """log sum_h exp(-E(v, h)) for each row of v."""
    v = np.atleast_2d(_check_positive_visible(v))
    H = _enumerate_hidden(p.n_hidden)
    eH = np.exp(H)
    logv = np.log(v)
    # (N, M) negative energies
    neg_e = (
        v @ p.W @ eH.T
        + logv @ p.V @ H.T
        + (eH @ p.c + H @ p.d)[None, :]
        - (1.0 - p.epsilon) * logv.sum(axis=1)[:, None]
    )
    return logsumexp(neg_e, axis=1)


def gamma_exact_log_likelihood(v_data, p: GammaRbmParams) -> float:
    """Mean exact log-likelihood of the rows of v_data under the gamma RBM."""
    log_z = gamma_log_partition(p)
    return float(np.mean(_gamma_unnorm_log_marginal(v_data, p))) - log_z


def gauss_log_partition(p: GaussRbmParams) -> float:
    """log Z via the Gaussian integral per enumerated hidden state."""
    H = _enumerate_hidden(p.n_hidden)
    var = p.variance
    mean_arg = p.b[None, :] + H @ p.W.T  # (M, I)
    terms = (
        H @ p.c
        + 0.5 * p.n_visible * np.log(2.0 * np.pi)
        + 0.5 * np.sum(p.log_var)
        + 0.5 * np.sum(mean_arg * mean_arg * var[None, :], axis=1)
    )
    return float(logsumexp(terms))


def _gauss_unnorm_log_marginal(v, p: GaussRbmParams) -> np.ndarray:
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    H = _enumerate_hidden(p.n_hidden)
    inv_var = np.exp(-p.log_var)
    neg_e = (
        -0.5 * (v * v) @ inv_var[:, None]
        + (v @ p.W) @ H.T
        + (v @ p.b)[:, None]
        + (H @ p.c)[None, :]
    )
    return logsumexp(neg_e, axis=1)


def gauss_exact_log_likelihood(v_data, p: GaussRbmParams) -> float:
    log_z = gauss_log_partition(p)
    return float(np.mean(_gauss_unnorm_log_marginal(v_data, p))) - log_z


# ---------------------------------------------------------------------------
# model sampling (used to build synthetic ground-truth datasets)


def gamma_rbm_sample(rng: Rng, p: GammaRbmParams, n: int, burn_in: int = 50,
                     thin: int = 1) -> np.ndarray:
    """Gibbs-sample n visible vectors from the gamma RBM."""
    h = bernoulli_sample(rng, np.full(p.n_hidden, 0.5))
    v = gamma_sample(rng, gamma_p_v_given_h(h, p))
    out = np.empty((n, p.n_visible))
    total = burn_in + n * thin
    j = 0
    for t in range(total):
        h = bernoulli_sample(rng, gamma_p_h_given_v(v, p))
        v = gamma_sample(rng, gamma_p_v_given_h(h, p))
        if t >= burn_in and (t - burn_in) % thin == 0:
            out[j] = v
            j += 1
    return out[:n]
