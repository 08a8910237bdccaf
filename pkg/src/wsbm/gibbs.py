"""Shared machinery for the blocked Gibbs samplers.

Both the fixed-K and the truncated-DP samplers run the same sequential
node scan; they differ only in where the community weight vector comes
from (Dirichlet draw vs. stick-breaking) and in the update order.  The
scan visits nodes in index order and uses the labels of all other nodes
as they currently stand, so later nodes see earlier updates within the
same sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blocks import (
    LOG_2PI,
    BlockParameters,
    BlockStats,
    CommunityAssignment,
    NIGPrior,
    _stats_from_labels0,
    posterior_nig_arrays,
)
from .errors import InputError, NumericalError

__all__ = [
    "ChainConfig",
    "ChainTrace",
    "chain_seed",
    "make_rng",
    "sweep_assignments",
    "assignment_log_probs",
    "assignment_probs",
    "sample_theta",
    "sample_theta_arrays",
]

_MASK64 = (1 << 64) - 1


def chain_seed(base_seed: int, index: int) -> int:
    """Derive the seed for chain `index` from a base seed.

    splitmix64 finalizer applied to base_seed + (index+1) * golden-ratio
    increment; documented in the README so runs can be reproduced chain
    by chain.
    """
    x = (int(base_seed) + (index + 1) * 0x9E3779B97F4A7C15) & _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class ChainConfig:
    """MCMC run length and seeding; `k` is only used by the finite model."""

    iterations: int = 10_000
    burn_in: int = 5_000
    seed: int = 0
    k: int | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise InputError("iterations must be positive")
        if not (0 <= self.burn_in < self.iterations):
            raise InputError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.k is not None and self.k < 1:
            raise InputError("k must be a positive integer")


@dataclass
class ChainTrace:
    """Post-burn-in draws of one chain, stacked along the first axis."""

    z_draws: np.ndarray        # (B, n) 1-based labels
    mu_draws: np.ndarray       # (B, k_max, k_max)
    sigma2_draws: np.ndarray   # (B, k_max, k_max)
    weight_draws: np.ndarray   # (B, k_max) tau or rho
    loglik_draws: np.ndarray   # (B,)
    k_draws: np.ndarray        # (B,) non-empty community counts
    meta: dict = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return self.z_draws.shape[0]

    @property
    def n(self) -> int:
        return self.z_draws.shape[1]

    @property
    def k_max(self) -> int:
        return self.mu_draws.shape[1]

    def assignment(self, b: int) -> CommunityAssignment:
        return CommunityAssignment(self.z_draws[b], k_max=self.k_max)

    def theta(self, b: int) -> BlockParameters:
        return BlockParameters(self.mu_draws[b], self.sigma2_draws[b])


def _kernel_matrices(mu: np.ndarray, sigma2: np.ndarray):
    """Precompute the coefficient matrices used by the node scan.

    For node j with per-community neighbour aggregates s0 (counts), s1
    (weight sums) and s2 (squared-weight sums), the edge log-likelihood
    of label l is -0.5 * (C0 @ s0 + C1 @ s1 + C2 @ s2)[l].
    """
    inv = 1.0 / sigma2
    c0 = (LOG_2PI + np.log(sigma2)) + mu * mu * inv
    c1 = -2.0 * mu * inv
    c2 = inv
    return np.concatenate([c0, c1, c2], axis=1)


def sweep_assignments(
    W: np.ndarray,
    W2: np.ndarray,
    labels0: np.ndarray,
    counts: np.ndarray,
    log_weights: np.ndarray,
    mu: np.ndarray,
    sigma2: np.ndarray,
    rng: np.random.Generator,
) -> None:
    """One sequential Gibbs scan over all nodes; labels0/counts updated in place.

    Categorical draws use max-subtracted exponentiation and inverse-CDF
    on a single uniform per node.  W2 must equal W * W.
    """
    n = labels0.size
    k = log_weights.size
    coef = _kernel_matrices(mu, sigma2)
    u = rng.random(n)
    s = np.empty(3 * k)
    for j in range(n):
        s[:k] = counts
        s[labels0[j]] -= 1.0
        s[k : 2 * k] = np.bincount(labels0, weights=W[j], minlength=k)
        s[2 * k :] = np.bincount(labels0, weights=W2[j], minlength=k)
        logp = log_weights - 0.5 * (coef @ s)
        np.exp(logp - logp.max(), out=logp)
        cdf = np.cumsum(logp)
        new = int(np.searchsorted(cdf, u[j] * cdf[-1], side="right"))
        if new >= k:
            new = k - 1
        counts[labels0[j]] -= 1
        labels0[j] = new
        counts[new] += 1


def assignment_log_probs(
    W: np.ndarray,
    labels0: np.ndarray,
    log_weights: np.ndarray,
    mu: np.ndarray,
    sigma2: np.ndarray,
) -> np.ndarray:
    """Unnormalized log p(z_j = l | rest) for every node at the current labels.

    Vectorized over nodes; row j evaluates the same expression the scan
    uses when it reaches node j with the given label state.
    """
    n = labels0.size
    k = log_weights.size
    Z = np.zeros((n, k))
    Z[np.arange(n), labels0] = 1.0
    s0 = np.bincount(labels0, minlength=k).astype(float)[None, :] - Z
    s1 = W @ Z
    s2 = (W * W) @ Z
    coef = _kernel_matrices(mu, sigma2)
    s = np.concatenate([s0, s1, s2], axis=1)
    return log_weights[None, :] - 0.5 * (s @ coef.T)


def assignment_probs(W, z: CommunityAssignment, theta: BlockParameters, weights) -> np.ndarray:
    """Normalized membership probabilities p_jl for every node (n x k)."""
    weights = np.asarray(weights, dtype=float)
    with np.errstate(divide="ignore"):
        lw = np.log(weights)
    logp = assignment_log_probs(np.asarray(W, dtype=float), z.labels - 1, lw, theta.mu, theta.sigma2)
    logp -= logp.max(axis=1, keepdims=True)
    p = np.exp(logp)
    p /= p.sum(axis=1, keepdims=True)
    return p


def sample_theta_arrays(stats: BlockStats, prior: NIGPrior, rng: np.random.Generator):
    """Draw (mu, sigma2) for every unordered block and mirror them.

    sigma2 ~ IG(nu_p/2, ss_p/2) via an inverted gamma draw, then
    mu | sigma2 ~ N(mu_p, sigma2/n_p).  Empty blocks reduce to prior
    draws because their posterior equals the prior.
    """
    mu_p, n_p, nu_p, ss_p = posterior_nig_arrays(stats, prior)
    k = stats.k_max
    iu = np.triu_indices(k)
    sig_flat = 1.0 / rng.gamma(shape=nu_p[iu] / 2.0, scale=2.0 / ss_p[iu])
    mu_flat = rng.normal(mu_p[iu], np.sqrt(sig_flat / n_p[iu]))
    sigma2 = np.empty((k, k))
    mu = np.empty((k, k))
    sigma2[iu] = sig_flat
    sigma2.T[iu] = sig_flat
    mu[iu] = mu_flat
    mu.T[iu] = mu_flat
    return mu, sigma2


def sample_theta(W, z: CommunityAssignment, prior: NIGPrior, rng: np.random.Generator) -> BlockParameters:
    """Posterior draw of all block means and variances given labels."""
    W = np.asarray(W, dtype=float)
    stats = _stats_from_labels0(W, z.labels - 1, z.k_max)
    mu, sigma2 = sample_theta_arrays(stats, prior, rng)
    return BlockParameters(mu, sigma2)


def check_finite_loglik(loglik: float, iteration: int) -> float:
    if not np.isfinite(loglik):
        raise NumericalError(
            f"non-finite log-likelihood ({loglik}) at iteration {iteration}; "
            "check the weight matrix scale and prior settings"
        )
    return loglik
