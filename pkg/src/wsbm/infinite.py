"""Blocked Gibbs sampler with a truncated stick-breaking Dirichlet process.

The number of communities is inferred: community weights come from a
truncated GEM construction, the label scan runs over all k_max candidate
labels, and the realized number of non-empty communities is recorded at
every iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocks import (
    BlockParameters,
    CommunityAssignment,
    NIGPrior,
    _loglik_from_stats,
    _stats_from_labels0,
    ensure_weight_matrix,
)
from .errors import InputError
from .gibbs import (
    ChainConfig,
    ChainTrace,
    check_finite_loglik,
    make_rng,
    sample_theta_arrays,
    sweep_assignments,
)

__all__ = [
    "StickBreakingWeights",
    "sample_sticks",
    "sample_z_infinite",
    "count_k",
    "run_wsibm",
]


@dataclass(frozen=True)
class StickBreakingWeights:
    """Truncated GEM weights rho with their stick variables v.

    rho_k = v_k * prod_{s<k} (1 - v_s) for k < k_max, with v[k_max-1]
    fixed to 1 and rho[k_max-1] set to the remaining stick length.
    """

    rho: np.ndarray
    v: np.ndarray
    alpha: float
    k_max: int


def _compose_rho(v: np.ndarray) -> np.ndarray:
    k_max = v.size
    rho = np.empty(k_max)
    rho[0] = v[0]
    if k_max > 1:
        rho[1:] = v[1:] * np.cumprod(1.0 - v[:-1])
    rho[-1] = max(0.0, 1.0 - rho[:-1].sum())
    return rho


def sample_sticks(z, alpha: float, k_max: int, rng: np.random.Generator) -> StickBreakingWeights:
    """Draw stick variables from their Beta conditionals and compose rho.

    V_k | z ~ Beta(1 + n_k, alpha + sum_{l>k} n_l) for k < k_max, with
    the last stick fixed at 1.  Passing counts of all zeros gives prior
    draws V_k ~ Beta(1, alpha).
    """
    if alpha <= 0:
        raise InputError("alpha must be positive")
    if k_max < 1:
        raise InputError("k_max must be >= 1")
    if isinstance(z, CommunityAssignment):
        if z.k_max > k_max:
            raise InputError(f"assignment uses labels beyond k_max={k_max}")
        counts = np.zeros(k_max)
        counts[: z.k_max] = z.counts
    else:
        counts = np.asarray(z, dtype=float)
        if counts.shape != (k_max,):
            raise InputError(f"counts must have length k_max={k_max}")
    v = np.ones(k_max)
    if k_max > 1:
        tail = counts.sum() - np.cumsum(counts)
        v[:-1] = rng.beta(1.0 + counts[:-1], alpha + tail[:-1])
    return StickBreakingWeights(rho=_compose_rho(v), v=v, alpha=float(alpha), k_max=k_max)


def sample_z_infinite(
    W,
    theta: BlockParameters,
    sticks: StickBreakingWeights,
    z: CommunityAssignment,
    rng: np.random.Generator,
) -> CommunityAssignment:
    """One sequential label scan under stick-breaking weights rho."""
    W = np.asarray(W, dtype=float)
    if theta.k_max != sticks.k_max:
        raise InputError("theta must be defined on all k_max labels")
    labels0 = z.labels - 1
    counts = np.zeros(sticks.k_max)
    counts[: z.k_max] += z.counts
    with np.errstate(divide="ignore"):
        lw = np.log(sticks.rho)
    sweep_assignments(W, W * W, labels0, counts, lw, theta.mu, theta.sigma2, rng)
    return CommunityAssignment(labels0 + 1, k_max=sticks.k_max)


def count_k(z: CommunityAssignment) -> int:
    """Number of distinct non-empty community labels."""
    return z.n_communities


def run_wsibm(
    W,
    config: ChainConfig,
    prior: NIGPrior | None = None,
    alpha: float = 1.0,
    k_max: int = 20,
) -> ChainTrace:
    """Run the truncated-DP blocked Gibbs sampler.

    Per iteration: stick update from the current label counts, label
    scan under the composed rho, then block-parameter draws over all
    k_max x k_max unordered blocks (empty blocks fall back to the
    prior).  Stores z, theta, rho, the log-likelihood and the realized
    community count for every post-burn-in iteration.
    """
    W = ensure_weight_matrix(W)
    if k_max < 2:
        raise InputError("k_max must be >= 2")
    if alpha <= 0:
        raise InputError("alpha must be positive")
    n = W.shape[0]
    prior = prior or NIGPrior()

    rng = make_rng(config.seed)
    W2 = W * W
    labels0 = rng.integers(0, k_max, size=n)
    counts = np.bincount(labels0, minlength=k_max).astype(float)
    mu = np.zeros((k_max, k_max))
    sigma2 = np.full((k_max, k_max), 0.1)

    n_store = config.iterations - config.burn_in
    z_draws = np.empty((n_store, n), dtype=np.int32)
    mu_draws = np.empty((n_store, k_max, k_max))
    sigma2_draws = np.empty((n_store, k_max, k_max))
    rho_draws = np.empty((n_store, k_max))
    loglik_draws = np.empty(n_store)
    k_draws = np.empty(n_store, dtype=np.int32)

    for t in range(1, config.iterations + 1):
        v = np.ones(k_max)
        tail = counts.sum() - np.cumsum(counts)
        v[:-1] = rng.beta(1.0 + counts[:-1], alpha + tail[:-1])
        rho = _compose_rho(v)
        with np.errstate(divide="ignore"):
            lw = np.log(rho)
        sweep_assignments(W, W2, labels0, counts, lw, mu, sigma2, rng)
        stats = _stats_from_labels0(W, labels0, k_max)
        mu, sigma2 = sample_theta_arrays(stats, prior, rng)
        loglik = check_finite_loglik(_loglik_from_stats(stats, mu, sigma2), t)
        if t > config.burn_in:
            b = t - config.burn_in - 1
            z_draws[b] = labels0 + 1
            mu_draws[b] = mu
            sigma2_draws[b] = sigma2
            rho_draws[b] = rho
            loglik_draws[b] = loglik
            k_draws[b] = np.count_nonzero(counts)

    meta = {
        "model": "wsibm",
        "n": n,
        "k_max": k_max,
        "iterations": config.iterations,
        "burn_in": config.burn_in,
        "seed": int(config.seed),
        "eta": None,
        "alpha": float(alpha),
        "prior": {"mu0": prior.mu0, "n0": prior.n0, "nu0": prior.nu0, "ss0": prior.ss0},
    }
    return ChainTrace(z_draws, mu_draws, sigma2_draws, rho_draws, loglik_draws, k_draws, meta)
