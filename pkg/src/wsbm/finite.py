"""Blocked Gibbs sampler for the fixed-K weighted stochastic block model.

Per iteration: node-by-node label scan, Dirichlet-multinomial update of
the community probabilities, then conjugate normal-inverse-gamma draws
for every block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocks import (
    BlockParameters,
    CommunityAssignment,
    NIGPrior,
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
from .blocks import _loglik_from_stats

__all__ = ["FiniteMixtureWeights", "sample_tau", "sample_z_finite", "run_wsbm"]


@dataclass(frozen=True)
class FiniteMixtureWeights:
    """Community probability vector tau with its Dirichlet hyperparameters."""

    tau: np.ndarray
    eta: np.ndarray


def sample_tau(z: CommunityAssignment, eta, rng: np.random.Generator) -> FiniteMixtureWeights:
    """Draw tau | z, eta ~ Dir(n_1 + eta_1, ..., n_K + eta_K)."""
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (z.k_max,):
        raise InputError(f"eta must have length {z.k_max}")
    if np.any(eta <= 0):
        raise InputError("eta entries must be positive")
    tau = rng.dirichlet(z.counts + eta)
    tau /= tau.sum()  # exact simplex, incl. the degenerate K=1 case
    return FiniteMixtureWeights(tau=tau, eta=eta)


def sample_z_finite(
    W,
    theta: BlockParameters,
    tau: FiniteMixtureWeights,
    z: CommunityAssignment,
    rng: np.random.Generator,
) -> CommunityAssignment:
    """One sequential label scan under mixture weights tau."""
    W = np.asarray(W, dtype=float)
    labels0 = z.labels - 1
    counts = z.counts.astype(float)
    with np.errstate(divide="ignore"):
        lw = np.log(np.asarray(tau.tau, dtype=float))
    sweep_assignments(W, W * W, labels0, counts, lw, theta.mu, theta.sigma2, rng)
    return CommunityAssignment(labels0 + 1, k_max=z.k_max)


def run_wsbm(
    W,
    config: ChainConfig,
    prior: NIGPrior | None = None,
    eta=None,
) -> ChainTrace:
    """Run the fixed-K blocked Gibbs sampler and return post-burn-in draws.

    Parameters
    ----------
    W : array
        Symmetric weight matrix with zero diagonal.
    config : ChainConfig
        Run length, seed, and the number of communities `k`.
    prior : NIGPrior
        Block-parameter prior; defaults to the weakly informative setting.
    eta : array, optional
        Dirichlet hyperparameters, length k; defaults to all ones.
    """
    W = ensure_weight_matrix(W)
    if config.k is None:
        raise InputError("finite model requires config.k")
    k = config.k
    n = W.shape[0]
    prior = prior or NIGPrior()
    if eta is None:
        eta = np.ones(k)
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (k,):
        raise InputError(f"eta must have length k={k}")
    if np.any(eta <= 0):
        raise InputError("eta entries must be positive")

    rng = make_rng(config.seed)
    W2 = W * W
    labels0 = rng.integers(0, k, size=n)
    counts = np.bincount(labels0, minlength=k).astype(float)
    mu = np.zeros((k, k))
    sigma2 = np.full((k, k), 0.1)
    tau = np.full(k, 1.0 / k)

    n_store = config.iterations - config.burn_in
    z_draws = np.empty((n_store, n), dtype=np.int32)
    mu_draws = np.empty((n_store, k, k))
    sigma2_draws = np.empty((n_store, k, k))
    tau_draws = np.empty((n_store, k))
    loglik_draws = np.empty(n_store)
    k_draws = np.empty(n_store, dtype=np.int32)

    for t in range(1, config.iterations + 1):
        with np.errstate(divide="ignore"):
            lw = np.log(tau)
        sweep_assignments(W, W2, labels0, counts, lw, mu, sigma2, rng)
        tau = rng.dirichlet(counts + eta)
        stats = _stats_from_labels0(W, labels0, k)
        mu, sigma2 = sample_theta_arrays(stats, prior, rng)
        loglik = check_finite_loglik(_loglik_from_stats(stats, mu, sigma2), t)
        if t > config.burn_in:
            b = t - config.burn_in - 1
            z_draws[b] = labels0 + 1
            mu_draws[b] = mu
            sigma2_draws[b] = sigma2
            tau_draws[b] = tau
            loglik_draws[b] = loglik
            k_draws[b] = np.count_nonzero(counts)

    meta = {
        "model": "wsbm",
        "n": n,
        "k_max": k,
        "iterations": config.iterations,
        "burn_in": config.burn_in,
        "seed": int(config.seed),
        "eta": eta.tolist(),
        "alpha": None,
        "prior": {"mu0": prior.mu0, "n0": prior.n0, "nu0": prior.nu0, "ss0": prior.ss0},
    }
    return ChainTrace(z_draws, mu_draws, sigma2_draws, tau_draws, loglik_draws, k_draws, meta)
