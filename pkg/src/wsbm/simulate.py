"""Planted-partition generator for dense weighted networks.

Networks are fully connected with Gaussian edge weights: within- and
between-community blocks get their own mean, block variances are drawn
from an exponential so variability differs across blocks, and the true
labels are returned alongside the weights for benchmarking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blocks import BlockParameters, CommunityAssignment
from .errors import InputError
from .gibbs import make_rng

__all__ = ["SimulationSpec", "PlantedNetwork", "community_sizes", "simulate_network", "preset_spec", "PRESETS"]


@dataclass(frozen=True)
class SimulationSpec:
    n: int
    k_true: int
    proportions: tuple
    mu_diag: tuple
    mu_offdiag: float = 0.0
    sigma2_rate: float = 0.1
    permute_means: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.k_true < 1:
            raise InputError("k_true must be >= 1")
        if self.k_true > self.n:
            raise InputError("k_true cannot exceed the number of nodes")
        if len(self.proportions) != self.k_true or len(self.mu_diag) != self.k_true:
            raise InputError("proportions and mu_diag must have length k_true")
        if abs(sum(self.proportions) - 1.0) > 1e-9 or min(self.proportions) <= 0:
            raise InputError("proportions must be positive and sum to 1")
        if self.sigma2_rate <= 0:
            raise InputError("sigma2_rate must be positive")


@dataclass(frozen=True)
class PlantedNetwork:
    W: np.ndarray
    z_true: CommunityAssignment
    theta_true: BlockParameters
    spec: SimulationSpec = field(repr=False, default=None)


def community_sizes(n: int, proportions) -> np.ndarray:
    """Integer community sizes by largest-remainder rounding of n * w."""
    w = np.asarray(proportions, dtype=float)
    exact = n * w
    base = np.floor(exact).astype(np.int64)
    short = n - int(base.sum())
    if short:
        frac = exact - base
        # largest fractional parts win; ties go to the smallest index
        order = np.lexsort((np.arange(w.size), -frac))
        base[order[:short]] += 1
    return base


def simulate_network(spec: SimulationSpec, rng: np.random.Generator | None = None) -> PlantedNetwork:
    """Generate a planted-partition network from `spec`.

    Community sizes follow largest-remainder rounding, nodes are
    labeled contiguously, block variances are i.i.d. exponential with
    the given *rate* (mean 1/rate), and each unordered edge weight is
    one Gaussian draw from its block.
    """
    if rng is None:
        rng = make_rng(spec.seed)
    k = spec.k_true
    sizes = community_sizes(spec.n, spec.proportions)
    labels = np.repeat(np.arange(1, k + 1), sizes)
    z = CommunityAssignment(labels, k_max=k)

    mu_diag = np.asarray(spec.mu_diag, dtype=float)
    if spec.permute_means:
        mu_diag = mu_diag[rng.permutation(k)]
    mu = np.full((k, k), float(spec.mu_offdiag))
    np.fill_diagonal(mu, mu_diag)

    iu_b = np.triu_indices(k)
    sig_flat = rng.exponential(scale=1.0 / spec.sigma2_rate, size=iu_b[0].size)
    sigma2 = np.empty((k, k))
    sigma2[iu_b] = sig_flat
    sigma2.T[iu_b] = sig_flat
    theta = BlockParameters(mu, sigma2)

    iu = np.triu_indices(spec.n, 1)
    l0 = labels[iu[0]] - 1
    q0 = labels[iu[1]] - 1
    w_flat = mu[l0, q0] + np.sqrt(sigma2[l0, q0]) * rng.standard_normal(iu[0].size)
    W = np.zeros((spec.n, spec.n))
    W[iu] = w_flat
    W.T[iu] = w_flat
    return PlantedNetwork(W=W, z_true=z, theta_true=theta, spec=spec)


# Benchmark presets: three-community cases at n = 50/70/100 and
# seven-community cases at n = 100/150/200.
_K3 = dict(
    k_true=3,
    proportions=(0.2, 0.5, 0.3),
    mu_diag=(-3.0, 0.0, 3.0),
)
_K7 = dict(
    k_true=7,
    proportions=(0.1, 0.25, 0.15, 0.05, 0.15, 0.1, 0.2),
    mu_diag=(-6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0),
)
PRESETS = {
    "case1": dict(n=50, **_K3),
    "case2": dict(n=70, **_K3),
    "case3": dict(n=100, **_K3),
    "case4": dict(n=100, **_K7),
    "case5": dict(n=150, **_K7),
    "case6": dict(n=200, **_K7),
}


def preset_spec(name: str, seed: int = 0, permute_means: bool = False) -> SimulationSpec:
    """SimulationSpec for a named preset (case1..case6)."""
    if name not in PRESETS:
        raise InputError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return SimulationSpec(seed=seed, permute_means=permute_means, **PRESETS[name])
