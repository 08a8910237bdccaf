"""Block-level sufficient statistics and conjugate normal updates.

Everything downstream (both samplers, the summaries) reduces to the
quantities defined here: per-block edge counts, means and squared
deviations, and the normal-inverse-gamma posterior they induce.  Labels
are 1-based in the public types; the samplers work on 0-based arrays
internally and convert at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

__all__ = [
    "NIGPrior",
    "PosteriorNIG",
    "CommunityAssignment",
    "BlockParameters",
    "BlockStats",
    "ensure_weight_matrix",
    "block_stats",
    "merge_stats",
    "move_node",
    "posterior_nig",
    "posterior_nig_arrays",
    "block_loglik",
]

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class NIGPrior:
    """Normal-inverse-gamma hyperparameters (mu0, n0, nu0, ss0).

    Defaults correspond to the weakly informative setting used
    throughout: mu0=0, n0=1, nu0=10, ss0=0.1.
    """

    mu0: float = 0.0
    n0: float = 1.0
    nu0: float = 10.0
    ss0: float = 0.1

    def __post_init__(self):
        if not (self.n0 > 0 and self.nu0 > 0 and self.ss0 > 0):
            raise InputError("NIG prior requires n0 > 0, nu0 > 0, ss0 > 0")


@dataclass(frozen=True)
class PosteriorNIG:
    """Posterior NIG parameters for a single block."""

    mu_p: float
    n_p: float
    nu_p: float
    ss_p: float


class CommunityAssignment:
    """Length-n vector of 1-based community labels plus per-label counts."""

    __slots__ = ("labels", "counts")

    def __init__(self, labels, k_max: int | None = None):
        labels = np.asarray(labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size == 0:
            raise InputError("labels must be a non-empty 1-D integer vector")
        if labels.min() < 1:
            raise InputError("labels are 1-based; found a label < 1")
        if k_max is None:
            k_max = int(labels.max())
        elif labels.max() > k_max:
            raise InputError(f"label {labels.max()} exceeds k_max={k_max}")
        self.labels = labels
        self.counts = np.bincount(labels - 1, minlength=k_max).astype(np.int64)

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def k_max(self) -> int:
        return self.counts.size

    @property
    def n_communities(self) -> int:
        """Number of non-empty communities."""
        return int(np.count_nonzero(self.counts))

    def __eq__(self, other):
        return (
            isinstance(other, CommunityAssignment)
            and self.counts.size == other.counts.size
            and np.array_equal(self.labels, other.labels)
        )

    def __repr__(self):
        return f"CommunityAssignment(n={self.n}, k_max={self.k_max}, occupied={self.n_communities})"


class BlockParameters:
    """Symmetric per-block mean and variance matrices (k_max x k_max)."""

    __slots__ = ("mu", "sigma2")

    def __init__(self, mu, sigma2):
        mu = np.asarray(mu, dtype=float)
        sigma2 = np.asarray(sigma2, dtype=float)
        if mu.shape != sigma2.shape or mu.ndim != 2 or mu.shape[0] != mu.shape[1]:
            raise InputError("mu and sigma2 must be square matrices of equal shape")
        if not np.array_equal(mu, mu.T) or not np.array_equal(sigma2, sigma2.T):
            raise InputError("block parameter matrices must be symmetric")
        if not np.all(sigma2 > 0):
            raise InputError("block variances must be strictly positive")
        self.mu = mu
        self.sigma2 = sigma2

    @property
    def k_max(self) -> int:
        return self.mu.shape[0]


def ensure_weight_matrix(W) -> np.ndarray:
    """Validate and return a dense weight matrix.

    Requires a square symmetric matrix with zero diagonal and finite
    off-diagonal entries (no self-loops, undirected edges).
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise InputError("weight matrix must be square")
    if not np.all(np.isfinite(W)):
        raise InputError("weight matrix contains non-finite entries")
    if np.any(np.diag(W) != 0.0):
        raise InputError("weight matrix must have a zero diagonal (no self-loops)")
    if not np.array_equal(W, W.T):
        raise InputError("weight matrix must be symmetric")
    return W


class BlockStats:
    """Per-block edge counts and raw weight sums.

    Stores n_edges, sum_w and sum_w2 per unordered block; the sample
    mean and the sum of squared deviations are derived on access.
    Storing raw sums keeps the merge and single-node-move updates
    associative.
    """

    __slots__ = ("n_edges", "sum_w", "sum_w2")

    def __init__(self, n_edges, sum_w, sum_w2):
        self.n_edges = n_edges
        self.sum_w = sum_w
        self.sum_w2 = sum_w2

    @property
    def k_max(self) -> int:
        return self.n_edges.shape[0]

    @property
    def mean(self) -> np.ndarray:
        """Block sample means; 0 for empty blocks."""
        with np.errstate(invalid="ignore"):
            m = np.where(self.n_edges > 0, self.sum_w / np.maximum(self.n_edges, 1), 0.0)
        return m

    @property
    def sum_sq_dev(self) -> np.ndarray:
        """Sum of squared deviations from the block mean; 0 for empty blocks."""
        m = self.mean
        # sum (w - m)^2 = sum w^2 - N m^2; clamp tiny negatives from rounding
        ssd = self.sum_w2 - self.n_edges * m * m
        return np.maximum(ssd, 0.0)

    def copy(self) -> "BlockStats":
        return BlockStats(self.n_edges.copy(), self.sum_w.copy(), self.sum_w2.copy())


def _stats_from_labels0(W: np.ndarray, labels0: np.ndarray, k_max: int) -> BlockStats:
    """Block statistics from 0-based labels via one-hot contractions."""
    n = labels0.size
    Z = np.zeros((n, k_max))
    Z[np.arange(n), labels0] = 1.0
    s1 = Z.T @ W @ Z
    s2 = Z.T @ (W * W) @ Z
    counts = np.bincount(labels0, minlength=k_max).astype(np.int64)
    n_edges = np.outer(counts, counts)
    np.fill_diagonal(n_edges, counts * (counts - 1) // 2)
    # diagonal blocks count each unordered edge twice in the contraction
    diag = np.diag_indices(k_max)
    s1[diag] /= 2.0
    s2[diag] /= 2.0
    return BlockStats(n_edges, s1, s2)


def block_stats(W, z: CommunityAssignment, k_max: int | None = None) -> BlockStats:
    """Compute per-block edge counts, weight sums and squared sums.

    Each unordered edge contributes exactly once: diagonal blocks hold
    C(n_l, 2) edges, off-diagonal blocks n_l * n_q.
    """
    W = ensure_weight_matrix(W)
    if k_max is None:
        k_max = z.k_max
    if W.shape[0] != z.n:
        raise InputError("weight matrix size does not match assignment length")
    return _stats_from_labels0(W, z.labels - 1, k_max)


def merge_stats(a: BlockStats, b: BlockStats) -> BlockStats:
    """Combine statistics computed over disjoint edge shards."""
    return BlockStats(a.n_edges + b.n_edges, a.sum_w + b.sum_w, a.sum_w2 + b.sum_w2)


def move_node(stats: BlockStats, W: np.ndarray, labels0: np.ndarray, j: int, new0: int) -> BlockStats:
    """Return stats updated for node j moving to community new0.

    `labels0` must reflect the state *before* the move (0-based) and is
    not modified.  The caller is responsible for updating labels.
    """
    old0 = int(labels0[j])
    out = stats.copy()
    if new0 == old0:
        return out
    k_max = stats.k_max
    w_to = np.bincount(labels0, weights=W[j], minlength=k_max)
    w2_to = np.bincount(labels0, weights=W[j] * W[j], minlength=k_max)
    cnt_to = np.bincount(labels0, minlength=k_max).astype(np.int64)
    cnt_to[old0] -= 1  # j itself carries no edge weight (zero diagonal)
    out.n_edges[old0, :] -= cnt_to
    out.n_edges[:, old0] -= cnt_to
    out.n_edges[old0, old0] += cnt_to[old0]
    out.sum_w[old0, :] -= w_to
    out.sum_w[:, old0] -= w_to
    out.sum_w[old0, old0] += w_to[old0]
    out.sum_w2[old0, :] -= w2_to
    out.sum_w2[:, old0] -= w2_to
    out.sum_w2[old0, old0] += w2_to[old0]
    # re-attach under the new label; j still contributes nothing to itself
    out.n_edges[new0, :] += cnt_to
    out.n_edges[:, new0] += cnt_to
    out.n_edges[new0, new0] -= cnt_to[new0]
    out.sum_w[new0, :] += w_to
    out.sum_w[:, new0] += w_to
    out.sum_w[new0, new0] -= w_to[new0]
    out.sum_w2[new0, :] += w2_to
    out.sum_w2[:, new0] += w2_to
    out.sum_w2[new0, new0] -= w2_to[new0]
    return out


def posterior_nig_arrays(stats: BlockStats, prior: NIGPrior):
    """Posterior NIG parameters for every block at once.

    Returns (mu_p, n_p, nu_p, ss_p) as k_max x k_max arrays.  Empty
    blocks reduce to the prior.
    """
    N = stats.n_edges.astype(float)
    wbar = stats.mean
    ssd = stats.sum_sq_dev
    n_p = N + prior.n0
    nu_p = N + prior.nu0
    mu_p = (N * wbar + prior.n0 * prior.mu0) / n_p
    ss_p = prior.ss0 + ssd + (prior.n0 * N / n_p) * (wbar - prior.mu0) ** 2
    return mu_p, n_p, nu_p, ss_p


def posterior_nig(stats: BlockStats, block: tuple[int, int], prior: NIGPrior) -> PosteriorNIG:
    """Conjugate posterior for one block, identified by 1-based (l, q)."""
    l, q = block
    mu_p, n_p, nu_p, ss_p = posterior_nig_arrays(stats, prior)
    i, j = l - 1, q - 1
    return PosteriorNIG(float(mu_p[i, j]), float(n_p[i, j]), float(nu_p[i, j]), float(ss_p[i, j]))


def _loglik_from_stats(stats: BlockStats, mu: np.ndarray, sigma2: np.ndarray) -> float:
    """Gaussian log-likelihood of all edges from block sufficient statistics."""
    N = stats.n_edges.astype(float)
    wbar = stats.mean
    ssd = stats.sum_sq_dev
    iu = np.triu_indices(stats.k_max)
    sq = ssd + N * (wbar - mu) ** 2
    terms = -0.5 * (N * (LOG_2PI + np.log(sigma2)) + sq / sigma2)
    return float(terms[iu].sum())


def block_loglik(W, z: CommunityAssignment, theta: BlockParameters) -> float:
    """Total log-likelihood: sum over unordered edges (j < j') of
    log N(W_jj'; mu[z_j, z_j'], sigma2[z_j, z_j'])."""
    W = ensure_weight_matrix(W)
    stats = _stats_from_labels0(W, z.labels - 1, theta.k_max)
    return _loglik_from_stats(stats, theta.mu, theta.sigma2)
