"""Posterior summarization of stored Gibbs draws.

Point estimates and uncertainty summaries are built from co-clustering
statistics, which are invariant to label switching: the pairwise
probability matrix counts how often two nodes share a label, and the
loss-based point estimate picks the stored draw closest to it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blocks import CommunityAssignment
from .errors import InputError

__all__ = [
    "PosteriorPairwiseMatrix",
    "CommunitySummary",
    "accumulate_ppm",
    "merge_ppm",
    "consensus_ppm",
    "estimate_map",
    "estimate_z_ppm",
    "canonical_relabel",
    "summarize_blocks",
    "nodal_strength",
    "group_strength",
]

_CHUNK = 256


@dataclass(frozen=True)
class PosteriorPairwiseMatrix:
    """Co-clustering counts over B draws; probabilities are counts/B."""

    counts: np.ndarray  # (n, n) int64, diagonal == draws_used
    draws_used: int

    @property
    def n(self) -> int:
        return self.counts.shape[0]

    @property
    def probs(self) -> np.ndarray:
        return self.counts / self.draws_used


def _as_draws(z_draws) -> np.ndarray:
    z = np.asarray(z_draws)
    if z.ndim == 1:
        z = z[None, :]
    if z.ndim != 2 or z.shape[0] == 0:
        raise InputError("need at least one stored draw")
    return z


def accumulate_ppm(z_draws) -> PosteriorPairwiseMatrix:
    """Exact co-clustering frequencies over stored label draws.

    Accepts a (B, n) array of labels (or a single draw).  Works in
    chunks so arbitrarily long chains can be accumulated; merging two
    results with `merge_ppm` equals accumulating the concatenation.
    """
    z = _as_draws(z_draws)
    b, n = z.shape
    counts = np.zeros((n, n), dtype=np.int64)
    for lo in range(0, b, _CHUNK):
        chunk = z[lo : lo + _CHUNK]
        counts += (chunk[:, :, None] == chunk[:, None, :]).sum(axis=0)
    return PosteriorPairwiseMatrix(counts=counts, draws_used=b)


def merge_ppm(a: PosteriorPairwiseMatrix, b: PosteriorPairwiseMatrix) -> PosteriorPairwiseMatrix:
    """Weighted merge: the PPM of the concatenated draw sets."""
    if a.n != b.n:
        raise InputError("cannot merge pairwise matrices over different node sets")
    return PosteriorPairwiseMatrix(counts=a.counts + b.counts, draws_used=a.draws_used + b.draws_used)


def consensus_ppm(traces) -> PosteriorPairwiseMatrix:
    """Merge the pairwise matrices of several chains, weighted by draw count."""
    traces = list(traces)
    if not traces:
        raise InputError("need at least one chain")
    out = accumulate_ppm(traces[0].z_draws)
    for tr in traces[1:]:
        out = merge_ppm(out, accumulate_ppm(tr.z_draws))
    return out


def map_scores(z_draws: np.ndarray, weight_draws: np.ndarray, loglik_draws: np.ndarray) -> np.ndarray:
    """Per-draw joint score: stored log-likelihood plus label prior mass
    sum_j log w_b[z_b[j]] under that draw's community weight vector."""
    with np.errstate(divide="ignore"):
        logw = np.log(weight_draws)
    prior_mass = np.take_along_axis(logw, np.asarray(z_draws, dtype=np.int64) - 1, axis=1).sum(axis=1)
    return loglik_draws + prior_mass


def estimate_map(trace) -> CommunityAssignment:
    """Stored draw maximizing likelihood plus label prior mass.

    Ties break toward the earliest iteration (argmax returns the first
    maximizer).
    """
    if trace.n_draws == 0:
        raise InputError("empty trace")
    score = map_scores(trace.z_draws, trace.weight_draws, trace.loglik_draws)
    best = int(np.argmax(score))
    return CommunityAssignment(trace.z_draws[best], k_max=trace.k_max)


def _ppm_loss_terms(z_draws: np.ndarray, probs: np.ndarray):
    """Per-draw values of sum_{j<j'} I(z_j=z_j') * (1 - 2 M_jj').

    Adding the constant sum_{j<j'} M^2 gives the squared-deviation loss,
    so minimizing this quantity minimizes the loss.
    """
    a = 1.0 - 2.0 * probs
    np.fill_diagonal(a, 0.0)
    vals = np.empty(z_draws.shape[0])
    for b in range(z_draws.shape[0]):
        zb = z_draws[b]
        same = zb[:, None] == zb[None, :]
        vals[b] = (a * same).sum() / 2.0
    return vals


def estimate_z_ppm(z_draws, ppm: PosteriorPairwiseMatrix) -> CommunityAssignment:
    """Stored draw minimizing the squared deviation of its association
    matrix from the pairwise probability matrix.

    The search space is exactly the stored draws; pass the union of
    several chains' draws for a consensus estimate.  Ties break toward
    the earliest draw.  Duplicate partitions are collapsed before
    scoring, which preserves the tie rule because co-clustering loss
    depends only on the partition.
    """
    z = _as_draws(z_draws)
    if z.shape[1] != ppm.n:
        raise InputError("draws and pairwise matrix cover different node sets")
    # dedupe by partition (first-occurrence canonical form)
    seen: dict[bytes, int] = {}
    order: list[int] = []
    for b in range(z.shape[0]):
        key = _partition_key(z[b])
        if key not in seen:
            seen[key] = b
            order.append(b)
    unique = z[order]
    vals = _ppm_loss_terms(unique, ppm.probs)
    best = order[int(np.argmin(vals))]
    return CommunityAssignment(z[best])


def _partition_key(labels: np.ndarray) -> bytes:
    """Label-invariant canonical byte key of a partition."""
    remap = {}
    out = np.empty(labels.size, dtype=np.int32)
    for i, lab in enumerate(labels):
        out[i] = remap.setdefault(int(lab), len(remap))
    return out.tobytes()


def ppm_loss(labels, ppm: PosteriorPairwiseMatrix) -> float:
    """sum_{j<j'} [I(z_j = z_j') - M_jj']^2 for a single labeling."""
    labels = np.asarray(getattr(labels, "labels", labels))
    probs = ppm.probs
    same = labels[:, None] == labels[None, :]
    diff = same.astype(float) - probs
    np.fill_diagonal(diff, 0.0)
    return float((diff * diff).sum() / 2.0)


def canonical_relabel(z: CommunityAssignment) -> CommunityAssignment:
    """Renumber labels 1..K by decreasing community size.

    Ties break toward the community containing the smallest node index.
    Co-clustering structure is unchanged; the result is idempotent.
    """
    labels = z.labels
    present = np.unique(labels)
    first_idx = {int(lab): int(np.argmax(labels == lab)) for lab in present}
    sizes = {int(lab): int((labels == lab).sum()) for lab in present}
    ranked = sorted(present, key=lambda lab: (-sizes[int(lab)], first_idx[int(lab)]))
    mapping = {int(lab): i + 1 for i, lab in enumerate(ranked)}
    new = np.array([mapping[int(lab)] for lab in labels], dtype=np.int64)
    return CommunityAssignment(new)


def per_node_confidence(ppm: PosteriorPairwiseMatrix, z_hat: CommunityAssignment) -> np.ndarray:
    """Mean co-clustering probability of each node with its community.

    Singleton communities get confidence 1 (the node always co-clusters
    with itself).
    """
    probs = ppm.probs
    labels = z_hat.labels
    out = np.ones(z_hat.n)
    for j in range(z_hat.n):
        mates = np.flatnonzero(labels == labels[j])
        mates = mates[mates != j]
        if mates.size:
            out[j] = probs[j, mates].mean()
    return out


@dataclass
class CommunitySummary:
    """Point estimate with per-block posterior means and credible intervals."""

    z_hat: CommunityAssignment
    k_hat: int
    block_table: list = field(default_factory=list)
    per_node_confidence: np.ndarray | None = None
    nodal_strengths: np.ndarray | None = None

    def to_dict(self, node_ids=None) -> dict:
        d = {
            "format_version": 1,
            "k_hat": self.k_hat,
            "labels": self.z_hat.labels.tolist(),
            "blocks": self.block_table,
        }
        if node_ids is not None:
            d["node_ids"] = list(node_ids)
        if self.per_node_confidence is not None:
            d["per_node_confidence"] = [float(x) for x in self.per_node_confidence]
        if self.nodal_strengths is not None:
            d["nodal_strength"] = [float(x) for x in self.nodal_strengths]
        return d


def _block_samples(traces, z_hat: CommunityAssignment):
    """Conditional posterior samples of block means under z_hat.

    For every unordered block (l, q) of z_hat a representative node
    pair is fixed (smallest indices).  A draw contributes its mean for
    the pair's block iff the pair's co-clustering in that draw matches
    z_hat; label switching cannot corrupt the mapping because only the
    pair's own labels are consulted.
    """
    labels = z_hat.labels
    present = [int(lab) for lab in np.unique(labels)]
    members = {lab: np.flatnonzero(labels == lab) for lab in present}
    reps = {}
    for a, l in enumerate(present):
        for q in present[a:]:
            if l == q:
                if members[l].size >= 2:
                    reps[(l, q)] = (members[l][0], members[l][1], True)
                else:
                    reps[(l, q)] = (members[l][0], members[l][0], None)
            else:
                reps[(l, q)] = (members[l][0], members[q][0], False)
    samples = {key: [] for key in reps}
    for tr in traces:
        z = tr.z_draws.astype(np.int64)
        for (l, q), (j1, j2, want_same) in reps.items():
            i1 = z[:, j1] - 1
            i2 = z[:, j2] - 1
            if want_same is None:
                mask = np.ones(i1.size, dtype=bool)
            elif want_same:
                mask = i1 == i2
            else:
                mask = i1 != i2
            if mask.any():
                vals = tr.mu_draws[mask, i1[mask], i2[mask]]
                samples[(l, q)].append(vals)
    return reps, {k: (np.concatenate(v) if v else np.empty(0)) for k, v in samples.items()}


def summarize_blocks(
    traces,
    z_hat: CommunityAssignment,
    W,
    level: float = 0.95,
    ppm: PosteriorPairwiseMatrix | None = None,
) -> CommunitySummary:
    """Posterior means and credible intervals of block means under z_hat.

    `traces` is a ChainTrace, a list of them, or (when `ppm` is given)
    any single-pass iterable of them.  Intervals are empirical quantiles
    of the conditional samples described in `_block_samples`, reported
    on the weight scale and back-transformed to the correlation scale
    via the inverse hyperbolic-tangent relation.
    """
    if ppm is None:
        if not isinstance(traces, (list, tuple)):
            traces = [traces]
        ppm = consensus_ppm(traces)
    lo_q, hi_q = (1.0 - level) / 2.0, 1.0 - (1.0 - level) / 2.0
    _, samples = _block_samples(traces, z_hat)
    table = []
    for (l, q), vals in sorted(samples.items()):
        if vals.size:
            mean = float(vals.mean())
            lo = float(np.quantile(vals, lo_q))
            hi = float(np.quantile(vals, hi_q))
        else:
            mean = lo = hi = float("nan")
        row = {
            "l": l,
            "q": q,
            "mean_weight": mean,
            "ci_lower_weight": lo,
            "ci_upper_weight": hi,
            "mean_correlation": float(np.tanh(mean)),
            "ci_lower_correlation": float(np.tanh(lo)),
            "ci_upper_correlation": float(np.tanh(hi)),
            "draws_used": int(vals.size),
        }
        table.append(row)
    return CommunitySummary(
        z_hat=z_hat,
        k_hat=int(z_hat.n_communities),
        block_table=table,
        per_node_confidence=per_node_confidence(ppm, z_hat),
        nodal_strengths=nodal_strength(W) if W is not None else None,
    )


def nodal_strength(W) -> np.ndarray:
    """Per-node sum of absolute incident edge weights."""
    W = np.asarray(getattr(W, "values", W), dtype=float)
    return np.abs(W).sum(axis=1)


def group_strength(strengths, groups) -> list:
    """Aggregate nodal strengths by a grouping (e.g. genus), descending."""
    strengths = np.asarray(strengths, dtype=float)
    totals: dict[str, float] = {}
    for s, g in zip(strengths, groups):
        totals[g] = totals.get(g, 0.0) + float(s)
    return sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
