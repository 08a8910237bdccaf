"""From relative abundances to a dense weight matrix.

Pipeline: prevalence filter -> zero-preserving centered log-ratio
transform -> rank correlation -> hyperbolic-arctangent (Fisher) map.
Zeros are structural in abundance data, so the log-ratio step keeps
them at exactly zero instead of masking them with pseudocounts, and the
correlation step defaults to a tie-corrected rank statistic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .blocks import ensure_weight_matrix
from .errors import EmptyNetworkError, InputError

__all__ = [
    "RelativeAbundanceMatrix",
    "TransformedAbundanceMatrix",
    "CorrelationMatrix",
    "WeightMatrix",
    "PreprocessConfig",
    "filter_prevalence",
    "mclr_transform",
    "rank_correlation",
    "fisher_transform",
    "inverse_fisher",
    "build_weight_matrix",
]

CORRELATION_METHODS = ("kendall", "spearman", "pearson")
SIMPLEX_TOL = 1e-9


class ZeroVarianceWarning(UserWarning):
    pass


class RelativeAbundanceMatrix:
    """m x n matrix of per-sample relative abundances on the simplex.

    Rows must sum to one within 1e-9.  Count data should enter through
    `from_counts`, which normalizes each row first.
    """

    __slots__ = ("values", "sample_ids", "taxon_ids", "normalized_from_counts")

    def __init__(self, values, sample_ids, taxon_ids, normalized_from_counts=False):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise InputError("abundance matrix must be 2-D (samples x taxa)")
        m, n = values.shape
        if len(sample_ids) != m or len(taxon_ids) != n:
            raise InputError("identifier lists do not match the matrix shape")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise InputError("abundances must be finite and non-negative")
        row_sums = values.sum(axis=1)
        bad = np.flatnonzero(np.abs(row_sums - 1.0) > SIMPLEX_TOL)
        if bad.size:
            raise InputError(
                f"row {sample_ids[bad[0]]!r} sums to {row_sums[bad[0]]:.6g}, not 1; "
                "use RelativeAbundanceMatrix.from_counts for raw count data"
            )
        self.values = values
        self.sample_ids = list(sample_ids)
        self.taxon_ids = list(taxon_ids)
        self.normalized_from_counts = bool(normalized_from_counts)

    @classmethod
    def from_counts(cls, counts, sample_ids, taxon_ids) -> "RelativeAbundanceMatrix":
        counts = np.asarray(counts, dtype=float)
        if np.any(counts < 0) or not np.all(np.isfinite(counts)):
            raise InputError("counts must be finite and non-negative")
        totals = counts.sum(axis=1)
        zero = np.flatnonzero(totals == 0)
        if zero.size:
            raise InputError(f"sample {sample_ids[zero[0]]!r} has zero total abundance")
        return cls(counts / totals[:, None], sample_ids, taxon_ids, normalized_from_counts=True)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_taxa(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class TransformedAbundanceMatrix:
    """Log-ratio transformed abundances with the original zero pattern."""

    values: np.ndarray
    zero_mask: np.ndarray
    epsilon: float


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric correlation matrix with unit diagonal."""

    values: np.ndarray
    method: str
    degenerate_taxa: tuple = ()


class WeightMatrix:
    """Symmetric n x n edge-weight matrix with zero diagonal."""

    __slots__ = ("values", "taxon_ids")

    def __init__(self, values, taxon_ids):
        values = ensure_weight_matrix(values)
        if len(taxon_ids) != values.shape[0]:
            raise InputError("taxon_ids length does not match the matrix")
        self.values = values
        self.taxon_ids = list(taxon_ids)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class PreprocessConfig:
    min_nonzero: int = 1
    method: str = "kendall"
    clamp: float = 0.999

    def __post_init__(self):
        if self.min_nonzero < 1:
            raise InputError("min_nonzero must be >= 1")
        if self.method not in CORRELATION_METHODS:
            raise InputError(f"method must be one of {CORRELATION_METHODS}")
        if not (0.0 < self.clamp < 1.0):
            raise InputError("clamp must lie in (0, 1)")


def filter_prevalence(abundance: RelativeAbundanceMatrix, min_nonzero: int) -> RelativeAbundanceMatrix:
    """Drop taxa observed in fewer than `min_nonzero` samples.

    Remaining rows are renormalized to the simplex; taxon order is
    preserved.  Raises EmptyNetworkError if nothing survives.
    """
    if min_nonzero < 1:
        raise InputError("min_nonzero must be >= 1")
    if abundance.n_taxa < 1:
        raise InputError("abundance matrix has no taxa")
    nonzero = (abundance.values > 0).sum(axis=0)
    keep = np.flatnonzero(nonzero >= min_nonzero)
    if keep.size == 0:
        raise EmptyNetworkError(
            f"prevalence filter (min_nonzero={min_nonzero}) removed every taxon"
        )
    vals = abundance.values[:, keep]
    totals = vals.sum(axis=1)
    empty = np.flatnonzero(totals == 0)
    if empty.size:
        raise InputError(
            f"sample {abundance.sample_ids[empty[0]]!r} has no non-zero abundance "
            "among the retained taxa"
        )
    return RelativeAbundanceMatrix(
        vals / totals[:, None],
        abundance.sample_ids,
        [abundance.taxon_ids[i] for i in keep],
        normalized_from_counts=abundance.normalized_from_counts,
    )


def mclr_transform(abundance: RelativeAbundanceMatrix) -> TransformedAbundanceMatrix:
    """Zero-preserving centered log-ratio transform.

    Within each row, non-zero entries are log-ratios against the
    geometric mean of that row's non-zero entries; zeros stay exactly
    zero.  A single global shift (the absolute minimum log-ratio over
    all non-zero entries, plus one) makes every non-zero output
    strictly positive while keeping cross-sample comparability.
    """
    y = abundance.values
    zero_mask = y == 0
    if np.any(zero_mask.all(axis=1)):
        i = int(np.argmax(zero_mask.all(axis=1)))
        raise InputError(
            f"sample {abundance.sample_ids[i]!r} is all zeros; geometric mean undefined"
        )
    with np.errstate(divide="ignore"):
        logs = np.where(zero_mask, 0.0, np.log(y, where=~zero_mask, out=np.zeros_like(y)))
    gmean_log = logs.sum(axis=1) / (~zero_mask).sum(axis=1)
    ratios = logs - gmean_log[:, None]
    eps = abs(float(ratios[~zero_mask].min())) + 1.0
    out = np.where(zero_mask, 0.0, ratios + eps)
    return TransformedAbundanceMatrix(values=out, zero_mask=zero_mask, epsilon=eps)


def _rank_matrix(x: np.ndarray) -> np.ndarray:
    return np.column_stack([sps.rankdata(x[:, j]) for j in range(x.shape[1])])


def rank_correlation(transformed: TransformedAbundanceMatrix, method: str = "kendall") -> CorrelationMatrix:
    """Pairwise correlation matrix of the transformed columns.

    kendall uses the tie-corrected tau-b statistic (zero-inflated data
    produce heavy ties), spearman ranks the columns first, pearson uses
    the values as-is.  Columns with zero variance get correlation 0
    against everything and trigger a ZeroVarianceWarning.
    """
    if method not in CORRELATION_METHODS:
        raise InputError(f"method must be one of {CORRELATION_METHODS}")
    x = transformed.values
    m, n = x.shape
    if m < 3:
        raise InputError("need at least 3 samples to estimate correlations")
    degenerate = np.flatnonzero(np.all(x == x[0, :], axis=0))
    if degenerate.size:
        warnings.warn(
            f"{degenerate.size} taxa have zero variance; their correlations are set to 0",
            ZeroVarianceWarning,
            stacklevel=2,
        )
    ok = np.flatnonzero(~np.isin(np.arange(n), degenerate))
    r = np.zeros((n, n))
    if method == "kendall":
        for ai in range(len(ok)):
            for bi in range(ai + 1, len(ok)):
                j, jp = ok[ai], ok[bi]
                tau = sps.kendalltau(x[:, j], x[:, jp]).statistic
                r[j, jp] = r[jp, j] = tau
    else:
        cols = x[:, ok] if method == "pearson" else _rank_matrix(x[:, ok])
        if ok.size >= 2:
            sub = np.corrcoef(cols, rowvar=False)
            r[np.ix_(ok, ok)] = sub
    r = np.clip((r + r.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return CorrelationMatrix(values=r, method=method, degenerate_taxa=tuple(int(i) for i in degenerate))


def fisher_transform(corr: CorrelationMatrix, clamp: float = 0.999, taxon_ids=None) -> WeightMatrix:
    """Map correlations to the real line: W = arctanh(clamped R).

    Correlations are clamped to [-clamp, clamp] first so the transform
    stays finite; the diagonal is forced to zero (self-loops are
    excluded, not transformed).
    """
    if not (0.0 < clamp < 1.0):
        raise InputError("clamp must lie in (0, 1)")
    r = np.clip(corr.values, -clamp, clamp)
    w = np.arctanh(r)
    np.fill_diagonal(w, 0.0)
    if taxon_ids is None:
        taxon_ids = [f"t{j + 1}" for j in range(w.shape[0])]
    return WeightMatrix(w, taxon_ids)


def inverse_fisher(w) -> np.ndarray:
    """Back-transform weights to the correlation scale."""
    return np.tanh(np.asarray(w, dtype=float))


def build_weight_matrix(abundance: RelativeAbundanceMatrix, config: PreprocessConfig):
    """Run the full pipeline and return (WeightMatrix, provenance dict).

    The provenance record lists each stage with its parameters, the taxa
    dropped by the prevalence filter, the global log-ratio shift, and
    any degenerate taxa found during correlation.
    """
    filtered = filter_prevalence(abundance, config.min_nonzero)
    if filtered.n_taxa < 2:
        raise InputError("fewer than 2 taxa remain; no pairs to correlate")
    dropped = [t for t in abundance.taxon_ids if t not in set(filtered.taxon_ids)]
    transformed = mclr_transform(filtered)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ZeroVarianceWarning)
        corr = rank_correlation(transformed, config.method)
    wm = fisher_transform(corr, config.clamp, taxon_ids=filtered.taxon_ids)
    provenance = {
        "format_version": 1,
        "stages": [
            {
                "stage": "filter_prevalence",
                "min_nonzero": config.min_nonzero,
                "taxa_in": abundance.n_taxa,
                "taxa_out": filtered.n_taxa,
                "taxa_dropped": dropped,
                "normalized_from_counts": abundance.normalized_from_counts,
            },
            {
                "stage": "mclr_transform",
                "epsilon": transformed.epsilon,
                "zero_fraction": float(transformed.zero_mask.mean()),
            },
            {
                "stage": "rank_correlation",
                "method": config.method,
                "zero_variance_taxa": [filtered.taxon_ids[i] for i in corr.degenerate_taxa],
            },
            {"stage": "fisher_transform", "clamp": config.clamp},
        ],
    }
    return wm, provenance
