"""Partition agreement metrics: adjusted Rand index and normalized
mutual information.

Both are label-permutation invariant, so they compare MCMC point
estimates against ground truth without any label alignment step.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError

__all__ = ["ari", "nmi", "contingency_table"]


def _labels(z) -> np.ndarray:
    arr = np.asarray(getattr(z, "labels", z))
    if arr.ndim != 1 or arr.size == 0:
        raise InputError("labels must be a non-empty 1-D vector")
    return arr


def contingency_table(z, z_hat) -> np.ndarray:
    """Cross-tabulation o[l, q] = #{j : z_j = l-th class, z_hat_j = q-th class}."""
    a = _labels(z)
    b = _labels(z_hat)
    if a.size != b.size:
        raise InputError(f"label vectors differ in length ({a.size} vs {b.size})")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def _pair_counts(table: np.ndarray, n: int):
    """Pair counts (a, b, c, d) over all unordered node pairs.

    a: same community in both partitions; b: same in the first only;
    c: same in the second only; d: different in both.  Computed from the
    contingency table with exact integer arithmetic.
    """

    def comb2(x):
        return int(x) * (int(x) - 1) // 2

    a = sum(comb2(o) for o in table.ravel())
    same_first = sum(comb2(r) for r in table.sum(axis=1))
    same_second = sum(comb2(c) for c in table.sum(axis=0))
    b = same_first - a
    c = same_second - a
    d = comb2(n) - a - b - c
    return a, b, c, d


def ari_from_pair_counts(a: int, b: int, c: int, d: int) -> float:
    """Chance-corrected Rand index from the four pair counts."""
    total = a + b + c + d
    if b == 0 and c == 0:
        return 1.0
    cross = (a + b) * (a + c) + (c + d) * (b + d)
    num = total * (a + d) - cross
    den = total * total - cross
    if den == 0:
        return 0.0
    return num / den


def ari(z, z_hat) -> float:
    """Adjusted Rand index between two partitions.

    Ranges over (-1, 1], equals 1 iff the partitions agree perfectly,
    and is invariant to label permutations of either argument.
    """
    table = contingency_table(z, z_hat)
    n = int(table.sum())
    return ari_from_pair_counts(*_pair_counts(table, n))


def nmi(z, z_hat) -> float:
    """Normalized mutual information in [0, 1].

    Mutual information over the contingency table, normalized by the
    geometric mean of the two label entropies (natural logs).  Two
    trivial single-community partitions count as identical (1); if only
    one partition is trivial there is no shared information (0).
    """
    table = contingency_table(z, z_hat)
    n = table.sum()
    p_rows = table.sum(axis=1) / n
    p_cols = table.sum(axis=0) / n
    h_rows = float(-(p_rows * np.log(p_rows, where=p_rows > 0, out=np.zeros_like(p_rows))).sum())
    h_cols = float(-(p_cols * np.log(p_cols, where=p_cols > 0, out=np.zeros_like(p_cols))).sum())
    if h_rows == 0.0 and h_cols == 0.0:
        return 1.0
    if h_rows == 0.0 or h_cols == 0.0:
        return 0.0
    o = table / n
    outer = np.outer(p_rows, p_cols)
    nz = table > 0
    mi = float((o[nz] * (np.log(o[nz]) - np.log(outer[nz]))).sum())
    return float(min(max(mi / np.sqrt(h_rows * h_cols), 0.0), 1.0))
