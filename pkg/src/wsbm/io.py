"""File formats: CSV matrices and labels, JSON summaries, JSON-lines traces.

All writers are byte-deterministic for fixed inputs: floats in CSV use
17 significant digits, JSON uses Python's shortest round-trip repr, and
no file carries timestamps.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import InputError
from .gibbs import ChainTrace
from .preprocess import RelativeAbundanceMatrix, WeightMatrix

__all__ = [
    "fmt",
    "write_json",
    "read_abundance_csv",
    "write_weights_csv",
    "read_weights_csv",
    "write_labels_csv",
    "read_labels_csv",
    "write_matrix_csv",
    "write_trace_jsonl",
    "read_trace_jsonl",
]

TRACE_FORMAT_VERSION = 1


def fmt(x: float) -> str:
    """Float to text at 17 significant digits (lossless round-trip)."""
    return format(float(x), ".17g")


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def read_abundance_csv(path) -> RelativeAbundanceMatrix:
    """Read an abundance table: header row of taxon ids, first column
    of sample ids, non-negative real cells.

    Rows that do not already sum to 1 are treated as raw counts and
    normalized.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or len(rows[0]) < 2:
        raise InputError(f"{path}: expected a header of taxon ids and at least one sample row")
    taxon_ids = [c.strip() for c in rows[0][1:]]
    sample_ids = []
    values = []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(taxon_ids) + 1:
            raise InputError(f"{path}: row {r} has {len(row)} cells, expected {len(taxon_ids) + 1}")
        sample_ids.append(row[0].strip())
        try:
            values.append([float(c) for c in row[1:]])
        except ValueError as exc:
            raise InputError(f"{path}: row {r} has a non-numeric cell ({exc})") from None
    values = np.asarray(values)
    row_sums = values.sum(axis=1)
    if np.allclose(row_sums, 1.0, rtol=0.0, atol=1e-9):
        return RelativeAbundanceMatrix(values, sample_ids, taxon_ids)
    return RelativeAbundanceMatrix.from_counts(values, sample_ids, taxon_ids)


def write_weights_csv(path, wm: WeightMatrix) -> None:
    """Header of taxon ids, then the n symmetric matrix rows."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(wm.taxon_ids)
        for row in wm.values:
            writer.writerow([fmt(x) for x in row])


def read_weights_csv(path) -> WeightMatrix:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty file")
    taxon_ids = [c.strip() for c in rows[0]]
    n = len(taxon_ids)
    if len(rows) != n + 1:
        raise InputError(f"{path}: expected {n + 1} rows for {n} taxa, found {len(rows)}")
    try:
        values = np.asarray([[float(c) for c in row] for row in rows[1:]])
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric matrix cell ({exc})") from None
    if values.shape != (n, n):
        raise InputError(f"{path}: matrix shape {values.shape} does not match header length {n}")
    return WeightMatrix(values, taxon_ids)


def write_labels_csv(path, node_ids, labels) -> None:
    labels = np.asarray(getattr(labels, "labels", labels))
    if len(node_ids) != labels.size:
        raise InputError("node id list does not match the label vector")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node", "label"])
        for node, lab in zip(node_ids, labels):
            writer.writerow([node, int(lab)])


def read_labels_csv(path):
    """Returns (node_ids, labels array)."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["node", "label"]:
        raise InputError(f"{path}: expected header 'node,label'")
    node_ids = [row[0] for row in rows[1:]]
    try:
        labels = np.asarray([int(row[1]) for row in rows[1:]], dtype=np.int64)
    except (IndexError, ValueError):
        raise InputError(f"{path}: malformed label rows") from None
    if labels.size == 0:
        raise InputError(f"{path}: no label rows")
    return node_ids, labels


def write_matrix_csv(path, header, matrix) -> None:
    """Generic labeled square matrix (used for the pairwise probability matrix)."""
    matrix = np.asarray(matrix, dtype=float)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in matrix:
            writer.writerow([fmt(x) for x in row])


def write_trace_jsonl(path, trace: ChainTrace) -> None:
    """One header line of run metadata, then one JSON object per stored draw."""
    header = {"format_version": TRACE_FORMAT_VERSION, "kind": "chain-trace"}
    header.update(trace.meta)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header) + "\n")
        burn_in = trace.meta.get("burn_in", 0)
        for b in range(trace.n_draws):
            rec = {
                "t": burn_in + b + 1,
                "z": trace.z_draws[b].tolist(),
                "k": int(trace.k_draws[b]),
                "loglik": float(trace.loglik_draws[b]),
                "weights": trace.weight_draws[b].tolist(),
                "mu": trace.mu_draws[b].tolist(),
                "sigma2": trace.sigma2_draws[b].tolist(),
            }
            fh.write(json.dumps(rec) + "\n")


def read_trace_jsonl(path) -> ChainTrace:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line:
            raise InputError(f"{path}: empty trace file")
        header = json.loads(header_line)
        if header.get("kind") != "chain-trace":
            raise InputError(f"{path}: not a chain-trace file")
        if header.get("format_version") != TRACE_FORMAT_VERSION:
            raise InputError(f"{path}: unsupported trace format_version {header.get('format_version')}")
        z, mu, sigma2, weights, loglik, ks = [], [], [], [], [], []
        for line in fh:
            rec = json.loads(line)
            z.append(rec["z"])
            mu.append(rec["mu"])
            sigma2.append(rec["sigma2"])
            weights.append(rec["weights"])
            loglik.append(rec["loglik"])
            ks.append(rec["k"])
    if not z:
        raise InputError(f"{path}: trace holds no draws")
    meta = {k: v for k, v in header.items() if k not in ("format_version", "kind")}
    return ChainTrace(
        z_draws=np.asarray(z, dtype=np.int32),
        mu_draws=np.asarray(mu),
        sigma2_draws=np.asarray(sigma2),
        weight_draws=np.asarray(weights),
        loglik_draws=np.asarray(loglik),
        k_draws=np.asarray(ks, dtype=np.int32),
        meta=meta,
    )
