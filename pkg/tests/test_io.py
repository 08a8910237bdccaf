import json

import numpy as np
import pytest

from wsbm import ChainConfig, make_rng, run_wsbm, run_wsibm
from wsbm.errors import InputError
from wsbm.io import (
    fmt,
    read_abundance_csv,
    read_labels_csv,
    read_trace_jsonl,
    read_weights_csv,
    write_labels_csv,
    write_trace_jsonl,
    write_weights_csv,
)
from wsbm.preprocess import WeightMatrix

from test_finite import planted_instance


def test_fmt_17_digits_round_trip():
    rng = np.random.default_rng(0)
    for x in rng.normal(0, 100, 200):
        assert float(fmt(x)) == x
    assert fmt(0.1) == "0.10000000000000001"


def test_weights_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    W = rng.normal(0, 1, (5, 5))
    W = np.triu(W, 1)
    W = W + W.T
    wm = WeightMatrix(W, [f"t{j}" for j in range(5)])
    path = tmp_path / "w.csv"
    write_weights_csv(path, wm)
    back = read_weights_csv(path)
    assert back.taxon_ids == wm.taxon_ids
    assert np.array_equal(back.values, wm.values)  # lossless


def test_weights_bad_shape_rejected(tmp_path):
    path = tmp_path / "w.csv"
    path.write_text("a,b\n0,1\n")
    with pytest.raises(InputError):
        read_weights_csv(path)


def test_labels_round_trip(tmp_path):
    path = tmp_path / "z.csv"
    write_labels_csv(path, ["n1", "n2", "n3"], np.array([2, 1, 2]))
    ids, labels = read_labels_csv(path)
    assert ids == ["n1", "n2", "n3"]
    assert labels.tolist() == [2, 1, 2]


def test_labels_header_enforced(tmp_path):
    path = tmp_path / "z.csv"
    path.write_text("id,cluster\nn1,1\n")
    with pytest.raises(InputError):
        read_labels_csv(path)


def test_abundance_relative_accepted(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("sample,t1,t2\ns1,0.25,0.75\ns2,0.5,0.5\n")
    a = read_abundance_csv(path)
    assert not a.normalized_from_counts
    assert a.taxon_ids == ["t1", "t2"]


def test_abundance_counts_normalized(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("sample,t1,t2\ns1,3,1\ns2,0,5\n")
    a = read_abundance_csv(path)
    assert a.normalized_from_counts
    np.testing.assert_allclose(a.values, [[0.75, 0.25], [0.0, 1.0]])


def test_abundance_negative_rejected(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("sample,t1,t2\ns1,-1,2\n")
    with pytest.raises(InputError):
        read_abundance_csv(path)


def test_abundance_non_numeric_rejected(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("sample,t1,t2\ns1,x,2\n")
    with pytest.raises(InputError, match="non-numeric"):
        read_abundance_csv(path)


def test_trace_round_trip_wsibm(tmp_path):
    rng = make_rng(2)
    W, _, _ = planted_instance(rng, sizes=(4, 4), sig2=1.0)
    trace = run_wsibm(W, ChainConfig(iterations=30, burn_in=10, seed=5), alpha=0.5, k_max=4)
    path = tmp_path / "trace.jsonl"
    write_trace_jsonl(path, trace)
    back = read_trace_jsonl(path)
    assert np.array_equal(back.z_draws, trace.z_draws)
    assert np.array_equal(back.mu_draws, trace.mu_draws)
    assert np.array_equal(back.sigma2_draws, trace.sigma2_draws)
    assert np.array_equal(back.weight_draws, trace.weight_draws)
    assert np.array_equal(back.loglik_draws, trace.loglik_draws)
    assert np.array_equal(back.k_draws, trace.k_draws)
    assert back.meta["model"] == "wsibm"
    assert back.meta["alpha"] == 0.5
    header = json.loads(path.read_text().splitlines()[0])
    assert header["format_version"] == 1
    assert header["kind"] == "chain-trace"


def test_trace_round_trip_wsbm(tmp_path):
    rng = make_rng(3)
    W, _, _ = planted_instance(rng, sizes=(3, 3), sig2=1.0)
    trace = run_wsbm(W, ChainConfig(iterations=20, burn_in=5, seed=1, k=2), eta=np.array([1.0, 2.0]))
    path = tmp_path / "trace.jsonl"
    write_trace_jsonl(path, trace)
    back = read_trace_jsonl(path)
    assert back.meta["eta"] == [1.0, 2.0]
    assert np.array_equal(back.z_draws, trace.z_draws)


def test_trace_rejects_other_files(tmp_path):
    path = tmp_path / "nope.jsonl"
    path.write_text('{"kind": "something-else"}\n')
    with pytest.raises(InputError):
        read_trace_jsonl(path)
    path.write_text('{"kind": "chain-trace", "format_version": 99}\n{"t": 1}\n')
    with pytest.raises(InputError, match="format_version"):
        read_trace_jsonl(path)
