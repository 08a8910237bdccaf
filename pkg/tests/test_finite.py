import itertools

import numpy as np
import pytest

from wsbm import (
    BlockParameters,
    ChainConfig,
    CommunityAssignment,
    NIGPrior,
    assignment_probs,
    make_rng,
    run_wsbm,
    sample_tau,
    sample_theta,
    sample_z_finite,
)
from wsbm.errors import InputError
from wsbm.finite import FiniteMixtureWeights
from wsbm.gibbs import assignment_log_probs, sweep_assignments

from oracles import node_label_logprobs, sweep_outcome_logprob


def planted_instance(rng, sizes=(5, 5), mus=(-3.0, 3.0), sig2=0.01):
    k = len(sizes)
    labels = np.repeat(np.arange(1, k + 1), sizes)
    n = labels.size
    mu = np.zeros((k, k))
    np.fill_diagonal(mu, mus)
    sigma2 = np.full((k, k), sig2)
    W = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    l0, q0 = labels[iu[0]] - 1, labels[iu[1]] - 1
    W[iu] = mu[l0, q0] + np.sqrt(sigma2[l0, q0]) * rng.standard_normal(iu[0].size)
    W += W.T
    return W, CommunityAssignment(labels, k_max=k), BlockParameters(mu, sigma2)


class TestSampleTau:
    def test_k1_always_one(self):
        rng = make_rng(0)
        z = CommunityAssignment([1, 1, 1])
        for _ in range(10):
            assert sample_tau(z, np.array([2.0]), rng).tau.tolist() == [1.0]

    def test_moment_formula(self):
        # E[tau_l] = (n_l + eta_l) / sum(n_q + eta_q)
        rng = make_rng(1)
        z = CommunityAssignment([1, 1, 1, 2, 3, 3], k_max=3)
        eta = np.array([1.0, 2.0, 0.5])
        draws = np.array([sample_tau(z, eta, rng).tau for _ in range(100_000)])
        post = z.counts + eta
        expect = post / post.sum()
        se = np.sqrt(expect * (1 - expect) / post.sum() / draws.shape[0]) * 3.5
        assert np.all(np.abs(draws.mean(axis=0) - expect) < np.maximum(se, 5e-4))

    def test_symmetric_prior_uniform_means(self):
        rng = make_rng(2)
        z = CommunityAssignment([1], k_max=4)
        z.counts[:] = 0  # conceptual n = 0: prior draws
        draws = np.array([sample_tau(z, np.ones(4), rng).tau for _ in range(100_000)])
        assert np.all(np.abs(draws.mean(axis=0) - 0.25) < 0.005)

    def test_simplex_output(self):
        rng = make_rng(3)
        z = CommunityAssignment([1, 2, 2, 3], k_max=3)
        tau = sample_tau(z, np.array([1.0, 1.0, 1.0]), rng).tau
        assert tau.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(tau >= 0)

    def test_bad_eta_rejected(self):
        rng = make_rng(4)
        z = CommunityAssignment([1, 2], k_max=2)
        with pytest.raises(InputError):
            sample_tau(z, np.array([1.0]), rng)
        with pytest.raises(InputError):
            sample_tau(z, np.array([1.0, -1.0]), rng)


class TestSampleZ:
    def test_degenerate_tau_forces_label_one(self):
        rng = make_rng(5)
        W, z_true, theta = planted_instance(rng)
        weights = FiniteMixtureWeights(tau=np.array([1.0, 0.0]), eta=np.ones(2))
        z0 = CommunityAssignment(rng.integers(1, 3, 10), k_max=2)
        out = sample_z_finite(W, theta, weights, z0, rng)
        assert np.all(out.labels == 1)

    def test_planted_separation_recovered_in_one_sweep(self):
        rng = make_rng(6)
        W, z_true, theta = planted_instance(rng)
        probs = assignment_probs(W, z_true, theta, np.full(2, 0.5))
        planted = probs[np.arange(10), z_true.labels - 1]
        assert np.all(planted > 0.999)
        z0 = CommunityAssignment(rng.integers(1, 3, 10), k_max=2)
        weights = FiniteMixtureWeights(tau=np.full(2, 0.5), eta=np.ones(2))
        out = sample_z_finite(W, theta, weights, z0, rng)
        from wsbm import ari

        assert ari(z_true, out) == 1.0

    def test_probability_rows_normalized(self):
        rng = make_rng(7)
        W, z_true, theta = planted_instance(rng, sizes=(4, 3), sig2=2.0)
        probs = assignment_probs(W, z_true, theta, np.array([0.3, 0.7]))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)

    def test_kernel_matches_vectorized_reference(self):
        # the scan's per-node computation must agree with the all-node form
        rng = make_rng(8)
        W, z_true, theta = planted_instance(rng, sizes=(4, 4), sig2=1.5)
        labels0 = z_true.labels - 1
        with np.errstate(divide="ignore"):
            lw = np.log(np.array([0.4, 0.6]))
        ref = assignment_log_probs(W, labels0, lw, theta.mu, theta.sigma2)
        for j in range(8):
            oracle = node_label_logprobs(W, labels0, np.array([0.4, 0.6]), theta.mu, theta.sigma2, j)
            ours = ref[j] - ref[j].max()
            np.testing.assert_allclose(ours, oracle - oracle.max(), atol=1e-8)

    def test_sweep_transition_law_matches_oracle(self):
        # empirical distribution of one-sweep outcomes vs the sequential
        # product of categorical probabilities, enumerated exhaustively
        rng = make_rng(9)
        n, k = 5, 2
        W, _, theta = planted_instance(rng, sizes=(3, 2), mus=(-1.0, 1.0), sig2=1.0)
        weights = np.array([0.45, 0.55])
        z_init = np.array([0, 1, 0, 1, 0])
        m = 40_000
        counts = {}
        for rep in range(m):
            labels0 = z_init.copy()
            cnts = np.bincount(labels0, minlength=k).astype(float)
            with np.errstate(divide="ignore"):
                sweep_assignments(W, W * W, labels0, cnts, np.log(weights), theta.mu, theta.sigma2, make_rng(100 + rep))
            counts[tuple(labels0)] = counts.get(tuple(labels0), 0) + 1
        for z_final in itertools.product(range(k), repeat=n):
            p = np.exp(sweep_outcome_logprob(W, z_init, np.array(z_final), weights, theta.mu, theta.sigma2))
            emp = counts.get(z_final, 0) / m
            tol = 4.5 * np.sqrt(max(p * (1 - p), 1e-9) / m) + 1e-4
            assert abs(emp - p) < tol, (z_final, emp, p)

    def test_label_permutation_equivariance_of_probabilities(self):
        rng = make_rng(10)
        W, z_true, theta = planted_instance(rng, sizes=(3, 3, 2), mus=(-2.0, 0.0, 2.0), sig2=1.0)
        weights = np.array([0.2, 0.5, 0.3])
        perm = np.array([2, 0, 1])  # new label of old community l is perm[l]
        probs = assignment_probs(W, z_true, theta, weights)
        labels_p = perm[z_true.labels - 1] + 1
        theta_p = BlockParameters(theta.mu[np.ix_(np.argsort(perm), np.argsort(perm))],
                                  theta.sigma2[np.ix_(np.argsort(perm), np.argsort(perm))])
        probs_p = assignment_probs(W, CommunityAssignment(labels_p, k_max=3), theta_p, weights[np.argsort(perm)])
        np.testing.assert_allclose(probs_p, probs[:, np.argsort(perm)], atol=1e-10)


class TestSampleTheta:
    def test_empty_block_draws_from_prior(self):
        rng = make_rng(11)
        W = np.zeros((4, 4))
        z = CommunityAssignment([1, 1, 1, 1], k_max=2)
        prior = NIGPrior(mu0=5.0, n0=4.0, nu0=30.0, ss0=3.0)
        draws = np.array([sample_theta(W, z, prior, make_rng(500 + i)).sigma2[1, 1] for i in range(4000)])
        # prior IG(15, 1.5): mean 1.5/14
        assert draws.mean() == pytest.approx(1.5 / 14.0, rel=0.05)

    def test_posterior_contraction_on_large_block(self):
        rng = make_rng(12)
        n = 142  # C(142, 2) = 10011 edges
        W = np.zeros((n, n))
        iu = np.triu_indices(n, 1)
        W[iu] = 2.0 + np.sqrt(0.5) * rng.standard_normal(iu[0].size)
        W += W.T
        z = CommunityAssignment(np.ones(n, dtype=int))
        hits_mu = hits_sig = 0
        m = 1000
        for i in range(m):
            theta = sample_theta(W, z, NIGPrior(), make_rng(900 + i))
            hits_mu += abs(theta.mu[0, 0] - 2.0) < 0.05
            hits_sig += abs(theta.sigma2[0, 0] - 0.5) < 0.05
        assert hits_mu / m >= 0.99
        assert hits_sig / m >= 0.99

    def test_symmetric_output(self):
        rng = make_rng(13)
        W, z_true, _ = planted_instance(rng, sizes=(4, 4), sig2=1.0)
        theta = sample_theta(W, z_true, NIGPrior(), rng)
        assert np.array_equal(theta.mu, theta.mu.T)
        assert np.array_equal(theta.sigma2, theta.sigma2.T)
        assert np.all(theta.sigma2 > 0)


class TestRunWSBM:
    def test_determinism_and_seed_sensitivity(self):
        rng = make_rng(14)
        W, _, _ = planted_instance(rng, sizes=(6, 6), sig2=1.0)
        cfg = ChainConfig(iterations=60, burn_in=20, seed=42, k=2)
        t1 = run_wsbm(W, cfg)
        t2 = run_wsbm(W, cfg)
        assert np.array_equal(t1.z_draws, t2.z_draws)
        assert np.array_equal(t1.mu_draws, t2.mu_draws)
        assert np.array_equal(t1.weight_draws, t2.weight_draws)
        t3 = run_wsbm(W, ChainConfig(iterations=60, burn_in=20, seed=43, k=2))
        assert not np.array_equal(t1.z_draws, t3.z_draws)

    def test_requires_k(self):
        W = np.zeros((4, 4))
        with pytest.raises(InputError):
            run_wsbm(W, ChainConfig(iterations=10, burn_in=0, seed=0))

    def test_per_sweep_validity_of_stored_state(self):
        rng = make_rng(15)
        W, _, _ = planted_instance(rng, sizes=(5, 5), sig2=1.0)
        trace = run_wsbm(W, ChainConfig(iterations=40, burn_in=0, seed=7, k=3))
        for b in range(trace.n_draws):
            z = trace.assignment(b)
            assert z.counts.sum() == 10
            assert np.array_equal(z.counts, np.bincount(z.labels - 1, minlength=3))
            tau = trace.weight_draws[b]
            assert tau.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(trace.sigma2_draws[b] > 0)
            assert np.array_equal(trace.mu_draws[b], trace.mu_draws[b].T)
            assert np.isfinite(trace.loglik_draws[b])

    def test_constant_weights_stay_valid(self):
        n = 9
        W = np.full((n, n), 0.7)
        np.fill_diagonal(W, 0.0)
        trace = run_wsbm(W, ChainConfig(iterations=200, burn_in=100, seed=3, k=3))
        occupied = trace.k_draws >= 1
        assert occupied.all()
        # mu draws of occupied blocks concentrate near the constant
        last = trace.assignment(trace.n_draws - 1)
        lab = last.labels[0] - 1
        assert abs(trace.mu_draws[-1][lab, lab] - 0.7) < 0.2

    def test_scaled_eta_recovers_planted_labels(self):
        rng = make_rng(16)
        W, z_true, _ = planted_instance(rng, sizes=(8, 8), mus=(-2.0, 2.0), sig2=0.5)
        trace = run_wsbm(W, ChainConfig(iterations=300, burn_in=150, seed=1, k=2), eta=np.full(2, 200.0))
        from wsbm import ari, estimate_map

        assert ari(z_true, estimate_map(trace)) == 1.0

    def test_prior_only_gibbs_matches_dirichlet_moments(self):
        # constant block parameters cancel out of the label posterior, so
        # the chain z -> tau samples the Dirichlet-multinomial prior and
        # tau is marginally Dir(eta)
        n, k = 10, 3
        W = np.zeros((n, n))
        eta = np.array([2.0, 1.0, 3.0])
        rng = make_rng(17)
        labels0 = rng.integers(0, k, n)
        counts = np.bincount(labels0, minlength=k).astype(float)
        mu = np.zeros((k, k))
        sigma2 = np.ones((k, k))
        tau = np.full(k, 1.0 / k)
        sweeps = 10_000
        taus = np.empty((sweeps, k))
        for t in range(sweeps):
            with np.errstate(divide="ignore"):
                lw = np.log(tau)
            sweep_assignments(W, W * W, labels0, counts, lw, mu, sigma2, rng)
            tau = rng.dirichlet(counts + eta)
            taus[t] = tau
        mean = taus.mean(axis=0)
        expect = eta / eta.sum()
        # autocorrelation-adjusted Monte Carlo band
        rho = np.corrcoef(taus[:-1, 0], taus[1:, 0])[0, 1]
        infl = np.sqrt((1 + rho) / max(1e-9, 1 - rho))
        se = np.sqrt(expect * (1 - expect) / (eta.sum() + 1) / sweeps) * infl
        assert np.all(np.abs(mean - expect) < 4 * se + 0.01)
