import numpy as np
import pytest
from scipy import stats
from scipy.special import softmax

from core.errors import TopologyError
from core.likelihood import ReadCounts
from engine.registry import MODELS
from mcmc import kernels
from mcmc.kernels import (
    sample_log_categorical,
    update_pi,
    update_Z,
    update_Z_entry,
    update_Z_row_tree,
    z_column_log_conditional,
)
from model.base import ModelState


def test_sample_log_categorical_frequencies(rng):
    p = np.array([0.1, 0.6, 0.3])
    draws = sample_log_categorical(np.tile(np.log(p), (20000, 1)), rng)
    freq = np.bincount(draws, minlength=3) / draws.size
    np.testing.assert_allclose(freq, p, atol=0.015)


def test_sample_log_categorical_handles_minus_infinity(rng):
    draws = sample_log_categorical(np.tile([-np.inf, 0.0, -np.inf], (100, 1)), rng)
    assert (draws == 1).all()


def test_sweep_reports_acceptance_counts(small_counts, rng):
    model = MODELS.build({"type": "flat"})
    state = model.sample_prior(small_counts.T, small_counts.K, 2, rng)
    stats = model.sweep(state, small_counts, rng)
    assert set(stats) == {"theta", "rho_star"}
    accepted, proposed = stats["theta"]
    assert 0 <= accepted <= proposed == small_counts.T * 3


def test_genotype_update_recovers_truth(small_truth, rng):
    counts, truth = small_truth
    model = MODELS.build({"type": "flat"})
    state = model.sample_prior(counts.T, counts.K, truth.C, rng)
    state.log_theta = np.log(truth.w)
    state.log_rho_star = np.log(truth.rho)
    state.pi = np.full((truth.C, 10), 0.1)
    for _ in range(5):
        update_Z(model, state, counts, rng)
    np.testing.assert_array_equal(state.Z, truth.Z)


def test_point_mass_pi_forces_the_code(small_counts, rng):
    model = MODELS.build({"type": "flat"})
    state = model.sample_prior(small_counts.T, small_counts.K, 2, rng)
    state.pi[1] = np.eye(10)[6]
    for k in range(small_counts.K):
        assert update_Z_entry(model, state, small_counts, k, 1, rng) == 6
    assert (state.Z[:, 1] == 6).all()


def test_entry_without_reads_follows_pi(small_counts, rng):
    model = MODELS.build({"type": "flat"})
    state = model.sample_prior(small_counts.T, small_counts.K, 2, rng)
    n = small_counts.n.copy()
    n[:, 3] = 0
    logp = z_column_log_conditional(model, state, ReadCounts(n), 0, rows=3)
    np.testing.assert_allclose(softmax(logp[0]), state.pi[0], rtol=1e-9, atol=1e-15)


def _pooled_chisquare(observed, expected, min_expected=5.0):
    small = expected < min_expected
    if small.any():
        observed = np.r_[observed[~small], observed[small].sum()]
        expected = np.r_[expected[~small], expected[small].sum()]
    return stats.chisquare(observed, expected)


def test_entry_draws_match_enumeration(rng):
    model = MODELS.build({"type": "flat"})
    state = model.sample_prior(1, 1, 1, rng)
    state.log_theta = np.log([[0.3, 0.7]])
    state.pi = np.full((1, 10), 0.1)
    counts = ReadCounts(np.array([[[3.0, 1.0, 0.0, 2.0, 1.0, 0.0, 1.0, 0.0]]]))

    masses = []
    for q in range(10):
        state.Z[0, 0] = q
        masses.append(model.log_likelihood(state, counts) + np.log(state.pi[0, q]))
    exact = softmax(masses)
    np.testing.assert_allclose(softmax(z_column_log_conditional(model, state, counts, 0)[0]), exact)

    draws = np.array([update_Z_entry(model, state, counts, 0, 0, rng) for _ in range(20000)])
    observed = np.bincount(draws, minlength=10)
    assert _pooled_chisquare(observed, exact * draws.size).pvalue > 0.01


def test_update_pi_conjugate_mean(rng):
    # alpha / C = 1 and two of three pairs at the first code: Be(3, 2)
    model = MODELS.build({"type": "flat", "hyper": {"alpha": 2.0}})
    state = model.sample_prior(1, 3, 2, rng)
    state.Z[:, 0] = [0, 0, 4]
    draws = []
    for _ in range(20000):
        update_pi(model, state, rng)
        draws.append(state.pi[0, 0])
    draws = np.array(draws)
    se = draws.std() / np.sqrt(draws.size)
    assert abs(draws.mean() - 0.6) < 3 * se
    assert stats.kstest(draws, "beta", args=(3.0, 2.0)).pvalue > 0.01


def test_update_pi_rows_sum_to_one(rng):
    # a tiny gamma pushes most of the rest below the clip
    model = MODELS.build({"type": "flat", "hyper": {"gamma": 0.01}})
    state = model.sample_prior(1, 5, 3, rng)
    for _ in range(50):
        update_pi(model, state, rng)
        np.testing.assert_allclose(state.pi.sum(axis=1), 1.0, rtol=0, atol=1e-14)


def test_tree_row_update_rejects_empty_support(rng, monkeypatch):
    model = MODELS.build({"type": "tree"})
    counts = ReadCounts(np.ones((2, 4, 8)))
    state = model.sample_prior(2, 4, ((0, 1), 2), rng)
    monkeypatch.setattr(
        kernels, "row_log_prior", lambda *args, **kwargs: (np.zeros((1, 2), int), np.array([-np.inf]))
    )
    with pytest.raises(TopologyError, match="Row 1"):
        update_Z_row_tree(model, state, counts, 1, rng)


def test_tree_row_update_stays_in_support(rng):
    model = MODELS.build({"type": "tree"})
    counts = ReadCounts(rng.integers(0, 20, size=(2, 6, 8)).astype(float))
    state = model.sample_prior(2, 6, ((0, 1, 1), 3), rng)
    for k in range(6):
        update_Z_row_tree(model, state, counts, k, rng)
    assert np.isfinite(model.log_prior(state))


def _zero_data_chain(model_type, T, K, C, sweeps, thin, seed, **build):
    model = MODELS.build({"type": model_type, **build})
    rng = np.random.default_rng(seed)
    counts = ReadCounts(np.zeros((T, K, 8)))
    state: ModelState = model.sample_prior(T, K, C, rng)
    kept = []
    for it in range(sweeps):
        model.sweep(state, counts, rng)
        if it % thin == 0:
            kept.append(state.copy())
    return model, kept


@pytest.mark.slow
def test_prior_recovery_on_zero_counts():
    model, kept = _zero_data_chain(
        "flat", T=1, K=3, C=2, sweeps=60000, thin=30, seed=3, theta_step=1.5, rho_step=1.5
    )
    h = model.hyper
    theta = np.exp([s.log_theta[0, 1] for s in kept])
    rho_star = np.exp([s.log_rho_star[5] for s in kept])
    pi1 = np.array([s.pi[0, 0] for s in kept])
    assert stats.kstest(theta, "gamma", args=(h.d,)).pvalue > 0.01
    assert stats.kstest(rho_star, "gamma", args=(2 * h.d1,)).pvalue > 0.01
    assert stats.kstest(pi1, "beta", args=(1.0, h.alpha / 2)).pvalue > 0.01
