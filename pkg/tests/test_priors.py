import itertools

import numpy as np
import pytest
from scipy import stats

from core.errors import ConfigError
from core.priors import (
    Hyperparams,
    TreeHyper,
    beta_dirichlet_logpdf,
    dirichlet_logpdf,
    floor_background,
    log_gamma_pdf,
    log_prior_C,
    log_prior_rho,
    log_prior_w_purity,
    log_prior_Z_given_pi,
    log_rho_star_to_rho,
    log_theta_to_w,
    rho_shapes,
    sample_beta_dirichlet,
    sample_log_gamma,
    sample_rho,
    sample_w,
    theta_to_w,
    weight_shapes,
)


def test_geometric_forms_share_ratios():
    for C in range(1, 8):
        diff = log_prior_C(C + 1, 0.4) - log_prior_C(C, 0.4)
        assert diff == pytest.approx(log_prior_C(C + 1, 0.4, "shifted") - log_prior_C(C, 0.4, "shifted"))


def test_geometric_totals():
    Cs = range(1, 400)
    assert sum(np.exp(log_prior_C(C, 0.4)) for C in Cs) == pytest.approx(0.6)
    assert sum(np.exp(log_prior_C(C, 0.4, "shifted")) for C in Cs) == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        log_prior_C(2, 0.4, "poisson")


def test_dirichlet_logpdf_matches_scipy():
    x = np.array([0.2, 0.5, 0.3])
    a = np.array([0.03, 0.5, 0.5])
    assert dirichlet_logpdf(x, a) == pytest.approx(stats.dirichlet.logpdf(x, a))
    assert dirichlet_logpdf(np.array([0.0, 0.5, 0.5]), a) == -np.inf


def test_log_gamma_pdf_is_density_of_x():
    x = 1.7
    assert log_gamma_pdf(np.log(x), 2.5) == pytest.approx(stats.gamma.logpdf(x, 2.5))


def test_sample_log_gamma_small_shape(rng):
    draws = sample_log_gamma(0.01, rng, size=20000)
    assert np.isfinite(draws).all()
    # most draws underflow in linear space, the log scale keeps them
    assert (draws < -700).any()


def test_sample_log_gamma_distribution(rng):
    x = np.exp(sample_log_gamma(0.5, rng, size=5000))
    assert stats.kstest(x, "gamma", args=(0.5,)).pvalue > 0.01


def test_beta_dirichlet_coordinates(rng):
    pi = sample_beta_dirichlet(4.0, 3, 2.0, rng)
    assert pi.sum() == pytest.approx(1.0)
    split = beta_dirichlet_logpdf(pi, 4.0, 3, 2.0, coords="split")
    simplex = beta_dirichlet_logpdf(pi, 4.0, 3, 2.0, coords="simplex")
    assert simplex == pytest.approx(split - 8 * np.log1p(-pi[0]))
    assert beta_dirichlet_logpdf(np.r_[1.0, np.zeros(9)], 4.0, 3, 2.0) == -np.inf


def test_floor_background_keeps_sum():
    w = floor_background(np.array([[0.0, 0.7, 0.3], [0.1, 0.6, 0.3]]))
    assert w[0, 0] == 1e-12
    np.testing.assert_allclose(w.sum(1), 1.0)
    np.testing.assert_array_equal(w[1], [0.1, 0.6, 0.3])


def test_log_rho_star_to_rho_groups():
    rho = log_rho_star_to_rho(np.array([0.0, 1.0, 2.0, -800.0, 0.5, 0.5, 3.0, -1.0]))
    for group in (slice(0, 4), slice(4, 6), slice(6, 8)):
        assert rho[group].sum() == pytest.approx(1.0)
    assert rho[3] == 1e-12
    np.testing.assert_allclose(rho[4:6], [0.5, 0.5])


def test_log_theta_to_w_is_stable():
    w = log_theta_to_w(np.array([[-1000.0, -1001.0, -999.0]]))
    assert np.isfinite(w).all()
    assert w.sum() == pytest.approx(1.0)


def test_shapes():
    np.testing.assert_array_equal(weight_shapes(3, 0.03, 0.5), [0.03, 0.5, 0.5, 0.5])
    np.testing.assert_array_equal(rho_shapes(1.0), [1, 1, 1, 1, 2, 2, 2, 2])


def test_log_prior_rho_and_purity_are_finite():
    rho = np.array([0.4, 0.3, 0.2, 0.1, 0.5, 0.5, 0.9, 0.1])
    assert np.isfinite(log_prior_rho(rho, 1.0))
    w_tilde = np.array([[0.1, 0.6, 0.3]])
    assert np.isfinite(log_prior_w_purity([0.3], w_tilde, 1.0, 1.0, 0.03, 0.5))


@pytest.mark.parametrize(
    "values",
    [{"r": 1.2}, {"alpha": 0.0}, {"c_min": 0}, {"c_min": 5, "c_max": 3}, {"b": 1.0}, {"geometric_form": "odd"}],
)
def test_hyperparams_validation(values):
    with pytest.raises(ConfigError):
        Hyperparams(**values).validate()


def test_tree_hyper_defaults():
    hyper = TreeHyper().validate()
    np.testing.assert_allclose(hyper.normal_shapes(3), [0.5, 1.03])
    assert hyper.lam_for(100, 4) == 50.0
    assert TreeHyper(lam=3.0).lam_for(100, 4) == 3.0
    with pytest.raises(ConfigError):
        TreeHyper(alpha=1.0).validate()


def _within_se(draws, expected, width=3.0):
    draws = np.asarray(draws)
    se = draws.std(axis=0) / np.sqrt(draws.shape[0])
    return np.all(np.abs(draws.mean(axis=0) - expected) < width * se)


def test_beta_dirichlet_sampler_means(rng):
    draws = np.array([sample_beta_dirichlet(4.0, 4, 2.0, rng) for _ in range(20000)])
    # E[pi_1] = 1 / (1 + alpha / C)
    assert _within_se(draws[:, 0], 0.5)
    tilde = draws[:, 1:] / (1.0 - draws[:, :1])
    assert _within_se(tilde, np.full(9, 1.0 / 9.0))


def test_weight_sampler_mean(rng):
    w = sample_w(20000, 2, 0.03, 0.5, rng)
    assert w.shape == (20000, 3)
    # d0 / (d0 + C d)
    assert _within_se(w, [0.03 / 1.03, 0.5 / 1.03, 0.5 / 1.03])


def test_noise_sampler_mean(rng):
    rho = np.array([sample_rho(1.0, rng) for _ in range(20000)])
    assert _within_se(rho, [0.25] * 4 + [0.5] * 4)


def _importance_ok(log_ratio, width=4.0):
    ratio = np.exp(log_ratio)
    se = ratio.std() / np.sqrt(ratio.size)
    return abs(ratio.mean() - 1.0) < width * se


def test_samplers_match_their_densities(rng):
    w = sample_w(20000, 2, 2.0, 2.0, rng)
    log_ratio = dirichlet_logpdf(w, [1.5, 2.5, 2.0]) - dirichlet_logpdf(w, weight_shapes(2, 2.0, 2.0))
    assert _importance_ok(log_ratio)

    pis = [sample_beta_dirichlet(4.0, 4, 2.0, rng) for _ in range(20000)]
    log_ratio = [
        beta_dirichlet_logpdf(pi, 3.0, 4, 2.5) - beta_dirichlet_logpdf(pi, 4.0, 4, 2.0) for pi in pis
    ]
    assert _importance_ok(np.array(log_ratio))

    rhos = [sample_rho(1.0, rng) for _ in range(20000)]
    log_ratio = [log_prior_rho(rho, 1.5) - log_prior_rho(rho, 1.0) for rho in rhos]
    assert _importance_ok(np.array(log_ratio))


def test_theta_to_w():
    np.testing.assert_allclose(theta_to_w([1.0, 1.0, 1.0]), [1 / 3, 1 / 3, 1 / 3], rtol=0, atol=1e-15)
    theta = np.array([[0.2, 1.5, 3.0]])
    np.testing.assert_allclose(theta_to_w(7.0 * theta), theta_to_w(theta))


def test_normalised_gammas_have_dirichlet_marginals(rng):
    shapes = np.array([0.5, 1.0, 2.0])
    w = theta_to_w(rng.gamma(shapes, size=(20000, 3)))
    for c, a in enumerate(shapes):
        assert stats.kstest(w[:, c], "beta", args=(a, shapes.sum() - a)).pvalue > 0.01


def test_z_prior_normalises_over_all_configurations(rng):
    pi = rng.dirichlet(np.ones(10))[None, :]
    total = sum(
        np.exp(log_prior_Z_given_pi(np.array([[a], [b]]), pi))
        for a, b in itertools.product(range(10), repeat=2)
    )
    assert total == pytest.approx(1.0, abs=1e-12)
    assert log_prior_Z_given_pi(np.array([[2]]), np.eye(10)[None, 2] * 0.8 + 0.02) == pytest.approx(
        np.log(0.82)
    )
