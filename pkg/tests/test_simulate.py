import numpy as np
import pytest

from core.errors import ConfigError, DimensionError
from core.tree import log_prior_Z_given_tree
from engine.registry import PRESETS
from simulate.generator import (
    SimSpec,
    block_design,
    class_shares,
    dirichlet_weights,
    empirical_rates_check,
    generate,
)
from simulate.presets import SIM1_BLOCKS, TREE_SIM2_TOPOLOGY


def _preset(name, **args):
    return PRESETS.build({"type": name, **args})


def test_sim1_block_design():
    Z = block_design(40, 2, SIM1_BLOCKS)
    np.testing.assert_array_equal(Z[:10, 0], 1)
    np.testing.assert_array_equal(Z[10:30, 0], 4)
    np.testing.assert_array_equal(Z[30:, 0], 1)
    np.testing.assert_array_equal(Z[:10, 1], 4)
    np.testing.assert_array_equal(Z[10:30, 1], 6)
    np.testing.assert_array_equal(Z[30:, 1], 1)


def test_block_design_rescales_rows():
    Z = block_design(20, 2, SIM1_BLOCKS, block_K=40)
    np.testing.assert_array_equal(Z[5:15, 0], 4)
    np.testing.assert_array_equal(Z[:5, 1], 4)
    with pytest.raises(ConfigError):
        block_design(10, 2, [(1, 11, 1, 4)])
    with pytest.raises(ConfigError):
        block_design(10, 2, [(1, 5, 3, 4)])


def test_class_shares():
    v = class_shares(0.3, 2, 3)
    assert v.shape == (2, 3, 3)
    np.testing.assert_allclose(v[0, 0], [0.4, 0.3, 0.3])
    with pytest.raises(ConfigError):
        class_shares(0.5, 1, 1)


def test_dirichlet_weights_rows(rng):
    w = dirichlet_weights(5, (20, 10, 5), 0.01, rng)
    assert w.shape == (5, 4)
    np.testing.assert_allclose(w.sum(1), 1.0)
    assert (w[:, 0] < 0.05).all()


def test_sim1_truth():
    counts, truth = generate(_preset("sim1", seed=1))
    assert counts.n.shape == (1, 40, 8)
    assert ((counts.N >= 400) & (counts.N <= 600)).all()
    np.testing.assert_allclose(truth.w, [[1e-7, 0.8, 0.2]])
    assert truth.Z.min() == 0 and truth.Z.max() == 5
    assert truth.k_pairs == 40
    assert empirical_rates_check(counts, truth).ok


def test_generation_is_reproducible():
    a, _ = generate(_preset("sim3", seed=4, K=40))
    b, _ = generate(_preset("sim3", seed=4, K=40))
    c, _ = generate(_preset("sim3", seed=5, K=40))
    np.testing.assert_array_equal(a.n, b.n)
    assert not np.array_equal(a.n, c.n)


def test_sim3_rates_match_truth():
    counts, truth = generate(_preset("sim3", seed=2))
    assert counts.n.shape == (6, 100, 8)
    assert truth.C == 3
    report = empirical_rates_check(counts, truth)
    assert report.ok, report


def test_purity_preset_moves_first_subclone_to_normal():
    counts, truth = generate(_preset("sim3_purity", seed=2))
    assert truth.C == 2
    assert truth.w.shape == (6, 3)
    np.testing.assert_allclose(truth.w.sum(1) + truth.w_star, 1.0)
    assert empirical_rates_check(counts, truth).ok


def test_snv_preset_keeps_locus_one_only():
    counts, truth = generate(_preset("sim3_snv", seed=2))
    assert truth.k_pairs == 50
    assert counts.pair_ids[50] == "snv1"
    np.testing.assert_array_equal(counts.n[:, 50:, :6], 0)
    assert (counts.n[:, 50:, 6:].sum(-1) > 0).all()
    assert empirical_rates_check(counts, truth).ok
    pairs, fractions = truth.split()
    assert pairs.shape == (50, 3)
    assert set(np.unique(fractions)) <= {0.0, 0.5, 1.0}


def test_tree_preset_genotypes_are_fixed_across_data_seeds():
    _, first = generate(_preset("tree_sim2", seed=1, K=50))
    counts, second = generate(_preset("tree_sim2", seed=2, K=50))
    np.testing.assert_array_equal(first.Z, second.Z)
    assert not np.array_equal(first.w, second.w)
    assert second.tree == TREE_SIM2_TOPOLOGY
    assert counts.n.shape == (8, 50, 8)
    assert np.isfinite(log_prior_Z_given_tree(second.Z, second.tree, 2.0 * 50 / 5))
    assert empirical_rates_check(counts, second).ok


def test_tree_sim1_depths():
    counts, _ = generate(_preset("tree_sim1", depth=2000, seed=3))
    assert ((counts.N >= 1900) & (counts.N <= 2100)).all()
    with pytest.raises(ConfigError):
        _preset("tree_sim1", depth=1000)


def test_lung_synthetic_layout():
    counts, truth = generate(_preset("lung_synthetic", seed=0))
    assert counts.n.shape == (4, 138, 8)
    assert truth.k_pairs == 69
    assert truth.w_star is not None
    assert truth.C == 3


@pytest.mark.parametrize(
    "changes",
    [
        {"blocks": None},
        {"Z": np.ones((10, 2), dtype=int)},
        {"w": None},
        {"w": np.array([0.1, 0.9, 0.0]), "w_concentration": (1, 1)},
        {"v": 0.5},
        {"v": [0.3, 0.3]},
        {"snv_start": 1},
        {"n_range": (0, 10)},
        {"tree": (0, 1), "blocks": None, "purity": True},
    ],
)
def test_spec_validation(changes):
    values = dict(T=1, K=10, C=2, blocks=[(1, 5, 1, 4)], w=np.array([0.1, 0.5, 0.4]))
    values.update(changes)
    with pytest.raises((ConfigError, DimensionError)):
        SimSpec(**values).validate()


def test_unknown_preset_args_are_ignored():
    spec = _preset("sim1", seed=1, unused=3)
    assert spec.K == 40
