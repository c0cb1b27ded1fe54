import numpy as np
import pytest

from core.errors import ConfigError
from core.likelihood import ReadCounts
from engine.registry import MODELS
from mcmc.tempering import TemperatureLadder, TemperedEnsemble
from mcmc.transdim import (
    CandidatePool,
    SplitData,
    TransdimStats,
    choose_b,
    format_key,
    split_counts,
    transdim_log_acceptance,
    transdim_step,
)


def test_split_parts_add_up(small_counts):
    split = split_counts(small_counts, 0.9)
    np.testing.assert_allclose(split.train.n, 0.9 * small_counts.n)
    np.testing.assert_allclose(split.train.n + split.test.n, small_counts.n, rtol=0, atol=1e-9)
    assert split.b == 0.9
    with pytest.raises(ConfigError):
        split_counts(small_counts, 1.0)


def test_choose_b_hits_test_target():
    counts = ReadCounts(np.full((4, 10, 8), 60.0))
    b = choose_b(counts, 160.0)
    assert (1 - b) * counts.N.sum() == pytest.approx(40.0)
    with pytest.raises(ConfigError):
        choose_b(counts, 4 * 1e6)


def test_same_state_accepts_with_log_ratio_zero(small_counts, rng):
    model = MODELS.build({"type": "flat"})
    state = model.sample_prior(small_counts.T, small_counts.K, 2, rng)
    assert transdim_log_acceptance(model, state, state.copy(), small_counts) == 0.0


def test_candidate_chains_do_not_depend_on_proposal_history(small_counts):
    model = MODELS.build({"type": "flat"})
    first = CandidatePool(model, small_counts, seed=4, warmup=3)
    second = CandidatePool(model, small_counts, seed=4, warmup=3)
    a = first.propose(2)
    second.propose(3)
    b = second.propose(2)
    np.testing.assert_array_equal(a.Z, b.Z)
    np.testing.assert_array_equal(a.log_theta, b.log_theta)
    assert set(second.ensembles) == {2, 3}


def test_candidate_chain_advances_between_proposals(small_counts):
    model = MODELS.build({"type": "flat"})
    pool = CandidatePool(model, small_counts, seed=4, warmup=2, advance=1)
    a = pool.propose(2)
    b = pool.propose(2)
    assert not np.array_equal(a.log_theta, b.log_theta)


def test_stats_table_and_key_format():
    stats = TransdimStats()
    for key, accepted in [(3, True), (2, False), (3, False), (((0, 1, 1), 3), True)]:
        stats.record(key, accepted)
    rows = stats.table()
    assert [r["key"] for r in rows] == ["C=2", "C=3", "C=3;tree=0-1-1"]
    assert rows[1]["rate"] == 0.5
    assert format_key(4) == "C=4"


def test_prior_ratio_sets_acceptance_on_equal_test_likelihoods(small_counts, rng):
    model = MODELS.build({"type": "flat", "hyper": {"r": 0.4}})
    current = model.sample_prior(small_counts.T, small_counts.K, 2, rng)
    candidate = model.sample_prior(small_counts.T, small_counts.K, 3, rng)
    empty = ReadCounts(np.zeros_like(small_counts.n))
    log_a = transdim_log_acceptance(model, current, candidate, empty)
    assert np.exp(log_a) == pytest.approx(0.6)


class FixedCandidates:
    """Candidate source returning the same state for every key."""

    def __init__(self, state):
        self.state = state

    def propose(self, key):
        return self.state.copy()


def _ensemble(model, counts, key, seed):
    ladder = TemperatureLadder(temps=(2.0, 1.0), u0=1.0)
    seeds = np.random.SeedSequence(seed).spawn(ladder.size)
    return TemperedEnsemble.from_prior(model, counts, ladder, key, seeds)


def test_acceptance_ignores_training_part(small_counts):
    model = MODELS.build({"type": "flat", "hyper": {"c_min": 2, "c_max": 3}})
    split = split_counts(small_counts, 0.9)
    no_train = SplitData(train=ReadCounts(np.zeros_like(split.train.n)), test=split.test, b=split.b)
    candidate = model.sample_prior(small_counts.T, small_counts.K, 3, np.random.default_rng(5))

    outcomes = []
    for data in (split, no_train):
        ensemble = _ensemble(model, small_counts, 2, seed=8)
        rng = np.random.default_rng(9)
        moves = [transdim_step(ensemble, FixedCandidates(candidate), data, rng) for _ in range(20)]
        outcomes.append((moves, ensemble.cold.state.Z.copy()))
    assert outcomes[0][0] == outcomes[1][0]
    np.testing.assert_array_equal(outcomes[0][1], outcomes[1][1])


def test_accepted_move_sets_every_chain(small_counts):
    model = MODELS.build({"type": "flat", "hyper": {"c_min": 2, "c_max": 3}})
    split = SplitData(train=small_counts, test=ReadCounts(np.zeros_like(small_counts.n)), b=0.9)
    ensemble = _ensemble(model, small_counts, 2, seed=1)
    pool = CandidatePool(model, split.train, seed=4, warmup=2)
    stats = TransdimStats()
    rng = np.random.default_rng(2)

    accepted = 0
    for _ in range(30):
        if transdim_step(ensemble, pool, split, rng, stats):
            accepted += 1
            source = pool.ensembles[ensemble.key].cold.state
            for chain in ensemble.chains:
                assert chain.state is not source
                np.testing.assert_array_equal(chain.state.Z, source.Z)
                np.testing.assert_array_equal(chain.state.log_theta, source.log_theta)
    assert accepted > 0
    rows = stats.table()
    assert sum(r["proposed"] for r in rows) == 30
    assert sum(r["accepted"] for r in rows) == accepted
    assert {r["key"] for r in rows} <= {"C=2", "C=3"}
