from dataclasses import dataclass

import numpy as np
import pytest
from scipy import stats

from core.errors import ConfigError
from mcmc.tempering import (
    DEFAULT_TEMPS,
    Chain,
    TemperatureLadder,
    TemperedEnsemble,
    pt_sweep,
    swap_log_acceptance,
)

TARGET = np.array([0.35, 0.05, 0.1, 0.5])


@dataclass
class ToyState:
    x: int

    def copy(self) -> "ToyState":
        return ToyState(self.x)


class ToyModel:
    """Random-walk Metropolis on four states with a fixed target."""

    def log_posterior(self, state, counts) -> float:
        return float(np.log(TARGET[state.x]))

    def size_key(self, state):
        return 1

    def sweep(self, state, counts, rng, temper=1.0):
        prop = (state.x + rng.choice((-1, 1))) % TARGET.size
        log_a = (np.log(TARGET[prop]) - np.log(TARGET[state.x])) / temper
        accepted = int(np.log(rng.random()) < log_a)
        if accepted:
            state.x = prop
        return {"x": (accepted, 1)}


def _toy_ensemble(temps, seed=0):
    ladder = TemperatureLadder(temps)
    seeds = np.random.SeedSequence(seed).spawn(len(temps))
    chains = [Chain(ToyState(0), t, np.random.default_rng(s)) for t, s in zip(ladder.temps, seeds)]
    return TemperedEnsemble(ToyModel(), None, ladder, chains)


def test_swap_log_acceptance():
    assert swap_log_acceptance(2.0, 1.0, -10.0, -5.0) == pytest.approx(-2.5)
    assert swap_log_acceptance(2.0, 1.0, -5.0, -10.0) == pytest.approx(2.5)
    assert swap_log_acceptance(1.5, 1.5, -3.0, -7.0) == 0.0


def test_default_ladder():
    ladder = TemperatureLadder()
    assert ladder.temps == DEFAULT_TEMPS
    assert ladder.size == 10
    assert ladder.temps[-1] == 1.0
    assert ladder.u0 == 0.9


@pytest.mark.parametrize(
    "temps, u0",
    [((2.0, 1.5), 0.9), ((1.0, 2.0), 0.9), ((3.0, -1.0, 1.0), 0.9), ((), 0.9), ((2.0, 1.0), 1.5)],
)
def test_invalid_ladders(temps, u0):
    with pytest.raises(ConfigError):
        TemperatureLadder(temps, u0)


def test_set_all_copies_state():
    ens = _toy_ensemble((3.0, 1.0))
    ens.set_all(ToyState(2))
    ens.chains[0].state.x = 1
    assert ens.cold.state.x == 2


def test_tables_have_one_row_per_entry():
    ens = _toy_ensemble((3.0, 2.0, 1.0))
    rng = np.random.default_rng(1)
    for _ in range(200):
        pt_sweep(ens, rng)
    acceptance = ens.acceptance_table()
    assert len(acceptance) == 3
    assert all(0.0 <= row["rate"] <= 1.0 for row in acceptance)
    swaps = ens.swap_table()
    assert [row["pair"] for row in swaps] == ["0-1", "1-2"]
    assert sum(row["attempts"] for row in swaps) > 0


def test_cold_chain_targets_untempered_distribution():
    ens = _toy_ensemble((4.0, 2.0, 1.4, 1.0), seed=5)
    rng = np.random.default_rng(11)
    visits = np.zeros(TARGET.size)
    for it in range(60000):
        pt_sweep(ens, rng)
        if it >= 1000 and it % 20 == 0:
            visits[ens.cold.state.x] += 1
    result = stats.chisquare(visits, TARGET * visits.sum())
    assert result.pvalue > 0.01
