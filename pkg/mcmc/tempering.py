"""
Parallel tempering over a ladder of temperatures.

Chain i targets ``posterior ** (1 / temps[i])``; the last chain has
temperature 1 and is the only one whose draws are kept. Each sweep either
advances every chain (probability ``u0``) or attempts one swap between a
random adjacent pair.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from core.errors import ConfigError
from core.likelihood import ReadCounts
from model.base import ModelState, SubcloneModel
from tools.utils import multi_process_function

DEFAULT_TEMPS = (4.5, 3.2, 2.5, 2.0, 1.7, 1.5, 1.35, 1.2, 1.1, 1.0)
DEFAULT_U0 = 0.9


@dataclass(frozen=True)
class TemperatureLadder:
    temps: Tuple[float, ...] = DEFAULT_TEMPS
    u0: float = DEFAULT_U0

    def __post_init__(self):
        temps = tuple(float(x) for x in self.temps)
        object.__setattr__(self, "temps", temps)
        if not temps or any(not x > 0 for x in temps):
            raise ConfigError("Temperatures must be positive")
        if any(a < b for a, b in zip(temps, temps[1:])):
            raise ConfigError(f"Temperatures must be nonincreasing, got {temps}")
        if temps[-1] != 1.0:
            raise ConfigError("The last temperature must be 1")
        if not 0.0 <= self.u0 <= 1.0:
            raise ConfigError(f"u0 must be in [0, 1], got {self.u0}")

    @property
    def size(self) -> int:
        return len(self.temps)


@dataclass
class Chain:
    """One tempered chain with its own random stream and kernel counters."""

    state: ModelState
    temper: float
    rng: np.random.Generator
    stats: Dict[str, List[int]] = field(default_factory=dict)

    def advance(self, model: SubcloneModel, counts: ReadCounts, sweeps: int = 1) -> None:
        for _ in range(sweeps):
            for kernel, (accepted, proposed) in model.sweep(
                self.state, counts, self.rng, self.temper
            ).items():
                total = self.stats.setdefault(kernel, [0, 0])
                total[0] += accepted
                total[1] += proposed


def swap_log_acceptance(temper_i: float, temper_j: float, log_post_i: float, log_post_j: float) -> float:
    """log of [pi_i(x_j) pi_j(x_i)] / [pi_i(x_i) pi_j(x_j)] for pi_i = post^(1/temper_i)."""
    if log_post_i == log_post_j or temper_i == temper_j:
        return 0.0
    return (1.0 / temper_i - 1.0 / temper_j) * (log_post_j - log_post_i)


class TemperedEnsemble:
    """The ladder of chains for one data set, all sharing a model-size key."""

    def __init__(
        self,
        model: SubcloneModel,
        counts: ReadCounts,
        ladder: TemperatureLadder,
        chains: Sequence[Chain],
        num_workers: int = 1,
    ):
        if len(chains) != ladder.size:
            raise ConfigError(f"Need {ladder.size} chains, got {len(chains)}")
        self.model = model
        self.counts = counts
        self.ladder = ladder
        self.chains = list(chains)
        self.num_workers = num_workers
        self.swap_stats = np.zeros((max(ladder.size - 1, 0), 2), dtype=np.int64)

    @classmethod
    def from_prior(
        cls,
        model: SubcloneModel,
        counts: ReadCounts,
        ladder: TemperatureLadder,
        key,
        seeds: Sequence[np.random.SeedSequence],
        num_workers: int = 1,
    ) -> "TemperedEnsemble":
        """Start every chain from its own prior draw at model-size ``key``."""
        chains = []
        for temper, seed in zip(ladder.temps, seeds):
            rng = np.random.default_rng(seed)
            state = model.sample_prior(counts.T, counts.K, key, rng)
            chains.append(Chain(state=state, temper=temper, rng=rng))
        return cls(model, counts, ladder, chains, num_workers)

    @property
    def cold(self) -> Chain:
        return self.chains[-1]

    @property
    def key(self):
        return self.model.size_key(self.cold.state)

    def advance_all(self, sweeps: int = 1) -> None:
        # Chains own their random streams, so thread scheduling cannot change results
        multi_process_function(
            lambda chain: chain.advance(self.model, self.counts, sweeps),
            self.chains,
            self.num_workers,
            desc="Advancing tempered chains",
        )

    def log_posteriors(self) -> np.ndarray:
        return np.array([self.model.log_posterior(c.state, self.counts) for c in self.chains])

    def try_swap(self, i: int, rng: np.random.Generator) -> bool:
        """Attempt to exchange the states of chains i and i + 1."""
        a, b = self.chains[i], self.chains[i + 1]
        log_a = swap_log_acceptance(
            a.temper,
            b.temper,
            self.model.log_posterior(a.state, self.counts),
            self.model.log_posterior(b.state, self.counts),
        )
        self.swap_stats[i, 0] += 1
        with np.errstate(invalid="ignore"):
            accept = bool(np.log(rng.random()) < log_a)
        if accept:
            a.state, b.state = b.state, a.state
            self.swap_stats[i, 1] += 1
        return accept

    def set_all(self, state: ModelState) -> None:
        for chain in self.chains:
            chain.state = state.copy()

    def acceptance_table(self) -> List[dict]:
        rows = []
        for idx, chain in enumerate(self.chains):
            for kernel, (accepted, proposed) in sorted(chain.stats.items()):
                rows.append(
                    {
                        "chain": idx,
                        "temperature": chain.temper,
                        "kernel": kernel,
                        "accepted": accepted,
                        "proposed": proposed,
                        "rate": accepted / proposed if proposed else float("nan"),
                    }
                )
        return rows

    def swap_table(self) -> List[dict]:
        return [
            {
                "pair": f"{i}-{i + 1}",
                "temperature_hot": self.chains[i].temper,
                "temperature_cold": self.chains[i + 1].temper,
                "attempts": int(att),
                "accepted": int(acc),
                "rate": acc / att if att else float("nan"),
            }
            for i, (att, acc) in enumerate(self.swap_stats)
        ]


def pt_sweep(ensemble: TemperedEnsemble, rng: np.random.Generator) -> str:
    """One parallel-tempering step; returns "update" or "swap"."""
    if ensemble.ladder.size < 2 or rng.random() < ensemble.ladder.u0:
        ensemble.advance_all()
        return "update"
    i = int(rng.integers(ensemble.ladder.size - 1))
    ensemble.try_swap(i, rng)
    return "swap"
