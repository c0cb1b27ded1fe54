"""
Moves between model sizes scored on a held-out fraction of the reads.

The counts are split into a training part b*n and a test part (1-b)*n. A
proposed size is paired with a draw from the training posterior at that size,
and the move is accepted on test likelihood times size prior. Training
posterior draws come from one persistent chain per proposed size.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from loguru import logger

from core.errors import ConfigError
from core.likelihood import ReadCounts
from mcmc.tempering import TemperatureLadder, TemperedEnsemble
from model.base import ModelState, SubcloneModel

CANDIDATE_LADDER = TemperatureLadder(temps=(1.0,), u0=1.0)


@dataclass
class SplitData:
    train: ReadCounts
    test: ReadCounts
    b: float


def split_counts(counts: ReadCounts, b: float) -> SplitData:
    """Split n into b*n and (1-b)*n; the test part is n minus the training part."""
    if not 0.0 < b < 1.0:
        raise ConfigError(f"Training fraction b must be in (0, 1), got {b}")
    train = counts.scaled(b)
    test = ReadCounts(counts.n - train.n, list(counts.sample_ids), list(counts.pair_ids))
    return SplitData(train=train, test=test, b=b)


def choose_b(counts: ReadCounts, target: float = 160.0) -> float:
    """b such that the test part holds target/T reads in total."""
    total = float(counts.N.sum())
    size = target / counts.T
    if not 0 < size < total:
        raise ConfigError(
            f"Test size {size:g} must be positive and below the {total:g} available reads"
        )
    return 1.0 - size / total


def transdim_log_acceptance(
    model: SubcloneModel,
    current: ModelState,
    candidate: ModelState,
    test: ReadCounts,
) -> float:
    """log of p(n''|x~) p(size~) / [p(n''|x) p(size)]."""
    log_new = model.log_likelihood(candidate, test) + model.log_size_prior(model.size_key(candidate))
    log_old = model.log_likelihood(current, test) + model.log_size_prior(model.size_key(current))
    if log_new == log_old:
        return 0.0
    return log_new - log_old


def _key_entropy(seed: int, key) -> List[int]:
    if isinstance(key, tuple):
        tree, C = key
        return [int(seed), int(C), *map(int, tree)]
    return [int(seed), int(key)]


@dataclass
class CandidatePool:
    """Persistent training-posterior chains, one per proposed model-size key.

    A chain is created from the prior the first time its key is proposed and
    run for ``warmup`` sweeps; afterwards it advances ``advance`` sweeps per
    proposal. Its random stream is seeded from (seed, key), so the sequence of
    candidates does not depend on which keys were proposed before.
    """

    model: SubcloneModel
    train: ReadCounts
    seed: int
    warmup: int = 200
    advance: int = 1
    ensembles: Dict = field(default_factory=dict)

    def propose(self, key) -> ModelState:
        ens = self.ensembles.get(key)
        if ens is None:
            logger.debug("Creating candidate chain for size {} with {} warm-up sweeps", key, self.warmup)
            seed = np.random.SeedSequence(_key_entropy(self.seed, key))
            ens = TemperedEnsemble.from_prior(
                self.model, self.train, CANDIDATE_LADDER, key, [seed]
            )
            ens.advance_all(self.warmup)
            self.ensembles[key] = ens
        else:
            ens.advance_all(self.advance)
        return ens.cold.state.copy()


@dataclass
class TransdimStats:
    proposed: Dict = field(default_factory=dict)
    accepted: Dict = field(default_factory=dict)

    def record(self, key, accepted: bool) -> None:
        self.proposed[key] = self.proposed.get(key, 0) + 1
        if accepted:
            self.accepted[key] = self.accepted.get(key, 0) + 1

    def table(self) -> List[dict]:
        rows = []
        for key in sorted(self.proposed, key=_sort_key):
            proposed = self.proposed[key]
            accepted = self.accepted.get(key, 0)
            rows.append(
                {
                    "key": format_key(key),
                    "proposed": proposed,
                    "accepted": accepted,
                    "rate": accepted / proposed,
                }
            )
        return rows


def _sort_key(key):
    return (key[1], key[0]) if isinstance(key, tuple) else (key, ())


def format_key(key) -> str:
    if isinstance(key, tuple):
        tree, C = key
        return f"C={C};tree={'-'.join(map(str, tree))}"
    return f"C={key}"


def transdim_step(
    ensemble: TemperedEnsemble,
    pool: CandidatePool,
    split: SplitData,
    rng: np.random.Generator,
    stats: Optional[TransdimStats] = None,
) -> bool:
    """Propose a new model size for the whole ensemble.

    On acceptance every chain of the ladder moves to a copy of the
    candidate, so all temperatures keep sharing one model size.
    """
    model = ensemble.model
    key = model.propose_size(rng)
    candidate = pool.propose(key)
    log_a = transdim_log_acceptance(model, ensemble.cold.state, candidate, split.test)
    with np.errstate(invalid="ignore"):
        accept = bool(np.log(rng.random()) < log_a)
    if accept:
        ensemble.set_all(candidate)
    if stats is not None:
        stats.record(key, accept)
    return accept
