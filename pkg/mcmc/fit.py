"""
Top-level sampler: parallel tempering on the full data plus model-size moves
scored on a held-out split, with thinned draws kept from the cold chain.
"""

import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from tqdm import tqdm

from core.errors import ConfigError
from core.likelihood import ReadCounts
from core.tree import Topology, validate_topology
from mcmc.tempering import DEFAULT_TEMPS, DEFAULT_U0, TemperatureLadder, TemperedEnsemble, pt_sweep
from mcmc.transdim import CandidatePool, SplitData, TransdimStats, choose_b, split_counts, transdim_step
from model.base import ModelState, SubcloneModel
from tools.utils import read_jsonl, write_jsonl


@dataclass
class SamplerConfig:
    """Settings of one sampler run.

    ``b`` overrides the model's default training fraction; when both are
    unset, b is chosen so that the test part holds ``test_target / T`` reads.
    ``fixed_C`` (and ``fixed_tree`` for the tree model) switch off the
    model-size moves.
    """

    model: str = "flat"
    iters: int = 30000
    burnin: int = 10000
    thin: int = 10
    seed: int = 0
    temps: Tuple[float, ...] = DEFAULT_TEMPS
    u0: float = DEFAULT_U0
    b: Optional[float] = None
    test_target: float = 160.0
    theta_step: float = 0.2
    rho_step: float = 0.1
    jacobian: bool = True
    fixed_C: Optional[int] = None
    fixed_tree: Optional[Tuple[int, ...]] = None
    candidate_warmup: int = 200
    candidate_advance: int = 1
    num_workers: int = 0  # 0 takes PAIRCLONE_NUM_WORKERS
    max_pairwise: int = 2000

    def validate(self) -> "SamplerConfig":
        if not 0 <= self.burnin < self.iters:
            raise ConfigError(f"Need 0 <= burnin < iters, got burnin={self.burnin}, iters={self.iters}")
        if self.thin < 1:
            raise ConfigError("thin must be at least 1")
        if not self.theta_step > 0 or not self.rho_step > 0:
            raise ConfigError("MH step sizes must be positive")
        if self.b is not None and not 0 < self.b < 1:
            raise ConfigError(f"Training fraction b must be in (0, 1), got {self.b}")
        if not self.test_target > 0:
            raise ConfigError("test_target must be positive")
        if self.candidate_warmup < 0 or self.candidate_advance < 1:
            raise ConfigError("candidate_warmup must be >= 0 and candidate_advance >= 1")
        if self.fixed_tree is not None:
            self.fixed_tree = validate_topology(self.fixed_tree)
            if self.fixed_C is not None and self.fixed_C != len(self.fixed_tree):
                raise ConfigError("fixed_C disagrees with the length of fixed_tree")
        self.temps = tuple(self.temps)
        TemperatureLadder(self.temps, self.u0)
        return self

    @classmethod
    def keys(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_dict(cls, cfg: Dict[str, Any]) -> "SamplerConfig":
        unknown = sorted(set(cfg) - set(cls.keys()))
        if unknown:
            raise ConfigError(f"Unknown sampler settings: {unknown}")
        values = dict(cfg)
        if values.get("temps") is not None:
            values["temps"] = tuple(values["temps"])
        if values.get("fixed_tree") is not None:
            values["fixed_tree"] = tuple(values["fixed_tree"])
        return cls(**values).validate()

    def to_dict(self) -> dict:
        return asdict(self)

    def fixed_key(self, model: SubcloneModel):
        if self.fixed_tree is not None:
            return (self.fixed_tree, len(self.fixed_tree))
        if self.fixed_C is not None:
            if model.name == "tree":
                raise ConfigError("The tree model needs fixed_tree to fix the model size")
            return int(self.fixed_C)
        return None


@dataclass
class Draw:
    """One retained cold-chain draw in natural coordinates (Z 0-based)."""

    iteration: int
    Z: np.ndarray
    w: np.ndarray
    rho: np.ndarray
    log_post: float
    w_star: Optional[np.ndarray] = None
    tree: Optional[Topology] = None
    map_value: Optional[float] = None

    @property
    def C(self) -> int:
        return self.Z.shape[1]

    @property
    def key(self):
        return (self.tree, self.C) if self.tree is not None else self.C

    def to_record(self) -> dict:
        return {
            "iteration": self.iteration,
            "C": self.C,
            "tree": None if self.tree is None else list(self.tree),
            "Z": (self.Z + 1).tolist(),
            "w": self.w.tolist(),
            "w_star": None if self.w_star is None else self.w_star.tolist(),
            "rho": self.rho.tolist(),
            "log_post": self.log_post,
            "map_value": self.map_value,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Draw":
        return cls(
            iteration=int(rec["iteration"]),
            Z=np.asarray(rec["Z"], dtype=np.int64).reshape(-1, int(rec["C"])) - 1,
            w=np.asarray(rec["w"], dtype=np.float64),
            rho=np.asarray(rec["rho"], dtype=np.float64),
            log_post=float(rec["log_post"]),
            w_star=None if rec.get("w_star") is None else np.asarray(rec["w_star"]),
            tree=None if rec.get("tree") is None else tuple(rec["tree"]),
            map_value=rec.get("map_value"),
        )


def make_draw(model: SubcloneModel, state: ModelState, counts: ReadCounts, iteration: int) -> Draw:
    w, w_star = model.weights(state)
    return Draw(
        iteration=iteration,
        Z=state.Z.copy(),
        w=w,
        rho=model.noise(state),
        log_post=model.log_posterior(state, counts),
        w_star=w_star,
        tree=state.tree,
        map_value=model.map_objective(state, counts),
    )


class PosteriorSamples:
    """Retained draws of one run, all from the temperature-1 chain."""

    def __init__(self, model_name: str, ordering: str, draws: Optional[List[Draw]] = None):
        self.model_name = model_name
        self.ordering = ordering
        self.draws: List[Draw] = list(draws or [])

    def __len__(self) -> int:
        return len(self.draws)

    def __iter__(self) -> Iterator[Draw]:
        return iter(self.draws)

    def __getitem__(self, idx) -> Draw:
        return self.draws[idx]

    def append(self, draw: Draw) -> None:
        self.draws.append(draw)

    @property
    def is_tree(self) -> bool:
        return any(d.tree is not None for d in self.draws)

    def sizes(self) -> np.ndarray:
        return np.array([d.C for d in self.draws], dtype=np.int64)

    def select(self, C: int, tree: Optional[Sequence[int]] = None) -> List[Tuple[int, Draw]]:
        """(index, draw) pairs at size C, and at topology ``tree`` when given."""
        tree = None if tree is None else tuple(tree)
        return [
            (i, d)
            for i, d in enumerate(self.draws)
            if d.C == C and (tree is None or d.tree == tree)
        ]

    def save(self, path: str) -> None:
        write_jsonl(path, (d.to_record() for d in self.draws))

    @classmethod
    def load(cls, path: str, model_name: str, ordering: str) -> "PosteriorSamples":
        return cls(model_name, ordering, [Draw.from_record(r) for r in read_jsonl(path)])


@dataclass
class FitResult:
    samples: PosteriorSamples
    acceptance: List[dict]
    swaps: List[dict]
    transdim: List[dict]
    log_post_trace: np.ndarray
    temps: Tuple[float, ...]
    b: Optional[float] = None
    retained_iterations: List[int] = field(default_factory=list)

    def write_telemetry(self, out_dir: str) -> None:
        pd.DataFrame(self.acceptance).to_csv(os.path.join(out_dir, "acceptance.csv"), index=False)
        pd.DataFrame(self.swaps).to_csv(os.path.join(out_dir, "swap_rates.csv"), index=False)
        pd.DataFrame(self.transdim, columns=["key", "proposed", "accepted", "rate"]).to_csv(
            os.path.join(out_dir, "transdim.csv"), index=False
        )
        trace = pd.DataFrame(
            self.log_post_trace.reshape(len(self.retained_iterations), len(self.temps)),
            columns=[f"chain{i}_temp{t:g}" for i, t in enumerate(self.temps)],
        )
        trace.insert(0, "iteration", self.retained_iterations)
        trace.to_csv(os.path.join(out_dir, "log_posterior_trace.csv"), index=False)


def resolve_b(config: SamplerConfig, model: SubcloneModel, counts: ReadCounts) -> float:
    if config.b is not None:
        return config.b
    model_b = getattr(model.hyper, "b", None)
    if model_b is not None:
        return model_b
    return choose_b(counts, config.test_target)


def run_fit(
    counts: ReadCounts,
    model: SubcloneModel,
    config: SamplerConfig,
    disable_progress: bool = False,
) -> FitResult:
    """Run the sampler and return the thinned post-burn-in cold-chain draws.

    Output is a deterministic function of (seed, config, counts): every chain
    and every candidate chain owns a random stream derived from the seed.
    """
    config.validate()
    master_seed, chain_seed = np.random.SeedSequence(config.seed).spawn(2)
    rng = np.random.default_rng(master_seed)
    ladder = TemperatureLadder(config.temps, config.u0)

    fixed = config.fixed_key(model)
    key = fixed if fixed is not None else model.propose_size(rng)
    ensemble = TemperedEnsemble.from_prior(
        model, counts, ladder, key, chain_seed.spawn(ladder.size), config.num_workers
    )

    split: Optional[SplitData] = None
    pool: Optional[CandidatePool] = None
    stats = TransdimStats()
    if fixed is None:
        split = split_counts(counts, resolve_b(config, model, counts))
        pool = CandidatePool(
            model, split.train, config.seed, config.candidate_warmup, config.candidate_advance
        )
        logger.info(
            "Training fraction b={:.6f}, test part holds {:.1f} reads", split.b, split.test.N.sum()
        )

    samples = PosteriorSamples(model.name, model.ordering)
    trace, retained = [], []
    logger.info(
        "Sampling {} iterations ({} burn-in, thin {}) with {} temperatures, model {}",
        config.iters, config.burnin, config.thin, ladder.size, model.name,
    )
    for it in tqdm(range(config.iters), desc="Sampling", disable=disable_progress):
        pt_sweep(ensemble, rng)
        if pool is not None:
            transdim_step(ensemble, pool, split, rng, stats)
        if it >= config.burnin and (it - config.burnin) % config.thin == 0:
            samples.append(make_draw(model, ensemble.cold.state, counts, it))
            trace.append(ensemble.log_posteriors())
            retained.append(it)

    logger.info("Kept {} draws", len(samples))
    return FitResult(
        samples=samples,
        acceptance=ensemble.acceptance_table(),
        swaps=ensemble.swap_table(),
        transdim=stats.table(),
        log_post_trace=np.asarray(trace, dtype=np.float64).reshape(len(retained), ladder.size),
        temps=ladder.temps,
        b=None if split is None else split.b,
        retained_iterations=retained,
    )
