import os
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from core.errors import ConfigError
from core.genotype import check_ordering
from core.likelihood import ReadCounts, loglik_terms, read_probs
from core.priors import log_rho_star_to_rho
from core.tree import Topology
from tools.utils import read_metafile


@dataclass
class ModelState:
    """One full parameter configuration for a fixed number of subclones.

    Attributes:
        Z: (K, C) 0-based genotype codes.
        log_theta: (T, J) log unscaled abundances behind the weights.
        log_rho_star: (8,) log unscaled noise probabilities.
        pi: (C, 10) column code probabilities (flat models only).
        log_phi: (T, 2) log gamma pair behind the normal-clone share.
        tree: parent vector (tree model only).
    """

    Z: np.ndarray
    log_theta: np.ndarray
    log_rho_star: np.ndarray
    pi: Optional[np.ndarray] = None
    log_phi: Optional[np.ndarray] = None
    tree: Optional[Topology] = None

    @property
    def C(self) -> int:
        return self.Z.shape[1]

    @property
    def K(self) -> int:
        return self.Z.shape[0]

    @property
    def T(self) -> int:
        return self.log_theta.shape[0]

    def copy(self) -> "ModelState":
        return ModelState(
            Z=self.Z.copy(),
            log_theta=self.log_theta.copy(),
            log_rho_star=self.log_rho_star.copy(),
            pi=None if self.pi is None else self.pi.copy(),
            log_phi=None if self.log_phi is None else self.log_phi.copy(),
            tree=self.tree,
        )

    def replace(self, **changes) -> "ModelState":
        """Shallow copy with some arrays swapped out."""
        return replace(self, **changes)


class SubcloneModel(ABC):
    """Base class of the registered subclone models.

    A model owns its hyperparameters and the genotype ordering, turns a
    ``ModelState`` into weights and read probabilities, evaluates the prior in
    the coordinates its kernels work in, and runs one sweep of within-model
    updates at a given temperature.
    """

    name: str = None
    sampler_defaults: dict = {}
    hyper_cls = None

    def __init__(
        self,
        hyper: Optional[Dict[str, Any]] = None,
        ordering: Optional[str] = None,
        theta_step: float = 0.2,
        rho_step: float = 0.1,
        jacobian: bool = True,
        model_dir: Optional[str] = None,
    ):
        info = read_metafile(model_dir) if model_dir else {}
        defaults = dict(info.get("Hyperparameters") or {})
        overrides = dict(hyper or {})
        allowed = {f for f in self.hyper_cls.__dataclass_fields__}
        unknown = sorted(set(defaults) - allowed) + sorted(set(overrides) - allowed)
        if unknown:
            raise ConfigError(f"Unknown hyperparameters for model '{self.name}': {unknown}")
        defaults.update(overrides)
        self.hyper = self.hyper_cls(**defaults).validate()
        self.ordering = ordering or info.get("Ordering", "pairclone")
        check_ordering(self.ordering)
        if not theta_step > 0 or not rho_step > 0:
            raise ConfigError("MH step sizes must be positive")
        self.theta_step = theta_step
        self.rho_step = rho_step
        self.jacobian = jacobian

    def __repr__(self):
        return f"{self.__class__.__name__}(ordering={self.ordering}, hyper={self.hyper})"

    # -- parameter assembly --------------------------------------------------

    @abstractmethod
    def weights(self, state: ModelState) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """Return (w of shape (T, C+1), w_star of shape (T,) or None)."""

    def noise(self, state: ModelState) -> np.ndarray:
        return log_rho_star_to_rho(state.log_rho_star)

    def read_probs(self, state: ModelState) -> np.ndarray:
        w, w_star = self.weights(state)
        return read_probs(state.Z, w, self.noise(state), self.ordering, w_star)

    def loglik_by_sample(self, state: ModelState, counts: ReadCounts) -> np.ndarray:
        return loglik_terms(counts.n, self.read_probs(state)).sum(axis=(1, 2))

    def log_likelihood(self, state: ModelState, counts: ReadCounts, temper: float = 1.0) -> float:
        return float(loglik_terms(counts.n, self.read_probs(state)).sum()) / temper

    def log_posterior(self, state: ModelState, counts: ReadCounts) -> float:
        """Untempered log prior plus log likelihood, for swaps and telemetry."""
        return self.log_prior(state) + self.log_likelihood(state, counts)

    # -- priors --------------------------------------------------------------

    @abstractmethod
    def gamma_blocks(self, state: ModelState) -> List[Tuple[str, np.ndarray]]:
        """(state attribute, gamma shapes per column) for every log-gamma block."""

    @abstractmethod
    def log_prior(self, state: ModelState) -> float:
        """Log prior density in the sampler's coordinates, given C (and tree)."""

    @abstractmethod
    def sample_prior(self, T: int, K: int, key, rng: np.random.Generator) -> ModelState:
        """Draw a state from the prior for the given model-size key."""

    @abstractmethod
    def prior_weight_means(self, C: int) -> np.ndarray:
        """Prior mean of each weight column w_t0..w_tC."""

    # -- model size ----------------------------------------------------------

    @abstractmethod
    def size_key(self, state: ModelState):
        """Hashable key naming the model size (C, or (tree, C))."""

    @abstractmethod
    def propose_size(self, rng: np.random.Generator):
        """Uniform proposal over model-size keys."""

    @abstractmethod
    def log_size_prior(self, key) -> float:
        """Log prior of a model-size key, up to a constant shared by all keys."""

    @abstractmethod
    def size_keys(self) -> List:
        """Every model-size key ``propose_size`` can return."""

    # -- kernels -------------------------------------------------------------

    @abstractmethod
    def sweep(
        self, state: ModelState, counts: ReadCounts, rng: np.random.Generator, temper: float = 1.0
    ) -> Dict[str, Tuple[int, int]]:
        """Run every within-model update once; return (accepted, proposed) per kernel."""

    # -- summaries -----------------------------------------------------------

    def map_objective(self, state: ModelState, counts: ReadCounts) -> Optional[float]:
        return None


def model_dir(file: str) -> str:
    return os.path.dirname(os.path.abspath(file))
