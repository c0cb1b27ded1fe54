from typing import Dict, List, Optional, Tuple

import numpy as np

from core.likelihood import ReadCounts
from core.priors import (
    Hyperparams,
    beta_dirichlet_logpdf,
    floor_background,
    log_gamma_pdf,
    log_prior_C,
    log_prior_Z_given_pi,
    log_theta_to_w,
    rho_shapes,
    sample_beta_dirichlet,
    sample_log_gamma,
    sample_Z_given_pi,
    weight_shapes,
)
from engine.registry import register_model
from mcmc.kernels import PI_CLIP, update_pi, update_rho_star, update_theta, update_Z
from model.base import ModelState, SubcloneModel, model_dir
from tools.utils import read_metafile

info = read_metafile(model_dir(__file__))


@register_model("flat")
class FlatModel(SubcloneModel):
    """Feature-allocation model without tree structure.

    Columns of Z are exchangeable subclones with Beta-Dirichlet code
    probabilities; weights follow Dir(d0, d, ..., d) with the background first.
    The model-size key is the number of subclones C.
    """

    name: str = info.get("Name")
    sampler_defaults: dict = dict(info.get("Sampler") or {})
    hyper_cls = Hyperparams

    def __init__(
        self,
        hyper: Optional[dict] = None,
        ordering: Optional[str] = None,
        theta_step: float = 0.2,
        rho_step: float = 0.1,
        jacobian: bool = True,
        **kwargs,
    ):
        super().__init__(
            hyper,
            ordering,
            theta_step=theta_step,
            rho_step=rho_step,
            jacobian=jacobian,
            model_dir=kwargs.pop("model_dir", model_dir(__file__)),
        )

    def weights(self, state: ModelState) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        return floor_background(log_theta_to_w(state.log_theta)), None

    def gamma_blocks(self, state: ModelState) -> List[Tuple[str, np.ndarray]]:
        return [("log_theta", weight_shapes(state.C, self.hyper.d0, self.hyper.d))]

    def log_prior(self, state: ModelState) -> float:
        h = self.hyper
        value = log_gamma_pdf(state.log_rho_star, rho_shapes(h.d1)).sum()
        for attr, shapes in self.gamma_blocks(state):
            value += log_gamma_pdf(getattr(state, attr), shapes[None, :]).sum()
        value += beta_dirichlet_logpdf(state.pi, h.alpha, state.C, h.gamma, coords="split")
        value += log_prior_Z_given_pi(state.Z, state.pi)
        return float(value)

    def _sample_pi(self, C: int, rng) -> np.ndarray:
        h = self.hyper
        pi = np.stack([sample_beta_dirichlet(h.alpha, C, h.gamma, rng) for _ in range(C)])
        return np.clip(pi, PI_CLIP, 1.0 - PI_CLIP)

    def sample_prior(self, T: int, K: int, key, rng: np.random.Generator) -> ModelState:
        C = int(key)
        h = self.hyper
        pi = self._sample_pi(C, rng)
        return ModelState(
            Z=sample_Z_given_pi(pi, K, rng),
            log_theta=sample_log_gamma(weight_shapes(C, h.d0, h.d), rng, size=(T, C + 1)),
            log_rho_star=sample_log_gamma(rho_shapes(h.d1), rng),
            pi=pi,
        )

    def prior_weight_means(self, C: int) -> np.ndarray:
        shapes = weight_shapes(C, self.hyper.d0, self.hyper.d)
        return shapes / shapes.sum()

    def size_key(self, state: ModelState) -> int:
        return state.C

    def size_keys(self) -> List[int]:
        return list(range(self.hyper.c_min, self.hyper.c_max + 1))

    def propose_size(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.hyper.c_min, self.hyper.c_max + 1))

    def log_size_prior(self, key) -> float:
        return log_prior_C(int(key), self.hyper.r, self.hyper.geometric_form)

    def sweep(
        self, state: ModelState, counts: ReadCounts, rng: np.random.Generator, temper: float = 1.0
    ) -> Dict[str, Tuple[int, int]]:
        update_Z(self, state, counts, rng, temper)
        update_pi(self, state, rng, temper)
        stats = {"theta": update_theta(self, state, counts, rng, temper)}
        stats.update(self._extra_updates(state, counts, rng, temper))
        stats["rho_star"] = update_rho_star(self, state, counts, rng, temper)
        return stats

    def _extra_updates(self, state, counts, rng, temper) -> Dict[str, Tuple[int, int]]:
        return {}
