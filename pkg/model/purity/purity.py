from typing import Dict, List, Optional, Tuple

import numpy as np

from core.priors import floor_background, log_theta_to_w, sample_log_gamma
from engine.registry import register_model
from mcmc.kernels import update_phi
from model.base import ModelState, model_dir
from model.flat.flat import FlatModel
from tools.utils import read_metafile

info = read_metafile(model_dir(__file__))


@register_model("flat_purity")
class PurityModel(FlatModel):
    """Flat model plus an explicit mutation-free normal subclone per sample.

    The normal share w_star ~ Be(d1*, d2*) is carried as a gamma pair
    ``log_phi``; the tumour and background weights share the rest.
    """

    name: str = info.get("Name")
    sampler_defaults: dict = dict(info.get("Sampler") or {})

    def __init__(self, hyper: Optional[dict] = None, ordering: Optional[str] = None, **kwargs):
        kwargs.setdefault("model_dir", model_dir(__file__))
        super().__init__(hyper, ordering, **kwargs)

    def normal_share(self, state: ModelState) -> np.ndarray:
        return log_theta_to_w(state.log_phi)[:, 0]

    def weights(self, state: ModelState) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        w_star = self.normal_share(state)
        w = floor_background(log_theta_to_w(state.log_theta)) * (1.0 - w_star)[:, None]
        return w, w_star

    def gamma_blocks(self, state: ModelState) -> List[Tuple[str, np.ndarray]]:
        return super().gamma_blocks(state) + [
            ("log_phi", np.array([self.hyper.d1_star, self.hyper.d2_star]))
        ]

    def sample_prior(self, T: int, K: int, key, rng: np.random.Generator) -> ModelState:
        state = super().sample_prior(T, K, key, rng)
        shapes = np.array([self.hyper.d1_star, self.hyper.d2_star])
        state.log_phi = sample_log_gamma(shapes, rng, size=(T, 2))
        return state

    def prior_weight_means(self, C: int) -> np.ndarray:
        tumour_share = self.hyper.d2_star / (self.hyper.d1_star + self.hyper.d2_star)
        return super().prior_weight_means(C) * tumour_share

    def _extra_updates(self, state, counts, rng, temper) -> Dict[str, Tuple[int, int]]:
        return {"phi": update_phi(self, state, counts, rng, temper)}
