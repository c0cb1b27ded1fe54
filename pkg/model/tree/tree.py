from typing import Dict, List, Optional, Tuple

import numpy as np

from core.likelihood import ReadCounts, loglik_terms, read_probs
from core.priors import (
    TreeHyper,
    dirichlet_logpdf,
    floor_background,
    log_gamma_pdf,
    log_prior_C,
    log_prior_rho,
    log_theta_to_w,
    rho_shapes,
    sample_log_gamma,
    weight_shapes,
)
from core.tree import (
    log_prior_tree_normalized,
    log_prior_Z_given_tree,
    sample_uniform_tree,
    sample_Z_given_tree,
    topology_space,
    validate_topology,
)
from engine.registry import register_model
from mcmc.kernels import update_phi, update_rho_star, update_theta, update_Z_row_tree
from model.base import ModelState, SubcloneModel, model_dir
from tools.utils import read_metafile

info = read_metafile(model_dir(__file__))


@register_model("tree")
class TreeModel(SubcloneModel):
    """Subclones on a rooted phylogeny with the normal clone at node 1.

    Column 0 of Z is the normal clone and holds only code q1. Its weight
    w_t1 ~ Be(a_p, b_p) comes from the gamma pair ``log_phi``; the background
    and tumour weights w_t0, w_t2..w_tC share the rest as Dir(d0, d, ..., d)
    through ``log_theta``. The model-size key is (parent vector, C).
    """

    name: str = info.get("Name")
    sampler_defaults: dict = dict(info.get("Sampler") or {})
    hyper_cls = TreeHyper

    def __init__(self, hyper: Optional[dict] = None, ordering: Optional[str] = None, **kwargs):
        kwargs.setdefault("model_dir", model_dir(__file__))
        super().__init__(hyper, ordering, **kwargs)

    def lam(self, K: int, C: int) -> float:
        return self.hyper.lam_for(K, C)

    def weights(self, state: ModelState) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        w_normal = log_theta_to_w(state.log_phi)[:, 0]
        rest = floor_background(log_theta_to_w(state.log_theta)) * (1.0 - w_normal)[:, None]
        w = np.empty((state.T, state.C + 1))
        w[:, 0] = rest[:, 0]
        w[:, 1] = w_normal
        w[:, 2:] = rest[:, 1:]
        return w, None

    def gamma_blocks(self, state: ModelState) -> List[Tuple[str, np.ndarray]]:
        return [
            ("log_theta", weight_shapes(state.C - 1, self.hyper.d0, self.hyper.d)),
            ("log_phi", self.hyper.normal_shapes(state.C)),
        ]

    def log_prior(self, state: ModelState) -> float:
        value = log_gamma_pdf(state.log_rho_star, rho_shapes(self.hyper.d1)).sum()
        for attr, shapes in self.gamma_blocks(state):
            value += log_gamma_pdf(getattr(state, attr), shapes[None, :]).sum()
        value += log_prior_Z_given_tree(
            state.Z, state.tree, self.lam(state.K, state.C), self.ordering
        )
        return float(value)

    def sample_prior(self, T: int, K: int, key, rng: np.random.Generator) -> ModelState:
        tree = validate_topology(key[0])
        C = len(tree)
        blocks = {
            "log_theta": weight_shapes(C - 1, self.hyper.d0, self.hyper.d),
            "log_phi": self.hyper.normal_shapes(C),
        }
        return ModelState(
            Z=sample_Z_given_tree(tree, K, self.lam(K, C), rng, self.ordering),
            log_theta=sample_log_gamma(blocks["log_theta"], rng, size=(T, C)),
            log_rho_star=sample_log_gamma(rho_shapes(self.hyper.d1), rng),
            log_phi=sample_log_gamma(blocks["log_phi"], rng, size=(T, 2)),
            tree=tree,
        )

    def prior_weight_means(self, C: int) -> np.ndarray:
        a_p, b_p = self.hyper.normal_shapes(C)
        normal = a_p / (a_p + b_p)
        shapes = weight_shapes(C - 1, self.hyper.d0, self.hyper.d)
        rest = (1.0 - normal) * shapes / shapes.sum()
        return np.concatenate([rest[:1], [normal], rest[1:]])

    def size_key(self, state: ModelState):
        return (state.tree, state.C)

    def size_keys(self) -> List:
        return [(tree, len(tree)) for tree in topology_space(self.hyper.c_min, self.hyper.c_max)]

    def propose_size(self, rng: np.random.Generator):
        return sample_uniform_tree(self.hyper.c_min, self.hyper.c_max, rng)

    def log_size_prior(self, key) -> float:
        tree, C = key
        return log_prior_C(C, self.hyper.alpha, "shifted") + log_prior_tree_normalized(
            tree, self.hyper.beta
        )

    def sweep(
        self, state: ModelState, counts: ReadCounts, rng: np.random.Generator, temper: float = 1.0
    ) -> Dict[str, Tuple[int, int]]:
        for k in range(state.K):
            update_Z_row_tree(self, state, counts, k, rng, temper)
        return {
            "theta": update_theta(self, state, counts, rng, temper),
            "phi": update_phi(self, state, counts, rng, temper),
            "rho_star": update_rho_star(self, state, counts, rng, temper),
        }

    def parameter_log_density(self, Z, w, rho, tree) -> float:
        """log p(Z, w, rho | T, C) in the natural coordinates of the stored draws."""
        Z = np.asarray(Z)
        w = np.atleast_2d(np.asarray(w, dtype=np.float64))
        C = Z.shape[1]
        w_normal = w[:, 1]
        rest = np.concatenate([w[:, :1], w[:, 2:]], axis=1) / (1.0 - w_normal)[:, None]
        a_p, b_p = self.hyper.normal_shapes(C)
        value = dirichlet_logpdf(np.stack([w_normal, 1.0 - w_normal], -1), [a_p, b_p]).sum()
        value += dirichlet_logpdf(rest, weight_shapes(C - 1, self.hyper.d0, self.hyper.d)).sum()
        value += log_prior_rho(rho, self.hyper.d1)
        value += log_prior_Z_given_tree(Z, tree, self.lam(Z.shape[0], C), self.ordering)
        return float(value)

    def map_objective_from_components(self, Z, w, rho, tree, counts: ReadCounts) -> float:
        """log p(n | x) + log p(x | T, C), the quantity the MAP draw maximises."""
        p = read_probs(Z, w, rho, self.ordering)
        return float(loglik_terms(counts.n, p).sum()) + self.parameter_log_density(Z, w, rho, tree)

    def map_objective(self, state: ModelState, counts: ReadCounts) -> float:
        w, _ = self.weights(state)
        return self.map_objective_from_components(state.Z, w, self.noise(state), state.tree, counts)
