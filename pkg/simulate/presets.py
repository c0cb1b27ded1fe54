"""
Registered simulation designs.

Each preset is a factory returning a ``SimSpec``; ``PRESETS.build`` passes
the keys of a config mapping (``{"type": "sim3", "K": 40}``) to it.
"""

from typing import Optional

import numpy as np

from core.errors import ConfigError
from engine.registry import register_preset
from simulate.generator import SimSpec


def _halves(K: int, first: float, second: float) -> np.ndarray:
    """Missing share ``first`` on the first half of the rows and ``second`` on the rest."""
    v = np.full(K, second)
    v[: K // 2] = first
    return v


# (first pair, last pair, subclone, code); sim1 is laid out on 40 rows, the rest on 100.
SIM1_BLOCKS = [
    (11, 30, 1, 4),
    (1, 10, 2, 4),
    (11, 30, 2, 6),
]

SIM2_BLOCKS = [
    (1, 20, 1, 2), (21, 40, 1, 4), (61, 80, 1, 3), (81, 100, 1, 6),
    (21, 40, 2, 7), (41, 60, 2, 4), (61, 80, 2, 2), (81, 100, 2, 10),
    (1, 20, 3, 6), (41, 60, 3, 3), (61, 80, 3, 9), (81, 100, 3, 4),
    (1, 20, 4, 10), (21, 40, 4, 5), (41, 60, 4, 8), (81, 100, 4, 9),
]

SIM3_BLOCKS = [
    (1, 25, 1, 4), (26, 50, 1, 2), (76, 100, 1, 6),
    (26, 50, 2, 5), (51, 75, 2, 9), (76, 100, 2, 3),
    (1, 25, 3, 7), (51, 75, 3, 4), (76, 100, 3, 10),
]

TREE_SIM1_TOPOLOGY = (0, 1, 2, 2)
TREE_SIM2_TOPOLOGY = (0, 1, 2, 2, 3)
TREE_Z_SEED = 2018


@register_preset("sim1")
def sim1(seed: int = 0, K: int = 40, n_range=(400, 600)) -> SimSpec:
    """One sample, two subclones with weights (1e-7, .8, .2)."""
    return SimSpec(
        T=1,
        K=K,
        C=2,
        blocks=SIM1_BLOCKS,
        block_K=40,
        w=np.array([1e-7, 0.8, 0.2]),
        v=0.3,
        n_range=tuple(n_range),
        seed=seed,
        name="sim1",
    )


@register_preset("sim2")
def sim2(seed: int = 0, K: int = 100, n_range=(400, 600)) -> SimSpec:
    return SimSpec(
        T=4,
        K=K,
        C=4,
        blocks=SIM2_BLOCKS,
        block_K=100,
        w_concentration=(20, 10, 5, 2),
        v=_halves(K, 0.3, 0.35),
        n_range=tuple(n_range),
        seed=seed,
        name="sim2",
    )


@register_preset("sim3")
def sim3(seed: int = 0, K: int = 100, n_range=(400, 600)) -> SimSpec:
    """Six samples, three subclones; K=40 keeps the design at a smaller scale."""
    return SimSpec(
        T=6,
        K=K,
        C=3,
        blocks=SIM3_BLOCKS,
        block_K=100,
        w_concentration=(14, 6, 3),
        v=_halves(K, 0.3, 0.35),
        n_range=tuple(n_range),
        seed=seed,
        name="sim3",
    )


@register_preset("sim3_purity")
def sim3_purity(seed: int = 0, K: int = 100, n_range=(400, 600)) -> SimSpec:
    """sim3 with the first subclone turned into the mutation-free normal clone."""
    spec = sim3(seed, K, n_range)
    spec.purity = True
    spec.name = "sim3_purity"
    return spec


@register_preset("sim3_snv")
def sim3_snv(seed: int = 0, K: int = 100, n_range=(400, 600)) -> SimSpec:
    """sim3 with the second half of the pairs reduced to marginal SNV counts."""
    spec = sim3(seed, K, n_range)
    spec.snv_start = K // 2 + 1
    spec.name = "sim3_snv"
    return spec


@register_preset("tree_sim1")
def tree_sim1(seed: int = 0, K: int = 100, depth: int = 500, z_seed: Optional[int] = TREE_Z_SEED) -> SimSpec:
    """Single sample on a four-node tree at 500x or 2000x depth."""
    if depth not in (500, 2000):
        raise ConfigError(f"tree_sim1 depth must be 500 or 2000, got {depth}")
    return SimSpec(
        T=1,
        K=K,
        C=4,
        tree=TREE_SIM1_TOPOLOGY,
        z_seed=z_seed,
        w_concentration=(15, 10, 8, 5),
        v=_halves(K, 0.25, 0.3),
        n_range=(depth - 100, depth + 100),
        ordering="tree",
        seed=seed,
        name="tree_sim1",
    )


@register_preset("tree_sim2")
def tree_sim2(seed: int = 0, K: int = 100, z_seed: Optional[int] = TREE_Z_SEED) -> SimSpec:
    """Eight samples on a five-node tree; K=50 is the smaller variant."""
    return SimSpec(
        T=8,
        K=K,
        C=5,
        tree=TREE_SIM2_TOPOLOGY,
        z_seed=z_seed,
        w_concentration=(25, 15, 10, 8, 5),
        v=_halves(K, 0.3, 0.35),
        n_range=(400, 600),
        ordering="tree",
        seed=seed,
        name="tree_sim2",
    )


@register_preset("lung_synthetic")
def lung_synthetic(seed: int = 0, pairs: int = 69, snvs: int = 69) -> SimSpec:
    """Four samples, pairs followed by marginal SNVs, with normal-cell contamination."""
    K = pairs + snvs
    return SimSpec(
        T=4,
        K=K,
        C=4,
        blocks=SIM2_BLOCKS,
        block_K=100,
        w_concentration=(20, 10, 5, 2),
        v=_halves(K, 0.3, 0.35),
        n_range=(400, 600),
        purity=True,
        snv_start=pairs + 1,
        seed=seed,
        name="lung_synthetic",
    )
