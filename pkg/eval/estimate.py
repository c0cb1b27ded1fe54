"""
Posterior summaries: label-aligned genotype distances, point estimates and
posterior tables over model sizes.
"""

import itertools
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.optimize import linear_sum_assignment
from tqdm import tqdm

from core.errors import DimensionError, EstimationError
from core.genotype import bits_table
from core.tree import Topology
from mcmc.fit import Draw, PosteriorSamples
from tools.utils import multi_process_function

MAX_EXHAUSTIVE_C = 8


@dataclass
class PointEstimate:
    Z: np.ndarray
    w: np.ndarray
    rho: np.ndarray
    index: int
    w_star: Optional[np.ndarray] = None
    tree: Optional[Topology] = None

    @classmethod
    def from_draw(cls, draw: Draw, index: int) -> "PointEstimate":
        return cls(
            Z=draw.Z.copy(),
            w=np.asarray(draw.w).copy(),
            rho=np.asarray(draw.rho).copy(),
            index=index,
            w_star=None if draw.w_star is None else np.asarray(draw.w_star).copy(),
            tree=draw.tree,
        )


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------


def _bits(Z, ordering: str) -> np.ndarray:
    return bits_table(ordering)[np.asarray(Z, dtype=np.int64)]


def column_distance(Z, Z_other, c: int, c_other: int, ordering: str = "pairclone") -> int:
    """L1 distance between the canonical bit vectors of two columns, summed over pairs."""
    Z, Z_other = np.asarray(Z), np.asarray(Z_other)
    if Z.shape[0] != Z_other.shape[0]:
        raise DimensionError(f"Column lengths differ: {Z.shape[0]} vs {Z_other.shape[0]}")
    bits = bits_table(ordering)
    return int(np.abs(bits[Z[:, c]] - bits[Z_other[:, c_other]]).sum())


def distance_matrix(Z, Z_other, ordering: str = "pairclone") -> np.ndarray:
    """D[c, c'] = column_distance(Z, Z_other, c, c')."""
    Z, Z_other = np.asarray(Z), np.asarray(Z_other)
    if Z.ndim != 2 or Z_other.ndim != 2 or Z.shape[0] != Z_other.shape[0]:
        raise DimensionError(f"Cannot compare genotype matrices {Z.shape} and {Z_other.shape}")
    B, B_other = _bits(Z, ordering), _bits(Z_other, ordering)
    return np.abs(B[:, :, None, :] - B_other[:, None, :, :]).sum(axis=(0, 3)).astype(np.int64)


def z_alignment(Z, Z_other, ordering: str = "pairclone", method: str = "auto") -> Tuple[int, np.ndarray]:
    """Minimum total column distance over column permutations.

    Returns:
        tuple: (distance, perm) with column c of ``Z`` matched to column
        perm[c] of ``Z_other``.
    """
    Z, Z_other = np.asarray(Z), np.asarray(Z_other)
    if Z.shape != Z_other.shape:
        raise DimensionError(f"Genotype matrices differ in shape: {Z.shape} vs {Z_other.shape}")
    D = distance_matrix(Z, Z_other, ordering)
    C = D.shape[0]
    if method == "auto":
        method = "exhaustive" if C <= MAX_EXHAUSTIVE_C else "assignment"
    if method == "exhaustive":
        rows = np.arange(C)
        best, best_perm = None, None
        for perm in itertools.permutations(range(C)):
            value = int(D[rows, perm].sum())
            if best is None or value < best:
                best, best_perm = value, np.array(perm)
        return best, best_perm
    if method == "assignment":
        rows, cols = linear_sum_assignment(D)
        return int(D[rows, cols].sum()), cols
    raise ValueError(f"Unknown alignment method '{method}'")


def z_distance(Z, Z_other, ordering: str = "pairclone", method: str = "auto") -> int:
    return z_alignment(Z, Z_other, ordering, method)[0]


def align_to(Z_ref, Z, ordering: str = "pairclone") -> np.ndarray:
    """Columns of Z reordered to best match Z_ref."""
    _, perm = z_alignment(Z_ref, Z, ordering)
    return np.asarray(Z)[:, perm]


def total_distances(
    Zs: Sequence[np.ndarray],
    ordering: str = "pairclone",
    num_workers: int = 1,
    disable_progress: bool = True,
) -> np.ndarray:
    """sum over l' of d(Z_l, Z_l') for every l.

    Identical matrices are grouped first, so the cost grows with the number
    of distinct draws rather than the number of draws.
    """
    keys = [np.ascontiguousarray(Z).tobytes() + bytes(str(np.shape(Z)), "ascii") for Z in Zs]
    unique_index: Dict[bytes, int] = {}
    members = []
    for i, key in enumerate(keys):
        if key not in unique_index:
            unique_index[key] = len(members)
            members.append(i)
    which = np.array([unique_index[k] for k in keys])
    mult = np.bincount(which, minlength=len(members))
    logger.debug("{} distinct genotype matrices among {} draws", len(members), len(Zs))

    def row(u: int) -> float:
        return float(
            sum(
                mult[v] * z_distance(Zs[members[u]], Zs[members[v]], ordering)
                for v in range(len(members))
                if v != u
            )
        )

    todo = list(range(len(members)))
    if num_workers > 1:
        per_unique = np.array(multi_process_function(row, todo, num_workers, "Pairwise distances"))
    else:
        per_unique = np.array([row(u) for u in tqdm(todo, desc="Pairwise distances", disable=disable_progress)])
    return per_unique[which]


# ---------------------------------------------------------------------------
# Point estimates
# ---------------------------------------------------------------------------


def select_point_estimate(
    samples: PosteriorSamples,
    C_hat: int,
    max_pairwise: int = 2000,
    num_workers: int = 1,
    disable_progress: bool = True,
) -> PointEstimate:
    """The draw at C_hat with the smallest total distance to the others.

    w and rho come from the same draw. Ties go to the earliest draw. With
    more than ``max_pairwise`` draws at C_hat an evenly spaced subset is used.
    """
    matches = samples.select(C_hat)
    if not matches:
        raise EstimationError(f"No posterior draws with C={C_hat}")
    if len(matches) > max_pairwise:
        keep = np.unique(np.linspace(0, len(matches) - 1, max_pairwise).round().astype(int))
        logger.info("Using {} of {} draws for the pairwise distances", len(keep), len(matches))
        matches = [matches[i] for i in keep]
    totals = total_distances(
        [d.Z for _, d in matches], samples.ordering, num_workers, disable_progress
    )
    best = int(np.argmin(totals))
    index, draw = matches[best]
    return PointEstimate.from_draw(draw, index)


def map_estimate(samples: PosteriorSamples, C_hat: int, tree_hat: Sequence[int]) -> PointEstimate:
    """The draw at (C_hat, tree_hat) maximising log p(n|x) + log p(x|T, C)."""
    matches = samples.select(C_hat, tree_hat)
    if not matches:
        raise EstimationError(f"No posterior draws with C={C_hat} and tree={tuple(tree_hat)}")
    values = np.array(
        [d.map_value if d.map_value is not None else d.log_post for _, d in matches],
        dtype=np.float64,
    )
    best = int(np.argmax(values))
    index, draw = matches[best]
    return PointEstimate.from_draw(draw, index)


# ---------------------------------------------------------------------------
# Posterior tables
# ---------------------------------------------------------------------------


def posterior_of_C(samples: PosteriorSamples) -> Dict[int, float]:
    """Relative frequency of each number of subclones, keys ascending."""
    if len(samples) == 0:
        raise EstimationError("No posterior draws")
    sizes, counts = np.unique(samples.sizes(), return_counts=True)
    return {int(C): float(n) / len(samples) for C, n in zip(sizes, counts)}


def posterior_mode(table: Dict) -> object:
    """Key with the highest probability; ties go to the smallest key."""
    if not table:
        raise EstimationError("Empty posterior table")
    top = max(table.values())
    return min(k for k, p in table.items() if p == top)


def posterior_of_tree(
    samples: PosteriorSamples, top: Optional[int] = None
) -> List[Tuple[Topology, int, float]]:
    """(tree, C, probability) rows, most probable first; ties by (C, tree)."""
    if len(samples) == 0:
        raise EstimationError("No posterior draws")
    counts: Dict[Tuple[int, Topology], int] = {}
    for d in samples:
        if d.tree is None:
            raise EstimationError("Draws carry no tree topology")
        counts[(d.C, d.tree)] = counts.get((d.C, d.tree), 0) + 1
    rows = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    table = [(tree, C, n / len(samples)) for (C, tree), n in rows]
    return table if top is None else table[:top]


def tree_mode(samples: PosteriorSamples) -> Tuple[Topology, int]:
    tree, C, _ = posterior_of_tree(samples, top=1)[0]
    return tree, C
