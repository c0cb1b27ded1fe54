"""
Count-level data generator.

A ``SimSpec`` fixes the truth design (genotypes, weights, noise, missing-read
shares, read depth); ``generate`` turns it into multinomial read counts plus
the truth bundle used for scoring. Genotype codes in a ``SimSpec`` are 1-based
codes of its ordering, as in output files.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from core.errors import ConfigError, DimensionError
from core.genotype import NUM_CODES, check_ordering
from core.likelihood import ReadCounts, embed_snv, full_read_probs, read_probs, split_snv_rows
from core.priors import log_theta_to_w, sample_log_gamma, sample_rho
from core.tree import sample_Z_given_tree, validate_topology

# (first pair, last pair, subclone column, code), all 1-based and inclusive
Block = Tuple[int, int, int, int]


@dataclass
class SimSpec:
    """Design of one synthetic dataset.

    Attributes:
        T, K, C: samples, rows (pairs plus SNVs) and generating subclones.
        Z: explicit (K, C) matrix of 1-based codes.
        blocks: block design used when ``Z`` is not given.
        block_K: K the block ranges were written for; rows are rescaled to ``K``.
        w: explicit weights, (C+1,) or (T, C+1), background first.
        w_concentration: subclone Dirichlet concentrations, permuted per sample.
        w_background: Dirichlet concentration of the background subclone.
        rho: explicit noise vector; drawn from the prior with ``d1`` otherwise.
        v: left and right missing share, one value or one per row.
        v_jitter: half-width of a uniform per-(t, k) perturbation of ``v``.
        n_range: inclusive range of the total reads N_tk.
        purity: turn the first generating subclone into the normal clone.
        snv_start: 1-based row from which pairs are reduced to SNV counts.
        tree: parent vector; Z is then drawn from the tree-structured prior.
        lam: mutations per branch for the tree draw, 2K/C when unset.
        z_seed: seed of the tree draw, so the genotype truth stays fixed.
    """

    T: int
    K: int
    C: int
    Z: Optional[np.ndarray] = None
    blocks: Optional[List[Block]] = None
    block_K: Optional[int] = None
    w: Optional[np.ndarray] = None
    w_concentration: Optional[Sequence[float]] = None
    w_background: float = 0.01
    rho: Optional[np.ndarray] = None
    d1: float = 1.0
    v: Union[float, Sequence[float]] = 0.3
    v_jitter: float = 0.0
    n_range: Tuple[int, int] = (400, 600)
    purity: bool = False
    snv_start: Optional[int] = None
    tree: Optional[Sequence[int]] = None
    lam: Optional[float] = None
    z_seed: Optional[int] = None
    ordering: str = "pairclone"
    seed: int = 0
    name: str = "custom"

    def validate(self) -> "SimSpec":
        if min(self.T, self.K, self.C) < 1:
            raise ConfigError(f"T, K and C must be positive, got ({self.T}, {self.K}, {self.C})")
        check_ordering(self.ordering)
        lo, hi = self.n_range
        if not 0 < lo <= hi:
            raise ConfigError(f"Read-depth range must satisfy 0 < lo <= hi, got {self.n_range}")
        sources = sum(x is not None for x in (self.Z, self.blocks, self.tree))
        if sources != 1:
            raise ConfigError("Give exactly one of Z, blocks or tree for the genotype truth")
        if self.Z is not None and np.shape(self.Z) != (self.K, self.C):
            raise DimensionError(f"Z must have shape ({self.K}, {self.C}), got {np.shape(self.Z)}")
        if self.tree is not None:
            if len(validate_topology(self.tree)) != self.C:
                raise ConfigError(f"Tree {tuple(self.tree)} does not have C={self.C} nodes")
            if self.purity:
                raise ConfigError("The tree design already carries a normal clone; drop 'purity'")
        if (self.w is None) == (self.w_concentration is None):
            raise ConfigError("Give exactly one of w or w_concentration")
        if self.w_concentration is not None and len(self.w_concentration) != self.C:
            raise ConfigError(f"Need {self.C} Dirichlet concentrations, got {len(self.w_concentration)}")
        if self.purity and self.C < 2:
            raise ConfigError("The purity design needs at least two generating subclones")
        v = np.atleast_1d(np.asarray(self.v, dtype=np.float64))
        if v.size not in (1, self.K):
            raise DimensionError(f"v needs 1 or K={self.K} entries, got {v.size}")
        if (v < 0).any() or (v + self.v_jitter >= 0.5).any() or (v - self.v_jitter < 0).any():
            raise ConfigError("Missing shares (with jitter) must stay in [0, 0.5)")
        if self.snv_start is not None and not 2 <= self.snv_start <= self.K:
            raise ConfigError(f"snv_start must be in [2, K], got {self.snv_start}")
        return self

    @property
    def k_pairs(self) -> int:
        return self.K if self.snv_start is None else self.snv_start - 1


@dataclass
class Truth:
    """Simulation truth; ``Z`` holds 0-based codes of ``ordering``."""

    Z: np.ndarray
    w: np.ndarray
    rho: np.ndarray
    v: np.ndarray
    p: np.ndarray
    ordering: str
    k_pairs: int
    w_star: Optional[np.ndarray] = None
    tree: Optional[Tuple[int, ...]] = None
    extra: dict = field(default_factory=dict)

    @property
    def C(self) -> int:
        return self.Z.shape[1]

    def split(self):
        """(pair block of 0-based codes, SNV block of locus-1 variant fractions)."""
        return split_snv_rows(self.Z, self.k_pairs, self.ordering)


def block_design(
    K: int, C: int, blocks: Sequence[Block], block_K: Optional[int] = None, fill: int = 1
) -> np.ndarray:
    """Genotype matrix of 1-based codes from (first, last, column, code) blocks.

    Rows outside every block keep ``fill``. When ``block_K`` differs from ``K``
    the row ranges are rescaled proportionally.
    """
    block_K = block_K or K
    Z = np.full((K, C), fill, dtype=np.int64)
    for first, last, column, code in blocks:
        if not 1 <= first <= last <= block_K:
            raise ConfigError(f"Block rows {first}-{last} outside 1..{block_K}")
        if not 1 <= column <= C or not 1 <= code <= NUM_CODES:
            raise ConfigError(f"Invalid block column {column} or code {code}")
        lo = int(round((first - 1) * K / block_K))
        hi = int(round(last * K / block_K))
        Z[lo:hi, column - 1] = code
    return Z


def class_shares(v, T: int, K: int) -> np.ndarray:
    """Class shares (1 - 2v, v, v) for every (t, k); ``v`` is a scalar or per row."""
    v = np.broadcast_to(np.asarray(v, dtype=np.float64), (T, K))
    if (v < 0).any() or (v >= 0.5).any():
        raise ConfigError("Missing share must be in [0, 0.5)")
    return np.stack([1.0 - 2.0 * v, v, v], axis=-1)


def simulate_counts(p_tilde: np.ndarray, N: np.ndarray, v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Multinomial read counts with conditional probabilities p~ and class shares v."""
    p = full_read_probs(p_tilde, v)
    p = p / p.sum(axis=-1, keepdims=True)
    return rng.multinomial(N, p)


def dirichlet_weights(
    T: int, concentration: Sequence[float], background: float, rng: np.random.Generator
) -> np.ndarray:
    """w_t ~ Dir(background, sigma_t(concentration)) with a fresh permutation per sample."""
    w = np.empty((T, len(concentration) + 1))
    for t in range(T):
        shapes = np.concatenate([[background], rng.permutation(np.asarray(concentration, dtype=np.float64))])
        w[t] = log_theta_to_w(sample_log_gamma(shapes, rng))
    return w


def _truth_genotypes(spec: SimSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.Z is not None:
        Z = np.asarray(spec.Z, dtype=np.int64)
        if Z.min() < 1 or Z.max() > NUM_CODES:
            raise ConfigError("Explicit Z must hold codes 1..10")
        return Z - 1
    if spec.blocks is not None:
        return block_design(spec.K, spec.C, spec.blocks, spec.block_K) - 1
    z_rng = rng if spec.z_seed is None else np.random.default_rng(spec.z_seed)
    lam = spec.lam if spec.lam is not None else 2.0 * spec.K / spec.C
    return sample_Z_given_tree(spec.tree, spec.K, lam, z_rng, spec.ordering)


def _truth_weights(spec: SimSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.w is None:
        return dirichlet_weights(spec.T, spec.w_concentration, spec.w_background, rng)
    w = np.atleast_2d(np.asarray(spec.w, dtype=np.float64))
    if w.shape[1] != spec.C + 1 or w.shape[0] not in (1, spec.T):
        raise DimensionError(f"w must have C+1={spec.C + 1} columns and 1 or T={spec.T} rows")
    if (w < 0).any() or not np.allclose(w.sum(axis=1), 1.0):
        raise ConfigError("Each row of w must be a probability vector")
    return np.broadcast_to(w, (spec.T, spec.C + 1)).copy()


def _reduce_to_snv(n: np.ndarray, p: np.ndarray, k_pairs: int):
    """Keep only locus-1 information for rows k_pairs.. and embed it as right-missing reads."""
    block = n[:, k_pairs:]
    total = block[..., [0, 1, 2, 3, 6, 7]].sum(-1)
    variant = block[..., [2, 3, 7]].sum(-1)
    n = n.copy()
    n[:, k_pairs:] = embed_snv(total, variant)

    pb = p[:, k_pairs:]
    observed = pb[..., [0, 1, 2, 3, 6, 7]].sum(-1)
    p = p.copy()
    p[:, k_pairs:] = 0.0
    p[:, k_pairs:, 7] = pb[..., [2, 3, 7]].sum(-1) / observed
    p[:, k_pairs:, 6] = 1.0 - p[:, k_pairs:, 7]
    return n, p


def generate(spec: SimSpec, rng: Optional[np.random.Generator] = None) -> Tuple[ReadCounts, Truth]:
    """Draw one dataset.

    Args:
        spec: Dataset design
        rng: Random generator, ``default_rng(spec.seed)`` when omitted

    Returns:
        tuple: (read counts, truth bundle)
    """
    spec.validate()
    rng = rng if rng is not None else np.random.default_rng(spec.seed)

    Z = _truth_genotypes(spec, rng)
    w = _truth_weights(spec, rng)
    rho = np.asarray(spec.rho, dtype=np.float64) if spec.rho is not None else sample_rho(spec.d1, rng)

    w_star = None
    if spec.purity:
        w_star = w[:, 1].copy()
        w = np.delete(w, 1, axis=1)
        Z = np.delete(Z, 0, axis=1)

    v_rows = np.broadcast_to(np.asarray(spec.v, dtype=np.float64), (spec.K,))
    v_tk = np.broadcast_to(v_rows, (spec.T, spec.K)).copy()
    if spec.v_jitter > 0:
        v_tk += rng.uniform(-spec.v_jitter, spec.v_jitter, size=v_tk.shape)
    v = class_shares(v_tk, spec.T, spec.K)

    p_tilde = read_probs(Z, w, rho, spec.ordering, w_star)
    lo, hi = spec.n_range
    N = rng.integers(lo, hi + 1, size=(spec.T, spec.K))
    n = simulate_counts(p_tilde, N, v, rng)
    p = full_read_probs(p_tilde, v)

    pair_ids = [f"p{k + 1}" for k in range(spec.k_pairs)]
    if spec.snv_start is not None:
        n, p = _reduce_to_snv(n, p, spec.k_pairs)
        pair_ids += [f"snv{j + 1}" for j in range(spec.K - spec.k_pairs)]

    counts = ReadCounts(n, [f"s{t + 1}" for t in range(spec.T)], pair_ids)
    truth = Truth(
        Z=Z,
        w=w,
        rho=rho,
        v=v,
        p=p,
        ordering=spec.ordering,
        k_pairs=spec.k_pairs,
        w_star=w_star,
        tree=None if spec.tree is None else validate_topology(spec.tree),
        extra={"preset": spec.name, "seed": spec.seed},
    )
    logger.debug(
        "Generated '{}' with T={}, K={}, C={} ({} pairs)", spec.name, spec.T, spec.K, truth.C, spec.k_pairs
    )
    return counts, truth


@dataclass
class RatesReport:
    """Empirical outcome frequencies against the generating probabilities."""

    max_deviation: float
    max_z: float
    impossible_draws: int
    z_limit: float

    @property
    def ok(self) -> bool:
        return self.impossible_draws == 0 and self.max_z < self.z_limit


def empirical_rates_check(
    counts: ReadCounts, truth: Truth, z_limit: float = 6.0, min_expected: float = 5.0
) -> RatesReport:
    """Compare n/N with the truth probabilities cell by cell.

    Deviations are scaled by the binomial standard error at the drawn N, so
    ``max_z`` stays of order sqrt(2 log(cells)) for a correct generator. Only
    cells expecting at least ``min_expected`` reads enter ``max_z``; reads in
    cells of probability zero are counted separately.
    """
    if counts.n.shape != truth.p.shape:
        raise DimensionError(f"Counts {counts.n.shape} do not match truth {truth.p.shape}")
    N = counts.N[..., None]
    covered = np.broadcast_to(N > 0, counts.n.shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        freq = np.where(covered, counts.n / N, truth.p)
        se = np.sqrt(truth.p * (1.0 - truth.p) / N)
        z = np.where(se > 0, np.abs(freq - truth.p) / se, 0.0)
    scored = covered & (N * truth.p >= min_expected)
    impossible = int(((truth.p == 0) & (counts.n > 0)).sum())
    return RatesReport(
        max_deviation=float(np.abs(freq - truth.p).max()),
        max_z=float(z[scored].max()) if scored.any() else 0.0,
        impossible_draws=impossible,
        z_limit=z_limit,
    )
