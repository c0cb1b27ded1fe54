"""
Observation model for mutation-pair read counts.

Genotype matrices ``Z`` are (K, C) integer arrays of 0-based code indices into
the active ordering's tables; output files use the 1-based codes. Weights ``w``
are (T, C+1) arrays whose column 0 is the background subclone. The purity
variant adds ``w_star`` (T,), the share of a mutation-free normal subclone,
with ``w_star + w.sum(1) == 1``.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from loguru import logger
from scipy.special import xlogy

from core.errors import DataError, DimensionError
from core.genotype import NUM_OUTCOMES, OUTCOME_CLASS, match_table, snv_fraction


@dataclass
class ReadCounts:
    """Read counts n[t, k, g] for T samples, K pairs and the 8 read outcomes.

    Counts are integers on ingest and may become fractional after a train/test
    split. ``sample_ids`` and ``pair_ids`` are carried along for output files.
    """

    n: np.ndarray
    sample_ids: Optional[List[str]] = None
    pair_ids: Optional[List[str]] = None

    def __post_init__(self):
        self.n = np.asarray(self.n, dtype=np.float64)
        if self.n.ndim != 3 or self.n.shape[2] != NUM_OUTCOMES:
            raise DimensionError(
                f"Read counts must have shape (T, K, {NUM_OUTCOMES}), got {self.n.shape}"
            )
        if not np.isfinite(self.n).all() or (self.n < 0).any():
            raise DataError("Read counts must be finite and nonnegative")
        if self.sample_ids is None:
            self.sample_ids = [f"s{t + 1}" for t in range(self.T)]
        if self.pair_ids is None:
            self.pair_ids = [f"p{k + 1}" for k in range(self.K)]
        if len(self.sample_ids) != self.T or len(self.pair_ids) != self.K:
            raise DimensionError("Sample and pair ids must match the count array")

    @property
    def T(self) -> int:
        return self.n.shape[0]

    @property
    def K(self) -> int:
        return self.n.shape[1]

    @property
    def N(self) -> np.ndarray:
        """Total reads per (t, k)."""
        return self.n.sum(axis=2)

    def scaled(self, factor: float) -> "ReadCounts":
        return ReadCounts(self.n * factor, list(self.sample_ids), list(self.pair_ids))

    def append(self, other: "ReadCounts") -> "ReadCounts":
        """Concatenate another block of pairs (e.g. embedded SNVs) after these."""
        if other.T != self.T:
            raise DimensionError(f"Cannot append {other.T} samples to {self.T}")
        return ReadCounts(
            np.concatenate([self.n, other.n], axis=1),
            list(self.sample_ids),
            list(self.pair_ids) + list(other.pair_ids),
        )


@dataclass
class MissingRates:
    """Empirical class shares v[t, k, class]; NaN where a pair has no reads."""

    v: np.ndarray
    zero_coverage: np.ndarray = field(default=None)


def _check_shapes(Z, w, rho, counts=None, w_star=None):
    Z = np.asarray(Z)
    w = np.atleast_2d(np.asarray(w, dtype=np.float64))
    if Z.ndim != 2:
        raise DimensionError(f"Genotype matrix must be 2-D (K, C), got shape {Z.shape}")
    if w.shape[1] != Z.shape[1] + 1:
        raise DimensionError(
            f"Weights need C+1={Z.shape[1] + 1} columns for C={Z.shape[1]}, got {w.shape[1]}"
        )
    if np.shape(rho) != (NUM_OUTCOMES,):
        raise DimensionError(f"Noise vector must have {NUM_OUTCOMES} entries")
    if counts is not None:
        if counts.K != Z.shape[0] or counts.T != w.shape[0]:
            raise DimensionError(
                f"Counts are (T={counts.T}, K={counts.K}) but parameters are "
                f"(T={w.shape[0]}, K={Z.shape[0]})"
            )
    if w_star is not None and np.shape(w_star) != (w.shape[0],):
        raise DimensionError("w_star needs one entry per sample")
    return Z, w


def read_probs(Z, w, rho, ordering: str = "pairclone", w_star=None) -> np.ndarray:
    """Conditional read-outcome probabilities p~[t, k, g] for every sample and pair.

    Subclone terms are summed in sorted order, so the result does not depend
    on how the columns of ``Z`` (and the matching weights) are ordered.
    """
    Z, w = _check_shapes(Z, w, rho, w_star=w_star)
    table = match_table(ordering)
    A = table[Z].transpose(0, 2, 1)  # (K, 8, C)
    terms = w[:, None, None, 1:] * A[None]
    p = np.sort(terms, axis=-1).sum(axis=-1)
    p = p + w[:, 0, None, None] * np.asarray(rho)[None, None, :]
    if w_star is not None:
        p = p + np.asarray(w_star)[:, None, None] * table[0][None, None, :]
    return p


def conditional_read_probs(Z, w, rho, t: int, k: int, ordering: str = "pairclone", w_star=None):
    """p~ for one (sample t, pair k); 0-based indices."""
    Z, w = _check_shapes(Z, w, rho, w_star=w_star)
    ws = None if w_star is None else np.asarray(w_star)[t : t + 1]
    return read_probs(Z[k : k + 1], w[t : t + 1], rho, ordering, ws)[0, 0]


def loglik_terms(n: np.ndarray, p: np.ndarray) -> np.ndarray:
    """n * log p elementwise, 0 where n == 0 and -inf where n > 0 meets p == 0."""
    return xlogy(n, p)


def log_likelihood(
    counts: ReadCounts,
    Z,
    w,
    rho,
    temper: float = 1.0,
    ordering: str = "pairclone",
    w_star=None,
) -> float:
    """Multinomial kernel sum_{t,k,g} n log p~, divided by ``temper``.

    Multinomial coefficients and missing-class factors are constant in every
    sampled parameter and are left out. The value is ``-inf`` when a positive
    count meets a zero probability.
    """
    _check_shapes(Z, w, rho, counts=counts, w_star=w_star)
    p = read_probs(Z, w, rho, ordering, w_star)
    return float(loglik_terms(counts.n, p).sum()) / temper


def embed_snv(total, variant) -> np.ndarray:
    """Encode marginal SNV counts as right-missing reads at locus 1.

    Reference reads go to outcome ``0-`` and variant reads to ``1-``.
    Works elementwise on arrays and returns shape ``(..., 8)``.
    """
    total = np.asarray(total, dtype=np.float64)
    variant = np.asarray(variant, dtype=np.float64)
    if (variant < 0).any() or (total < 0).any():
        raise DataError("SNV counts must be nonnegative")
    if (variant > total).any():
        raise DataError("SNV variant count exceeds total count")
    out = np.zeros(np.broadcast(total, variant).shape + (NUM_OUTCOMES,))
    out[..., 6] = total - variant
    out[..., 7] = variant
    return out


def split_snv_rows(Z, k_pairs: int, ordering: str = "pairclone"):
    """Split a genotype matrix into the pair block and the embedded-SNV block.

    Returns:
        tuple: (Z_pairs of 0-based codes, Z_snv of locus-1 variant fractions).
    """
    Z = np.asarray(Z)
    return Z[:k_pairs], snv_fraction(Z[k_pairs:] + 1, ordering)


def empirical_missing_rates(counts: ReadCounts) -> MissingRates:
    """Share of complete, left-missing and right-missing reads per (t, k)."""
    N = counts.N
    zero = N <= 0
    groups = np.stack(
        [counts.n[..., 0:4].sum(-1), counts.n[..., 4:6].sum(-1), counts.n[..., 6:8].sum(-1)],
        axis=-1,
    )
    with np.errstate(invalid="ignore", divide="ignore"):
        v = groups / N[..., None]
    v[zero] = np.nan
    if zero.any():
        t_idx, k_idx = np.nonzero(zero)
        logger.warning(
            "{} (sample, pair) entries have zero coverage, e.g. ({}, {})",
            int(zero.sum()),
            counts.sample_ids[t_idx[0]],
            counts.pair_ids[k_idx[0]],
        )
    return MissingRates(v=v, zero_coverage=zero)


def full_read_probs(ptilde: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Scale conditional probabilities by the missing-class shares: p = v_class * p~."""
    return v[..., OUTCOME_CLASS] * ptilde


def residuals(counts: ReadCounts, Z, w, rho, ordering: str = "pairclone", w_star=None):
    """Fitted minus observed outcome frequencies, p^ - n/N, per (t, k, g).

    Entries for zero-coverage pairs are NaN.
    """
    _check_shapes(Z, w, rho, counts=counts, w_star=w_star)
    rates = empirical_missing_rates(counts)
    p_hat = full_read_probs(read_probs(Z, w, rho, ordering, w_star), rates.v)
    with np.errstate(invalid="ignore", divide="ignore"):
        p_bar = counts.n / counts.N[..., None]
    return p_hat - p_bar
