"""
Genotype algebra for mutation pairs.

A subclone's genotype at one mutation pair is a 2x2 binary allele matrix:
rows are the two alleles, columns the two loci, 1 marks the somatic variant.
Swapping the rows gives an indistinguishable genotype, so the 16 matrices
collapse onto 10 canonical codes.

Public functions take and return 1-based codes ``q`` and outcomes ``g`` as they
appear in output files. The lookup tables (``match_table``, ``bits_table`` ...)
are indexed by 0-based code and outcome positions and are what the sampler uses.
"""

from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np

from core.errors import ConfigError

NUM_CODES = 10
NUM_OUTCOMES = 8

# Each canonical code as (row1, row2) with rows read as 2-bit numbers z_j1 z_j2.
PAIRCLONE_CODES: Tuple[Tuple[int, int], ...] = (
    (0b00, 0b00),
    (0b00, 0b01),
    (0b00, 0b10),
    (0b00, 0b11),
    (0b01, 0b01),
    (0b01, 0b10),
    (0b01, 0b11),
    (0b10, 0b10),
    (0b10, 0b11),
    (0b11, 0b11),
)
# Tree-mode list: codes 7 and 8 trade places.
TREE_CODES: Tuple[Tuple[int, int], ...] = (
    PAIRCLONE_CODES[:6] + (PAIRCLONE_CODES[7], PAIRCLONE_CODES[6]) + PAIRCLONE_CODES[8:]
)

ORDERINGS = {"pairclone": PAIRCLONE_CODES, "tree": TREE_CODES}

# h_g as (locus 1, locus 2); None marks a missing locus.
OUTCOMES: Tuple[Tuple[Optional[int], Optional[int]], ...] = (
    (0, 0),
    (0, 1),
    (1, 0),
    (1, 1),
    (None, 0),
    (None, 1),
    (0, None),
    (1, None),
)
OUTCOME_LABELS = ("00", "01", "10", "11", "-0", "-1", "0-", "1-")
COUNT_COLUMNS = ("n00", "n01", "n10", "n11", "nm0", "nm1", "n0m", "n1m")

CLASS_NAMES = ("complete", "left_missing", "right_missing")
# class index of each outcome position
OUTCOME_CLASS = np.array([0, 0, 0, 0, 1, 1, 2, 2])
GROUP_SLICES = (slice(0, 4), slice(4, 6), slice(6, 8))


def check_ordering(ordering: str) -> Tuple[Tuple[int, int], ...]:
    try:
        return ORDERINGS[ordering]
    except KeyError:
        raise ConfigError(
            f"Unknown genotype ordering '{ordering}'. Available: {sorted(ORDERINGS)}"
        )


def _rows(m) -> Tuple[int, int]:
    m = np.asarray(m)
    if m.shape != (2, 2) or not np.isin(m, (0, 1)).all():
        raise ValueError(f"Allele matrix must be 2x2 binary, got {m.tolist()}")
    return int(2 * m[0, 0] + m[0, 1]), int(2 * m[1, 0] + m[1, 1])


def mirror(m) -> np.ndarray:
    """Swap the two allele rows."""
    return np.asarray(m)[::-1].copy()


def canonicalize(m, ordering: str = "pairclone") -> int:
    """Map an allele matrix to its 1-based genotype code.

    The representative is the lexicographic minimum over the two row orders,
    so ``canonicalize(m) == canonicalize(mirror(m))``.

    Args:
        m: 2x2 binary array-like, rows are alleles, columns are loci.
        ordering: ``"pairclone"`` or ``"tree"``.

    Returns:
        int: code q in 1..10.
    """
    codes = check_ordering(ordering)
    r1, r2 = _rows(m)
    return codes.index((min(r1, r2), max(r1, r2))) + 1


def representative(q: int, ordering: str = "pairclone") -> np.ndarray:
    """Canonical 2x2 allele matrix for a 1-based code."""
    codes = check_ordering(ordering)
    if not 1 <= int(q) <= NUM_CODES:
        raise ValueError(f"Genotype code must be in 1..{NUM_CODES}, got {q}")
    r1, r2 = codes[int(q) - 1]
    return np.array([[r1 >> 1, r1 & 1], [r2 >> 1, r2 & 1]], dtype=np.int64)


def match_prob(g: int, q: int, ordering: str = "pairclone") -> float:
    """A(h_g, z^(q)): probability that a read from genotype q shows outcome g.

    Each allele is sequenced with probability 0.5; a missing locus matches
    either base.
    """
    if not 1 <= int(g) <= NUM_OUTCOMES:
        raise ValueError(f"Read outcome must be in 1..{NUM_OUTCOMES}, got {g}")
    h1, h2 = OUTCOMES[int(g) - 1]
    z = representative(q, ordering)
    total = 0.0
    for allele in z:
        if (h1 is None or h1 == allele[0]) and (h2 is None or h2 == allele[1]):
            total += 0.5
    return total


def outcome_class(g: int) -> str:
    return CLASS_NAMES[OUTCOME_CLASS[int(g) - 1]]


@lru_cache(maxsize=None)
def match_table(ordering: str = "pairclone") -> np.ndarray:
    """(10, 8) array of A(h_g, z^(q)), indexed by 0-based code and outcome."""
    table = np.array(
        [
            [match_prob(g, q, ordering) for g in range(1, NUM_OUTCOMES + 1)]
            for q in range(1, NUM_CODES + 1)
        ]
    )
    table.setflags(write=False)
    return table


@lru_cache(maxsize=None)
def bits_table(ordering: str = "pairclone") -> np.ndarray:
    """(10, 4) array of representatives flattened as (z11, z12, z21, z22)."""
    table = np.array(
        [representative(q, ordering).ravel() for q in range(1, NUM_CODES + 1)]
    )
    table.setflags(write=False)
    return table


@lru_cache(maxsize=None)
def mutation_counts(ordering: str = "pairclone") -> np.ndarray:
    """Number of mutated slots per code (0 for q1, 4 for q10)."""
    counts = bits_table(ordering).sum(axis=1)
    counts.setflags(write=False)
    return counts


@lru_cache(maxsize=None)
def code_lookup(ordering: str = "pairclone") -> np.ndarray:
    """0-based code index for each of the 16 matrices, keyed by 8*z11+4*z12+2*z21+z22."""
    lookup = np.empty(16, dtype=np.int64)
    for key in range(16):
        m = [[(key >> 3) & 1, (key >> 2) & 1], [(key >> 1) & 1, key & 1]]
        lookup[key] = canonicalize(m, ordering) - 1
    lookup.setflags(write=False)
    return lookup


def snv_fraction(codes: Sequence[int], ordering: str = "pairclone") -> np.ndarray:
    """Variant allele fraction at locus 1 for 1-based codes (0, 0.5 or 1)."""
    bits = bits_table(ordering)[np.asarray(codes, dtype=np.int64) - 1]
    return (bits[..., 0] + bits[..., 2]) / 2.0
