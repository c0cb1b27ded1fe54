"""
Subclone phylogenies and the genotype prior they induce.

A topology is a parent vector stored as a tuple of 1-based node labels,
``parent[0] == 0`` for the normal clone at the root. Column c of a genotype
matrix (0-based) belongs to node c+1.

Each child subclone copies its parent's genotypes and gains a truncated
Poisson number of new single-locus mutations, at most one per pair, placed
uniformly over the parent's unmutated slots.
"""

import itertools
from collections import deque
from functools import lru_cache
from typing import List, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.special import gammaln, logsumexp
from scipy.stats import poisson

from core.errors import DimensionError, TopologyError
from core.genotype import NUM_CODES, bits_table, code_lookup, mutation_counts

MAX_ENUMERATION_C = 8

Topology = Tuple[int, ...]


def validate_topology(parent: Sequence[int]) -> Topology:
    """Check a parent vector and return it as a tuple of ints."""
    parent = tuple(int(p) for p in parent)
    C = len(parent)
    if C == 0 or parent[0] != 0:
        raise TopologyError(f"Parent vector must start with 0 for the root, got {parent}")
    for c in range(1, C):
        if not 1 <= parent[c] <= C or parent[c] == c + 1:
            raise TopologyError(f"Invalid parent {parent[c]} for node {c + 1} in {parent}")
    for c in range(1, C):
        seen = set()
        node = c + 1
        while node != 1:
            if node in seen:
                raise TopologyError(f"Parent vector {parent} contains a cycle")
            seen.add(node)
            node = parent[node - 1]
    return parent


def depths(parent: Sequence[int]) -> np.ndarray:
    """Generations between each node and the root."""
    parent = validate_topology(parent)
    eta = np.zeros(len(parent), dtype=np.int64)
    for c in traversal_order(parent)[1:]:
        eta[c] = eta[parent[c] - 1] + 1
    return eta


def traversal_order(parent: Topology) -> List[int]:
    """0-based nodes in breadth-first order from the root; parents precede children."""
    children = [[] for _ in parent]
    for c in range(1, len(parent)):
        children[parent[c] - 1].append(c)
    order, queue = [], deque([0])
    while queue:
        node = queue.popleft()
        order.append(node)
        queue.extend(children[node])
    return order


def log_prior_tree(parent: Sequence[int], beta: float) -> float:
    """Unnormalised log p(T | C) = -beta * sum_c log(1 + eta_c)."""
    return float(-beta * np.log1p(depths(parent)).sum())


def _decode_pruefer(seq: Sequence[int], n: int) -> Topology:
    degree = [1] * (n + 1)
    for x in seq:
        degree[x] += 1
    edges = []
    for x in seq:
        leaf = next(i for i in range(1, n + 1) if degree[i] == 1)
        edges.append((leaf, x))
        degree[leaf] -= 1
        degree[x] -= 1
    u, v = [i for i in range(1, n + 1) if degree[i] == 1]
    edges.append((u, v))

    adjacency = {i: [] for i in range(1, n + 1)}
    for a, b in edges:
        adjacency[a].append(b)
        adjacency[b].append(a)
    parent = [0] * n
    queue, seen = deque([1]), {1}
    while queue:
        node = queue.popleft()
        for nxt in adjacency[node]:
            if nxt not in seen:
                seen.add(nxt)
                parent[nxt - 1] = node
                queue.append(nxt)
    return tuple(parent)


@lru_cache(maxsize=None)
def enumerate_topologies(C: int, c_max: int = MAX_ENUMERATION_C) -> Tuple[Topology, ...]:
    """Every rooted labelled tree on C nodes with node 1 as root (C^(C-2) of them)."""
    if C < 1:
        raise TopologyError(f"Tree size must be >= 1, got {C}")
    if C > min(c_max, MAX_ENUMERATION_C):
        raise TopologyError(
            f"Refusing to enumerate trees with C={C} > {min(c_max, MAX_ENUMERATION_C)}"
        )
    if C == 1:
        return ((0,),)
    if C == 2:
        return ((0, 1),)
    trees = {
        _decode_pruefer(seq, C) for seq in itertools.product(range(1, C + 1), repeat=C - 2)
    }
    logger.debug("Enumerated {} topologies with C={}", len(trees), C)
    return tuple(sorted(trees))


@lru_cache(maxsize=None)
def log_tree_normalizer(C: int, beta: float) -> float:
    return float(logsumexp([log_prior_tree(tree, beta) for tree in enumerate_topologies(C)]))


def log_prior_tree_normalized(parent: Sequence[int], beta: float) -> float:
    """log p(T | C), normalised over all topologies of the same size."""
    return log_prior_tree(parent, beta) - log_tree_normalizer(len(parent), beta)


@lru_cache(maxsize=None)
def topology_space(c_min: int, c_max: int) -> Tuple[Topology, ...]:
    return tuple(tree for C in range(c_min, c_max + 1) for tree in enumerate_topologies(C))


def sample_uniform_tree(c_min: int, c_max: int, rng: np.random.Generator) -> Tuple[Topology, int]:
    """Uniform draw over the union of all topologies with c_min <= C <= c_max."""
    space = topology_space(c_min, c_max)
    tree = space[rng.integers(len(space))]
    return tree, len(tree)


# ---------------------------------------------------------------------------
# Truncated Poisson
# ---------------------------------------------------------------------------


def trunc_poisson_logpmf(m, lam: float, lo: int, hi) -> np.ndarray:
    """log Pois(m; lam) restricted to lo <= m <= hi; ``hi`` may be an array."""
    m = np.asarray(m)
    hi = np.asarray(hi)
    hi_max = max(int(np.max(hi)), lo)
    j = np.arange(hi_max + 1)
    masked = np.where(j >= lo, poisson.logpmf(j, lam), -np.inf)
    log_cum = np.logaddexp.accumulate(masked)
    norm = log_cum[np.clip(hi, 0, hi_max)]
    inside = (m >= lo) & (m <= hi)
    with np.errstate(invalid="ignore"):
        value = poisson.logpmf(m, lam) - norm
    return np.where(inside, value, -np.inf)


def sample_trunc_poisson(lam: float, lo: int, hi: int, rng: np.random.Generator) -> int:
    support = np.arange(lo, hi + 1)
    logp = poisson.logpmf(support, lam)
    p = np.exp(logp - logp.max())
    return int(rng.choice(support, p=p / p.sum()))


def log_comb(n, k) -> np.ndarray:
    n = np.asarray(n, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    valid = (k >= 0) & (k <= n)
    safe_k = np.where(valid, k, 0.0)
    value = gammaln(n + 1) - gammaln(safe_k + 1) - gammaln(n - safe_k + 1)
    return np.where(valid, value, np.inf)


# ---------------------------------------------------------------------------
# Genotype transitions along an edge
# ---------------------------------------------------------------------------


def _bits_key(bits) -> int:
    return int(8 * bits[0] + 4 * bits[1] + 2 * bits[2] + bits[3])


@lru_cache(maxsize=None)
def extension_table(ordering: str = "tree") -> np.ndarray:
    """ext[p, q]: number of empty slots of code p whose mutation gives code q."""
    bits = bits_table(ordering)
    lookup = code_lookup(ordering)
    ext = np.zeros((NUM_CODES, NUM_CODES), dtype=np.int64)
    for p in range(NUM_CODES):
        for slot in np.flatnonzero(bits[p] == 0):
            b = bits[p].copy()
            b[slot] = 1
            ext[p, lookup[_bits_key(b)]] += 1
    ext.setflags(write=False)
    return ext


@lru_cache(maxsize=None)
def log_slot_table(ordering: str = "tree") -> np.ndarray:
    """log P(child code q | parent code p, one new mutation at this pair)."""
    ext = extension_table(ordering)
    empty = 4 - mutation_counts(ordering)
    with np.errstate(divide="ignore", invalid="ignore"):
        table = np.log(ext / empty[:, None])
    table[~np.isfinite(table)] = -np.inf
    table.setflags(write=False)
    return table


def _check_tree_matrix(Z, parent):
    parent = validate_topology(parent)
    Z = np.asarray(Z)
    if Z.ndim != 2 or Z.shape[1] != len(parent):
        raise DimensionError(
            f"Genotype matrix has shape {Z.shape} but the tree has {len(parent)} nodes"
        )
    return Z, parent


def log_prior_Z_given_tree(Z, parent: Sequence[int], lam: float, ordering: str = "tree") -> float:
    """log p(Z | T, C); -inf for genotypes the generative process cannot produce."""
    Z, parent = _check_tree_matrix(Z, parent)
    if (Z[:, 0] != 0).any():
        return -np.inf
    ell = mutation_counts(ordering)
    log_slot = log_slot_table(ordering)
    total = 0.0
    for c in traversal_order(parent)[1:]:
        zp, zc = Z[:, parent[c] - 1], Z[:, c]
        L = int((ell[zp] < 4).sum())
        changed = zc != zp
        m = int(changed.sum())
        if not 1 <= m <= L:
            return -np.inf
        slots = log_slot[zp[changed], zc[changed]]
        if not np.isfinite(slots).all():
            return -np.inf
        total += float(trunc_poisson_logpmf(m, lam, 1, L)) - float(log_comb(L, m)) + slots.sum()
    return total


def sample_Z_given_tree(
    parent: Sequence[int], K: int, lam: float, rng: np.random.Generator, ordering: str = "tree"
) -> np.ndarray:
    """Draw a genotype matrix from the tree-structured prior."""
    parent = validate_topology(parent)
    bits = bits_table(ordering)
    lookup = code_lookup(ordering)
    ell = mutation_counts(ordering)
    Z = np.zeros((K, len(parent)), dtype=np.int64)
    for c in traversal_order(parent)[1:]:
        zp = Z[:, parent[c] - 1]
        open_pairs = np.flatnonzero(ell[zp] < 4)
        if open_pairs.size == 0:
            raise TopologyError(f"Parent of node {c + 1} has no unmutated slot left")
        m = sample_trunc_poisson(lam, 1, open_pairs.size, rng)
        zc = zp.copy()
        for k in np.sort(rng.choice(open_pairs, size=m, replace=False)):
            b = bits[zp[k]].copy()
            b[rng.choice(np.flatnonzero(b == 0))] = 1
            zc[k] = lookup[_bits_key(b)]
        Z[:, c] = zc
    return Z


@lru_cache(maxsize=None)
def row_candidates(parent: Topology, ordering: str = "tree") -> np.ndarray:
    """Every row reachable from the root with at most one new mutation per edge."""
    ext = extension_table(ordering)
    successors = [[p] + list(np.flatnonzero(ext[p] > 0)) for p in range(NUM_CODES)]
    C = len(parent)
    rows = [[0] * C]
    for c in traversal_order(parent)[1:]:
        par = parent[c] - 1
        expanded = []
        for row in rows:
            for q in successors[row[par]]:
                new = list(row)
                new[c] = int(q)
                expanded.append(new)
        rows = expanded
    out = np.array(rows, dtype=np.int64)
    out.setflags(write=False)
    return out


def row_log_prior(Z, parent: Sequence[int], k: int, lam: float, ordering: str = "tree"):
    """log p(Z | T) as a function of row k over every reachable candidate row.

    Terms that do not involve row k are dropped, so values are correct up to
    a shared constant.

    Returns:
        tuple: (candidates (n, C), log prior (n,)), -inf where infeasible.
    """
    Z, parent = _check_tree_matrix(Z, parent)
    cands = row_candidates(parent, ordering)
    ell = mutation_counts(ordering)
    log_slot = log_slot_table(ordering)
    others = np.delete(Z, k, axis=0)
    logp = np.zeros(len(cands))
    for c in range(1, len(parent)):
        par = parent[c] - 1
        m_other = int((others[:, c] != others[:, par]).sum())
        L_other = int((ell[others[:, par]] < 4).sum())
        changed = cands[:, c] != cands[:, par]
        m = m_other + changed
        L = L_other + (ell[cands[:, par]] < 4)
        slot = np.where(changed, log_slot[cands[:, par], cands[:, c]], 0.0)
        logp = logp + trunc_poisson_logpmf(m, lam, 1, L) - log_comb(L, m) + slot
    return cands, logp


def admissible_row_values(Z, parent: Sequence[int], k: int, ordering: str = "tree") -> np.ndarray:
    """Rows that keep p(Z | T) positive when every other row is held fixed."""
    Z = np.asarray(Z)
    # positivity does not depend on the rate
    cands, logp = row_log_prior(Z, parent, k, lam=1.0, ordering=ordering)
    return cands[np.isfinite(logp)]
