"""
Transition kernels for a single chain at temperature ``temper``.

Every kernel leaves ``(prior x likelihood) ** (1 / temper)`` invariant, with
the prior taken in the coordinates the kernels work in: genotype codes,
(pi_1, pi~) for column probabilities, and unscaled gammas for weights and
noise. Log-scale random walks add the untempered Jacobian log(x~ / x).
"""

from typing import Optional, Tuple

import numpy as np
from scipy.special import xlogy

from core.errors import TopologyError
from core.genotype import NUM_CODES, match_table
from core.likelihood import ReadCounts
from core.priors import code_counts, log_gamma_pdf, rho_shapes
from core.tree import row_log_prior
from model.base import ModelState

PI_CLIP = 1e-12


def sample_log_categorical(log_weights, rng: np.random.Generator) -> np.ndarray:
    """Draw indices from unnormalised log weights along the last axis.

    Weights are exponentiated after subtracting the row maximum; the inverse
    CDF picks the lowest index on ties.
    """
    log_weights = np.asarray(log_weights, dtype=np.float64)
    top = log_weights.max(axis=-1, keepdims=True)
    p = np.exp(log_weights - top)
    cdf = np.cumsum(p, axis=-1)
    u = rng.random(log_weights.shape[:-1] + (1,)) * cdf[..., -1:]
    idx = (cdf <= u).sum(axis=-1)
    return np.minimum(idx, log_weights.shape[-1] - 1)


# ---------------------------------------------------------------------------
# Genotypes, flat model
# ---------------------------------------------------------------------------


def z_column_log_conditional(
    model, state: ModelState, counts: ReadCounts, c: int, rows=slice(None)
) -> np.ndarray:
    """Untempered log p(z_kc = q | rest) up to a per-row constant, shape (len(rows), 10)."""
    rows = np.atleast_1d(np.arange(state.K)[rows])
    w, w_star = model.weights(state)
    rho = model.noise(state)
    table = match_table(model.ordering)
    A = table[state.Z[rows]]  # (R, C, 8)
    others = np.delete(np.arange(state.C), c)
    base = np.einsum("tc,kcg->tkg", w[:, 1:][:, others], A[:, others])
    base = base + w[:, 0, None, None] * rho[None, None, :]
    if w_star is not None:
        base = base + w_star[:, None, None] * table[0][None, None, :]
    cand = base[:, :, None, :] + w[:, c + 1, None, None, None] * table[None, None, :, :]
    ll = xlogy(counts.n[:, rows, None, :], cand).sum(axis=(0, 3))
    with np.errstate(divide="ignore"):
        return ll + np.log(state.pi[c])[None, :]


def update_Z_entry(
    model, state: ModelState, counts: ReadCounts, k, c: int, rng, temper: float = 1.0
):
    """Gibbs draw of the genotype entry z_kc.

    ``k`` may also be a slice or an index array. Given everything outside
    column c the pairs are conditionally independent, so those entries are
    drawn jointly from their own conditionals.
    """
    logp = z_column_log_conditional(model, state, counts, c, rows=k) / temper
    draws = sample_log_categorical(logp, rng)
    if isinstance(k, (int, np.integer)):
        state.Z[k, c] = int(draws[0])
        return int(draws[0])
    state.Z[k, c] = draws
    return draws


def update_Z(model, state: ModelState, counts: ReadCounts, rng, temper: float = 1.0) -> None:
    """Gibbs sweep over all entries, one whole column at a time."""
    for c in range(state.C):
        update_Z_entry(model, state, counts, slice(None), c, rng, temper)


def update_pi(model, state: ModelState, rng, temper: float = 1.0) -> None:
    """Conjugate Beta-Dirichlet draw of every column's code probabilities."""
    hyper = model.hyper
    K, C = state.K, state.C
    m = code_counts(state.Z, NUM_CODES)
    a1 = m[:, 0] / temper + 1.0
    b1 = (K - m[:, 0] + hyper.alpha / C - 1.0) / temper + 1.0
    pi1 = np.clip(rng.beta(a1, b1), PI_CLIP, 1.0 - PI_CLIP)
    pi = np.empty((C, NUM_CODES))
    for c in range(C):
        rest = np.maximum(rng.dirichlet((m[c, 1:] + hyper.gamma - 1.0) / temper + 1.0), PI_CLIP)
        pi[c, 0] = pi1[c]
        pi[c, 1:] = (1.0 - pi1[c]) * rest / rest.sum()
    state.pi = pi


# ---------------------------------------------------------------------------
# Log-scale random walks
# ---------------------------------------------------------------------------


def update_gamma_block(
    model,
    state: ModelState,
    counts: ReadCounts,
    attr: str,
    shapes: np.ndarray,
    step: float,
    rng,
    temper: float = 1.0,
    jacobian: bool = True,
) -> Tuple[int, int]:
    """Metropolis-Hastings on each column of a (T, J) log-gamma block.

    The likelihood and prior factorise over samples, so all T rows of a
    column are proposed and accepted independently in one pass.
    """
    x = getattr(state, attr).copy()
    T, J = x.shape
    current_ll = model.loglik_by_sample(state, counts)
    accepted = 0
    for j in range(J):
        prop = x.copy()
        prop[:, j] = x[:, j] + step * rng.standard_normal(T)
        prop_ll = model.loglik_by_sample(state.replace(**{attr: prop}), counts)
        log_ratio = (
            prop_ll
            + log_gamma_pdf(prop[:, j], shapes[j])
            - current_ll
            - log_gamma_pdf(x[:, j], shapes[j])
        ) / temper
        if jacobian:
            log_ratio = log_ratio + prop[:, j] - x[:, j]
        with np.errstate(invalid="ignore"):
            accept = np.log(rng.random(T)) < log_ratio
        x[accept, j] = prop[accept, j]
        current_ll = np.where(accept, prop_ll, current_ll)
        setattr(state, attr, x.copy())
        accepted += int(accept.sum())
    return accepted, T * J


def update_theta(
    model, state: ModelState, counts: ReadCounts, rng, temper: float = 1.0, jacobian: Optional[bool] = None
) -> Tuple[int, int]:
    shapes = dict(model.gamma_blocks(state))["log_theta"]
    jacobian = model.jacobian if jacobian is None else jacobian
    return update_gamma_block(
        model, state, counts, "log_theta", shapes, model.theta_step, rng, temper, jacobian
    )


def update_phi(
    model, state: ModelState, counts: ReadCounts, rng, temper: float = 1.0
) -> Tuple[int, int]:
    shapes = dict(model.gamma_blocks(state))["log_phi"]
    return update_gamma_block(
        model, state, counts, "log_phi", shapes, model.theta_step, rng, temper, model.jacobian
    )


def update_rho_star(
    model, state: ModelState, counts: ReadCounts, rng, temper: float = 1.0, jacobian: bool = True
) -> Tuple[int, int]:
    """Metropolis-Hastings on each noise gamma in turn; shared by all samples."""
    shapes = rho_shapes(model.hyper.d1)
    x = state.log_rho_star.copy()
    current_ll = model.log_likelihood(state, counts)
    accepted = 0
    for g in range(x.size):
        prop = x.copy()
        prop[g] = x[g] + model.rho_step * rng.standard_normal()
        prop_ll = model.log_likelihood(state.replace(log_rho_star=prop), counts)
        log_ratio = (
            prop_ll + log_gamma_pdf(prop[g], shapes[g]) - current_ll - log_gamma_pdf(x[g], shapes[g])
        ) / temper
        if jacobian:
            log_ratio += prop[g] - x[g]
        if np.log(rng.random()) < log_ratio:
            x = prop
            current_ll = prop_ll
            accepted += 1
        state.log_rho_star = x.copy()
    return accepted, x.size


# ---------------------------------------------------------------------------
# Genotypes, tree model
# ---------------------------------------------------------------------------


def update_Z_row_tree(
    model, state: ModelState, counts: ReadCounts, k: int, rng, temper: float = 1.0
) -> np.ndarray:
    """Gibbs draw of row k over the rows the tree prior allows."""
    lam = model.lam(state.K, state.C)
    cands, log_prior = row_log_prior(state.Z, state.tree, k, lam, model.ordering)
    feasible = np.isfinite(log_prior)
    if not feasible.any():
        raise TopologyError(f"Row {k} has no value the tree {tuple(state.tree)} admits")
    cands, log_prior = cands[feasible], log_prior[feasible]

    w, w_star = model.weights(state)
    rho = model.noise(state)
    table = match_table(model.ordering)
    p = np.einsum("tc,ncg->tng", w[:, 1:], table[cands])
    p = p + w[:, 0, None, None] * rho[None, None, :]
    if w_star is not None:
        p = p + w_star[:, None, None] * table[0][None, None, :]
    ll = xlogy(counts.n[:, k, None, :], p).sum(axis=(0, 2))
    idx = int(sample_log_categorical((ll + log_prior) / temper, rng))
    state.Z[k] = cands[idx]
    return state.Z[k]
