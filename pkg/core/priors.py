"""
Prior densities and samplers.

Weights and noise probabilities are carried as unnormalised gamma variables
stored on the log scale (``log_theta``, ``log_rho_star``). Normalising them
gives Dirichlet-distributed simplex vectors. Storing logs keeps draws from
shapes such as 0.03 away from underflow.
"""

from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np
from scipy.special import gammaln, softmax, xlogy

from core.errors import ConfigError
from core.genotype import GROUP_SLICES, NUM_CODES, NUM_OUTCOMES

W_FLOOR = 1e-12
RHO_FLOOR = 1e-12
GEOMETRIC_FORMS = ("literal", "shifted")


@dataclass
class Hyperparams:
    """Hyperparameters of the flat model (and its purity variant)."""

    alpha: float = 4.0
    gamma: float = 2.0
    d0: float = 0.03
    d: float = 0.5
    d1: float = 1.0
    r: float = 0.4
    d1_star: float = 1.0
    d2_star: float = 1.0
    c_min: int = 1
    c_max: int = 10
    b: Optional[float] = None
    geometric_form: str = "literal"

    def validate(self) -> "Hyperparams":
        for name in ("alpha", "gamma", "d0", "d", "d1", "d1_star", "d2_star"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"Hyperparameter '{name}' must be positive")
        if not 0 < self.r < 1:
            raise ConfigError("Geometric parameter 'r' must be in (0, 1)")
        _check_c_range(self.c_min, self.c_max)
        _check_b(self.b)
        if self.geometric_form not in GEOMETRIC_FORMS:
            raise ConfigError(f"geometric_form must be one of {GEOMETRIC_FORMS}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TreeHyper:
    """Hyperparameters of the tree model.

    ``lam``, ``a_p`` and ``b_p`` default to 2K/C, d and d0 + (C-1)d, which
    depend on the size of the tree being evaluated.
    """

    alpha: float = 0.5
    beta: float = 0.5
    lam: Optional[float] = None
    a_p: Optional[float] = None
    b_p: Optional[float] = None
    d0: float = 0.03
    d: float = 0.5
    d1: float = 1.0
    c_min: int = 2
    c_max: int = 5
    b: Optional[float] = 0.95

    def validate(self) -> "TreeHyper":
        if not 0 < self.alpha < 1:
            raise ConfigError("Tree-size parameter 'alpha' must be in (0, 1)")
        for name in ("beta", "d0", "d", "d1"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"Hyperparameter '{name}' must be positive")
        for name in ("lam", "a_p", "b_p"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigError(f"Hyperparameter '{name}' must be positive")
        _check_c_range(self.c_min, self.c_max)
        _check_b(self.b)
        return self

    def lam_for(self, K: int, C: int) -> float:
        return self.lam if self.lam is not None else 2.0 * K / C

    def normal_shapes(self, C: int) -> np.ndarray:
        a_p = self.a_p if self.a_p is not None else self.d
        b_p = self.b_p if self.b_p is not None else self.d0 + (C - 1) * self.d
        return np.array([a_p, b_p])

    def to_dict(self) -> dict:
        return asdict(self)


def _check_c_range(c_min, c_max):
    if not 1 <= c_min <= c_max:
        raise ConfigError(f"Need 1 <= c_min <= c_max, got c_min={c_min}, c_max={c_max}")


def _check_b(b):
    if b is not None and not 0 < b < 1:
        raise ConfigError(f"Training fraction b must be in (0, 1), got {b}")


def hyper_fields(cls) -> set:
    return {f.name for f in fields(cls)}


# ---------------------------------------------------------------------------
# Number of subclones
# ---------------------------------------------------------------------------


def log_prior_C(C: int, r: float, form: str = "literal") -> float:
    """Geometric log prior on the number of subclones.

    ``literal`` is (1-r)^C r on C >= 1, which sums to 1-r; ``shifted`` is
    (1-r)^(C-1) r and normalises. Only ratios enter the sampler, and these
    agree between the two forms.
    """
    if C < 1:
        raise ValueError(f"Number of subclones must be >= 1, got {C}")
    if form == "literal":
        return C * np.log1p(-r) + np.log(r)
    if form == "shifted":
        return (C - 1) * np.log1p(-r) + np.log(r)
    raise ConfigError(f"Unknown geometric form '{form}'")


# ---------------------------------------------------------------------------
# Generic densities
# ---------------------------------------------------------------------------


def dirichlet_logpdf(x, a) -> np.ndarray:
    """Dirichlet log density over the last axis; -inf off the open simplex."""
    x = np.asarray(x, dtype=np.float64)
    a = np.broadcast_to(np.asarray(a, dtype=np.float64), x.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = (
            gammaln(a.sum(-1))
            - gammaln(a).sum(-1)
            + ((a - 1.0) * np.log(x)).sum(-1)
        )
    outside = (x <= 0).any(-1)
    return np.where(outside, -np.inf, value)


def log_gamma_pdf(log_x, shape) -> np.ndarray:
    """Ga(shape, 1) log density of x, evaluated from log x."""
    log_x = np.asarray(log_x, dtype=np.float64)
    return (shape - 1.0) * log_x - np.exp(log_x) - gammaln(shape)


def sample_log_gamma(shape, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw log X for X ~ Ga(shape, 1) without underflow for small shapes."""
    shape = np.asarray(shape, dtype=np.float64)
    if size is None:
        size = shape.shape
    g = rng.gamma(shape + 1.0, size=size)
    u = 1.0 - rng.random(size=size)
    return np.log(g) + np.log(u) / shape


# ---------------------------------------------------------------------------
# Column probabilities and Z | pi
# ---------------------------------------------------------------------------


def sample_beta_dirichlet(
    alpha: float, C: int, gamma: float, rng: np.random.Generator, num_codes: int = NUM_CODES
) -> np.ndarray:
    """pi_c1 ~ Be(1, alpha/C), the remaining mass split by Dir(gamma, ..., gamma)."""
    pi1 = rng.beta(1.0, alpha / C)
    rest = rng.dirichlet(np.full(num_codes - 1, gamma))
    return np.concatenate([[pi1], (1.0 - pi1) * rest])


def beta_dirichlet_logpdf(pi, alpha: float, C: int, gamma: float, coords: str = "simplex"):
    """Log density of one or more Beta-Dirichlet rows.

    Args:
        pi: (Q,) or (C, Q) probabilities.
        coords: ``"split"`` gives the density of (pi_1, pi~), the coordinates
            the Gibbs update works in; ``"simplex"`` adds the change of
            variables to (pi_1, ..., pi_{Q-1}).

    Returns:
        float: summed log density, -inf on the boundary.
    """
    pi = np.atleast_2d(np.asarray(pi, dtype=np.float64))
    Q = pi.shape[1]
    if (pi <= 0).any() or (pi >= 1).any():
        return -np.inf
    pi1 = pi[:, 0]
    tilde = pi[:, 1:] / (1.0 - pi1)[:, None]
    value = dirichlet_logpdf(np.stack([pi1, 1.0 - pi1], -1), [1.0, alpha / C])
    value = value + dirichlet_logpdf(tilde, gamma)
    if coords == "simplex":
        value = value - (Q - 2) * np.log1p(-pi1)
    elif coords != "split":
        raise ValueError(f"Unknown coordinates '{coords}'")
    return float(value.sum())


def code_counts(Z, num_codes: int = NUM_CODES) -> np.ndarray:
    """m[c, q]: number of pairs with code q in column c."""
    Z = np.asarray(Z)
    C = Z.shape[1]
    m = np.zeros((C, num_codes))
    for c in range(C):
        m[c] = np.bincount(Z[:, c], minlength=num_codes)
    return m


def log_prior_Z_given_pi(Z, pi) -> float:
    """sum_c sum_q m_cq log pi_cq."""
    return float(xlogy(code_counts(Z, np.shape(pi)[1]), pi).sum())


def sample_Z_given_pi(pi, K: int, rng: np.random.Generator) -> np.ndarray:
    pi = np.asarray(pi)
    return np.stack(
        [rng.choice(pi.shape[1], size=K, p=pi[c] / pi[c].sum()) for c in range(pi.shape[0])],
        axis=1,
    )


# ---------------------------------------------------------------------------
# Weights and noise
# ---------------------------------------------------------------------------


def weight_shapes(C: int, d0: float, d: float) -> np.ndarray:
    return np.concatenate([[d0], np.full(C, d)])


def log_prior_w(w, d0: float, d: float) -> float:
    """Dir(d0, d, ..., d) log density summed over rows of w."""
    w = np.atleast_2d(w)
    return float(dirichlet_logpdf(w, weight_shapes(w.shape[1] - 1, d0, d)).sum())


def log_prior_w_purity(w_star, w_tilde, d1_star, d2_star, d0, d) -> float:
    """Be(d1*, d2*) on the normal share plus Dir(d0, d, ...) on the rescaled rest."""
    w_star = np.atleast_1d(np.asarray(w_star, dtype=np.float64))
    beta_part = dirichlet_logpdf(np.stack([w_star, 1.0 - w_star], -1), [d1_star, d2_star])
    return float(beta_part.sum()) + log_prior_w(w_tilde, d0, d)


def rho_shapes(d1: float) -> np.ndarray:
    return np.array([d1] * 4 + [2 * d1] * 4)


def log_prior_rho(rho, d1: float) -> float:
    """Sum of the three group Dirichlet densities of the noise vector."""
    rho = np.asarray(rho, dtype=np.float64)
    shapes = rho_shapes(d1)
    return float(sum(dirichlet_logpdf(rho[s], shapes[s]) for s in GROUP_SLICES))


def theta_to_w(theta) -> np.ndarray:
    """Normalise unscaled abundances along the last axis."""
    theta = np.asarray(theta, dtype=np.float64)
    return theta / theta.sum(axis=-1, keepdims=True)


def log_theta_to_w(log_theta) -> np.ndarray:
    return softmax(np.asarray(log_theta, dtype=np.float64), axis=-1)


def floor_background(w, floor: float = W_FLOOR) -> np.ndarray:
    """Raise w[..., 0] to ``floor`` and rescale the other entries to keep sum 1."""
    w = np.array(w, dtype=np.float64)
    low = w[..., 0] < floor
    if low.any():
        rest = w[low, 1:]
        w[low, 1:] = rest * ((1.0 - floor) / rest.sum(-1, keepdims=True))
        w[low, 0] = floor
    return w


def log_rho_star_to_rho(log_rho_star, floor: float = RHO_FLOOR) -> np.ndarray:
    """Groupwise normalisation of the noise gammas, with every entry >= floor."""
    log_rho_star = np.asarray(log_rho_star, dtype=np.float64)
    rho = np.empty(NUM_OUTCOMES)
    for s in GROUP_SLICES:
        group = softmax(log_rho_star[s])
        low = group < floor
        if low.any():
            group[~low] *= (1.0 - floor * low.sum()) / group[~low].sum()
            group[low] = floor
        rho[s] = group
    return rho


def rho_star_to_rho(rho_star) -> np.ndarray:
    rho_star = np.asarray(rho_star, dtype=np.float64)
    rho = np.empty(NUM_OUTCOMES)
    for s in GROUP_SLICES:
        rho[s] = rho_star[s] / rho_star[s].sum()
    return rho


def sample_w(T: int, C: int, d0: float, d: float, rng: np.random.Generator) -> np.ndarray:
    return log_theta_to_w(sample_log_gamma(weight_shapes(C, d0, d), rng, size=(T, C + 1)))


def sample_rho(d1: float, rng: np.random.Generator) -> np.ndarray:
    return log_rho_star_to_rho(sample_log_gamma(rho_shapes(d1), rng))
