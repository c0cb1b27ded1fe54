"""
Sampler checks: the joint-distribution test on a successive-conditional
simulator, the split-chain convergence statistic, spectral density at
frequency zero, autocorrelations and residual histograms.

Spectral densities use a Bartlett lag window with bandwidth floor(sqrt(L)).
"""

import os
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from scipy.stats import norm
from tqdm import tqdm

from core.errors import DiagnosticsError
from core.genotype import NUM_OUTCOMES
from core.likelihood import ReadCounts, read_probs
from mcmc.fit import PosteriorSamples
from model.base import ModelState, SubcloneModel
from simulate.generator import class_shares, simulate_counts
from tools.utils import multi_process_function

MIN_TRACE_LENGTH = 100
BANDWIDTH_RULE = "bartlett, floor(sqrt(L))"


# ---------------------------------------------------------------------------
# Spectral density and autocorrelation
# ---------------------------------------------------------------------------


def _as_trace(trace) -> np.ndarray:
    x = np.asarray(trace, dtype=np.float64).ravel()
    if not np.isfinite(x).all():
        raise DiagnosticsError("Trace contains non-finite values")
    return x


def autocovariance(trace, max_lag: Optional[int] = None) -> np.ndarray:
    """Biased autocovariances gamma_0..gamma_max_lag, computed with the FFT."""
    x = _as_trace(trace)
    L = x.size
    max_lag = L - 1 if max_lag is None else min(max_lag, L - 1)
    xc = x - x.mean()
    size = 1 << int(np.ceil(np.log2(2 * L)))
    f = np.fft.rfft(xc, n=size)
    acov = np.fft.irfft(f * np.conjugate(f), n=size)[: max_lag + 1] / L
    return acov


def spectral_density_zero(trace, bandwidth: Optional[int] = None) -> float:
    """Lag-window estimate of S(0) = sum over all lags of the autocovariance.

    Lags up to M = floor(sqrt(L)) get Bartlett weights 1 - j/M, which keeps
    the estimate nonnegative.
    """
    x = _as_trace(trace)
    L = x.size
    if L < MIN_TRACE_LENGTH:
        raise DiagnosticsError(f"Need at least {MIN_TRACE_LENGTH} values, got {L}")
    M = int(np.floor(np.sqrt(L))) if bandwidth is None else int(bandwidth)
    acov = autocovariance(x, M)
    j = np.arange(1, acov.size)
    value = acov[0] + 2.0 * np.sum((1.0 - j / M) * acov[1:])
    return float(max(value, 0.0))


def autocorrelation(trace, max_lag: int = 50) -> np.ndarray:
    """Autocorrelations at lags 0..max_lag; lag 0 is 1 (all zeros after it for a constant trace)."""
    acov = autocovariance(trace, max_lag)
    out = np.zeros(max_lag + 1)
    out[0] = 1.0
    if acov[0] > 0:
        out[1 : acov.size] = acov[1:] / acov[0]
    return out


# ---------------------------------------------------------------------------
# Split-chain convergence statistic
# ---------------------------------------------------------------------------


@dataclass
class ZTest:
    z: float
    p: float

    @property
    def skipped(self) -> bool:
        return bool(np.isnan(self.z))


def _z_test(diff: float, var: float, what: str) -> ZTest:
    if not var > 0:
        logger.warning("Degenerate statistic {}: zero spectral density, test skipped", what)
        return ZTest(float("nan"), float("nan"))
    z = diff / np.sqrt(var)
    return ZTest(float(z), float(2.0 * norm.sf(abs(z))))


def geweke_convergence(trace, frac_a: float = 0.1, frac_b: float = 0.5, name: str = "trace") -> ZTest:
    """Compare the mean of the first frac_a of a trace with the mean of its last frac_b."""
    x = _as_trace(trace)
    if not (0 < frac_a < 1 and 0 < frac_b < 1) or frac_a + frac_b >= 1:
        raise DiagnosticsError(f"Windows overlap or are empty: frac_a={frac_a}, frac_b={frac_b}")
    L = x.size
    n_a, n_b = int(np.floor(frac_a * L)), int(np.floor(frac_b * L))
    a, b = x[:n_a], x[L - n_b :]
    var = spectral_density_zero(a) / n_a + spectral_density_zero(b) / n_b
    return _z_test(a.mean() - b.mean(), var, name)


# ---------------------------------------------------------------------------
# Scalar statistics of a parameter state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Statistic:
    """A weight w[t, c] (c = 0 is the background) or a read probability p~[t, k, g].

    Indices are 0-based; names use 1-based sample, pair and outcome numbers
    and keep c as the subclone label (w_1_0 is the background of sample 1).
    """

    kind: str
    index: Tuple[int, ...]

    @property
    def name(self) -> str:
        if self.kind == "w":
            t, c = self.index
            return f"w_{t + 1}_{c}"
        t, k, g = self.index
        return f"p_{t + 1}_{k + 1}_{g + 1}"

    @classmethod
    def parse(cls, text: str) -> "Statistic":
        m = re.fullmatch(r"w_(\d+)_(\d+)", text)
        if m:
            return cls("w", (int(m.group(1)) - 1, int(m.group(2))))
        m = re.fullmatch(r"p_(\d+)_(\d+)_(\d+)", text)
        if m:
            return cls("p", tuple(int(v) - 1 for v in m.groups()))
        raise DiagnosticsError(f"Cannot parse statistic '{text}' (use w_t_c or p_t_k_g)")

    def of_parameters(self, Z, w, rho, ordering: str, w_star=None) -> float:
        if self.kind == "w":
            return float(np.asarray(w)[self.index])
        t, k, g = self.index
        ws = None if w_star is None else np.asarray(w_star)[t : t + 1]
        return float(read_probs(np.asarray(Z)[k : k + 1], np.asarray(w)[t : t + 1], rho, ordering, ws)[0, 0, g])

    def of_state(self, model: SubcloneModel, state: ModelState) -> float:
        w, w_star = model.weights(state)
        return self.of_parameters(state.Z, w, model.noise(state), model.ordering, w_star)


def default_statistics(T: int, K: int, C: int, rng: np.random.Generator, n_w: int = 3, n_p: int = 3) -> List[Statistic]:
    """Randomly chosen weights and read probabilities, subclones only for w."""
    stats = [
        Statistic("w", (int(rng.integers(T)), int(rng.integers(1, C + 1)))) for _ in range(n_w)
    ]
    stats += [
        Statistic("p", (int(rng.integers(T)), int(rng.integers(K)), int(rng.integers(NUM_OUTCOMES))))
        for _ in range(n_p)
    ]
    return list(dict.fromkeys(stats))


# ---------------------------------------------------------------------------
# Joint-distribution test
# ---------------------------------------------------------------------------


@dataclass
class JointSetting:
    """Dimensions and read-depth design of the successive-conditional simulator."""

    T: int = 4
    K: int = 80
    key: object = 3
    L: int = 200000
    n_range: Tuple[int, int] = (400, 600)
    v_missing: float = 0.3
    prior_mean: str = "analytic"
    prior_draws: int = 20000
    replicates: int = 1


@dataclass
class JointResult:
    rows: List[dict]
    traces: Dict[str, np.ndarray] = field(default_factory=dict)

    def table(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=["statistic", "mean", "prior_mean", "se", "z", "p", "status"])


def _run_simulator(model, setting: JointSetting, statistics, seed, disable_progress) -> np.ndarray:
    rng = np.random.default_rng(seed)
    lo, hi = setting.n_range
    N = rng.integers(lo, hi + 1, size=(setting.T, setting.K))
    v = class_shares(setting.v_missing, setting.T, setting.K)
    state = model.sample_prior(setting.T, setting.K, setting.key, rng)
    out = np.empty((setting.L, len(statistics)))
    for l in tqdm(range(setting.L), desc="Joint simulator", disable=disable_progress):
        counts = ReadCounts(simulate_counts(model.read_probs(state), N, v, rng))
        model.sweep(state, counts, rng, 1.0)
        out[l] = [s.of_state(model, state) for s in statistics]
    return out


def prior_predictive_means(model, setting: JointSetting, statistics, rng) -> Tuple[np.ndarray, np.ndarray]:
    """Monte Carlo prior means of the statistics and their squared standard errors."""
    values = np.array(
        [
            [s.of_state(model, model.sample_prior(setting.T, setting.K, setting.key, rng)) for s in statistics]
            for _ in range(setting.prior_draws)
        ]
    )
    return values.mean(axis=0), values.var(axis=0, ddof=1) / setting.prior_draws


def geweke_joint(
    model: SubcloneModel,
    setting: JointSetting,
    statistics: Optional[Sequence[Statistic]] = None,
    seed: int = 0,
    num_workers: int = 1,
    disable_progress: bool = False,
) -> JointResult:
    """z-scores of simulator means against prior means.

    The data of each cycle are drawn given the previous parameters and the
    parameters are then updated by one within-model sweep at fixed model
    size. Replicate simulators have their own random streams and are pooled.
    Weight means are exact when ``prior_mean == "analytic"``; read
    probabilities always use prior-predictive Monte Carlo.
    """
    if setting.L < MIN_TRACE_LENGTH:
        raise DiagnosticsError(f"Need at least {MIN_TRACE_LENGTH} cycles, got {setting.L}")
    root = np.random.SeedSequence(seed)
    stat_seed, prior_seed, sim_seed = root.spawn(3)
    C = setting.key[1] if isinstance(setting.key, tuple) else int(setting.key)
    if statistics is None:
        statistics = default_statistics(setting.T, setting.K, C, np.random.default_rng(stat_seed))
    statistics = list(statistics)

    mc_mean, mc_var = prior_predictive_means(model, setting, statistics, np.random.default_rng(prior_seed))
    prior_mean = mc_mean.copy()
    prior_var = mc_var.copy()
    if setting.prior_mean == "analytic":
        w_mean = model.prior_weight_means(C)
        for i, s in enumerate(statistics):
            if s.kind == "w":
                prior_mean[i] = w_mean[s.index[1]]
                prior_var[i] = 0.0
    elif setting.prior_mean != "mc":
        raise DiagnosticsError(f"prior_mean must be 'analytic' or 'mc', got '{setting.prior_mean}'")

    seeds = sim_seed.spawn(setting.replicates)
    logger.info(
        "Joint test: {} replicate(s) of {} cycles, T={}, K={}, size {}",
        setting.replicates, setting.L, setting.T, setting.K, setting.key,
    )
    runs = multi_process_function(
        lambda s: _run_simulator(model, setting, statistics, s, disable_progress),
        seeds,
        num_workers,
        desc="Joint simulators",
    )

    rows, traces = [], {}
    for i, s in enumerate(statistics):
        series = [run[:, i] for run in runs]
        traces[s.name] = np.concatenate(series)
        mean = float(np.mean([x.mean() for x in series]))
        var = sum(spectral_density_zero(x) / x.size for x in series) / len(series) ** 2
        test = _z_test(mean - prior_mean[i], var + prior_var[i], s.name)
        rows.append(
            {
                "statistic": s.name,
                "mean": mean,
                "prior_mean": float(prior_mean[i]),
                "se": float(np.sqrt(var + prior_var[i])),
                "z": test.z,
                "p": test.p,
                "status": "skipped" if test.skipped else "ok",
            }
        )
    return JointResult(rows=rows, traces=traces)


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------


def statistic_trace(samples: PosteriorSamples, statistic: Statistic, C: int) -> Tuple[np.ndarray, np.ndarray]:
    """(iterations, values) of a statistic over the draws at size C."""
    draws = [d for _, d in samples.select(C)]
    values = np.array(
        [statistic.of_parameters(d.Z, d.w, d.rho, samples.ordering, d.w_star) for d in draws]
    )
    return np.array([d.iteration for d in draws], dtype=np.int64), values


def export_traces(
    samples: PosteriorSamples,
    statistics: Sequence[Statistic],
    out_dir: str,
    C: int,
    max_lag: int = 50,
) -> List[str]:
    """Write trace_<name>.csv (iteration, value, autocorrelation by lag) per statistic."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for s in statistics:
        iterations, values = statistic_trace(samples, s, C)
        acf = autocorrelation(values, max_lag) if values.size else np.zeros(0)
        frame = pd.DataFrame({"iteration": pd.array(iterations, dtype="Int64"), "value": values})
        lag_frame = pd.DataFrame({"lag": np.arange(acf.size), "acf": acf})
        frame = pd.concat([frame, lag_frame], axis=1)
        path = os.path.join(out_dir, f"trace_{s.name}.csv")
        frame.to_csv(path, index=False)
        paths.append(path)
    return paths


def residual_histogram(resid, bins: int = 40, limit: float = 0.1) -> pd.DataFrame:
    """Counts of finite residuals in equal bins on [-limit, limit]; outliers go to the end bins."""
    r = np.asarray(resid, dtype=np.float64).ravel()
    r = np.clip(r[np.isfinite(r)], -limit, limit)
    counts, edges = np.histogram(r, bins=bins, range=(-limit, limit))
    return pd.DataFrame({"lower": edges[:-1], "upper": edges[1:], "count": counts})
