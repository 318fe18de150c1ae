"""Repeated-fit accuracy studies against a crude Monte Carlo benchmark.

A pool of model runs at MCS inputs serves twice: the whole pool gives the
crude-MCS benchmark estimate, and each trial fits a surrogate on a subset of
it drawn without replacement.  Per-trial CVaR estimates are summarized by the
mean relative difference (MRD) from the benchmark.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bifidelity import BiFidelitySurrogate, build_link_basis, fit_link
from .distributions import RandomInputModel, derive_seed, sample
from .errors import ConfigError
from .multiindex import generate_reduced
from .orthopoly import DEFAULT_MOMENT_SAMPLES, OrthonormalBasis, build_basis
from .risk import RiskEstimate, empirical_cdf, ks_distance, mrd, risk_inputs, var_cvar
from .surrogate import DEFAULT_RATIO, ExperimentalDesign, fit_sls, run_evaluator

DEFAULT_TRIALS = 20


@dataclass(frozen=True, eq=False)
class TrialPool:
    inputs: np.ndarray
    outputs: np.ndarray
    low_outputs: np.ndarray | None = None

    @property
    def size(self) -> int:
        return int(self.outputs.shape[0])

    def benchmark(self, beta: float, estimator: str = "rockafellar") -> RiskEstimate:
        return var_cvar(self.outputs, None, beta, estimator)


def crude_pool(model: RandomInputModel, high_evaluator, n: int, seed: int, low_evaluator=None) -> TrialPool:
    """Evaluate the model(s) at ``n`` MCS inputs drawn at master ``seed``."""
    x = sample(model, "mcs", n, derive_seed(seed, "pool")).points
    y = run_evaluator(high_evaluator, x, "high-fidelity")
    y_low = None if low_evaluator is None else run_evaluator(low_evaluator, x, "low-fidelity")
    return TrialPool(x, y, y_low)


def trial_subsets(pool_size: int, trials: int, size: int, seed: int, replace: bool = False) -> list[np.ndarray]:
    """Index sets for ``trials`` fits of ``size`` pool points each.

    Without ``replace`` the subsets are disjoint slices of one permutation of
    the pool.  With it each trial draws its own subset (still without
    repetition inside a trial).
    """
    if trials < 1:
        raise ConfigError(f"need at least one trial, got {trials}")
    if size > pool_size:
        raise ConfigError(f"subset size {size} exceeds pool size {pool_size}")
    rng = np.random.default_rng(derive_seed(seed, "subsets"))
    if not replace:
        if trials * size > pool_size:
            raise ConfigError(
                f"pool of {pool_size} is smaller than K * L' = {trials} * {size} = {trials * size}"
            )
        perm = rng.permutation(pool_size)
        return [perm[k * size : (k + 1) * size] for k in range(trials)]
    return [rng.choice(pool_size, size, replace=False) for _ in range(trials)]


@dataclass(frozen=True, eq=False)
class TrialReport:
    label: str
    benchmark: RiskEstimate
    estimates: list[RiskEstimate]
    surrogates: list = field(default_factory=list, repr=False)

    @property
    def cvars(self) -> np.ndarray:
        return np.array([e.cvar for e in self.estimates])

    @property
    def mrd(self) -> float:
        return mrd(self.benchmark.cvar, self.cvars)

    @property
    def mean_cvar(self) -> float:
        return float(np.mean(self.cvars))

    def as_row(self) -> dict:
        return {
            "label": self.label,
            "beta": self.benchmark.beta,
            "benchmark_cvar": self.benchmark.cvar,
            "mean_cvar": self.mean_cvar,
            "mrd": self.mrd,
            "trials": len(self.estimates),
        }


def _input_basis(model, S, m, n_moment, qmc_seed, basis):
    if basis is not None:
        return basis
    return build_basis(model, generate_reduced(model.dimension, S, m), n_moment, qmc_seed)


def trial_risk_inputs(model: RandomInputModel, L: int, seed: int, k: int) -> np.ndarray:
    return risk_inputs(model, L, derive_seed(seed, f"trial{k}"))


def run_trials(
    model: RandomInputModel,
    pool: TrialPool,
    S: int,
    m: int,
    n_design: int,
    trials: int = DEFAULT_TRIALS,
    beta: float = 0.95,
    L: int = 10_000,
    seed: int = 0,
    fidelity: str = "high",
    basis: OrthonormalBasis | None = None,
    n_moment: int = DEFAULT_MOMENT_SAMPLES,
    qmc_seed: int = 0,
    estimator: str = "rockafellar",
    ratio_min: float = DEFAULT_RATIO,
    replace: bool = False,
    keep_surrogates: bool = False,
) -> TrialReport:
    """K single-fidelity fits, each on its own pool subset.

    ``fidelity="low"`` fits the low-fidelity outputs of the pool but still
    scores against the high-fidelity benchmark.
    """
    if fidelity == "low" and pool.low_outputs is None:
        raise ConfigError("pool has no low-fidelity outputs")
    y_pool = pool.outputs if fidelity == "high" else pool.low_outputs
    basis = _input_basis(model, S, m, n_moment, qmc_seed, basis)
    if not n_design > basis.size:
        raise ConfigError(f"need L' > L_(N,S,m): got L' = {n_design} <= {basis.size}")
    estimates, kept = [], []
    for k, idx in enumerate(trial_subsets(pool.size, trials, n_design, seed, replace)):
        sur = fit_sls(basis, ExperimentalDesign(pool.inputs[idx], y_pool[idx], fidelity), ratio_min)
        estimates.append(var_cvar(sur(trial_risk_inputs(model, L, seed, k)), None, beta, estimator))
        if keep_surrogates:
            kept.append(sur)
    return TrialReport(f"{fidelity}-fidelity DD-GPCE", pool.benchmark(beta, estimator), estimates, kept)


def run_bifi_trials(
    model: RandomInputModel,
    pool: TrialPool,
    S: int,
    m: int,
    m_bar: int,
    n_design: int,
    n_high: int | None = None,
    trials: int = DEFAULT_TRIALS,
    beta: float = 0.95,
    L: int = 10_000,
    seed: int = 0,
    basis: OrthonormalBasis | None = None,
    n_moment: int = DEFAULT_MOMENT_SAMPLES,
    qmc_seed: int = 0,
    estimator: str = "rockafellar",
    ratio_min: float = DEFAULT_RATIO,
    replace: bool = False,
    keep_surrogates: bool = False,
) -> TrialReport:
    """K bi-fidelity fits.

    Each trial uses the low-fidelity outputs of its subset for the input
    surrogate and the high-fidelity outputs of the first ``n_high`` subset
    points for the link, matching the default pairing of the pipeline.
    """
    if pool.low_outputs is None:
        raise ConfigError("pool has no low-fidelity outputs")
    n_high = 8 * (m_bar + 1) if n_high is None else n_high
    if not n_high > m_bar + 1:
        raise ConfigError(f"need L'' > m_bar + 1: got L'' = {n_high}")
    if n_high > n_design:
        raise ConfigError(f"L'' = {n_high} exceeds L' = {n_design}")
    basis = _input_basis(model, S, m, n_moment, qmc_seed, basis)
    if not n_design > basis.size:
        raise ConfigError(f"need L' > L_(N,S,m): got L' = {n_design} <= {basis.size}")
    estimates, kept = [], []
    for k, idx in enumerate(trial_subsets(pool.size, trials, n_design, seed, replace)):
        x, yl = pool.inputs[idx], pool.low_outputs[idx]
        low = fit_sls(basis, ExperimentalDesign(x, yl, "low"), ratio_min)
        link_basis = build_link_basis(low, model, m_bar, n_moment, qmc_seed)
        link = fit_link(link_basis, yl[:n_high], pool.outputs[idx[:n_high]])
        bifi = BiFidelitySurrogate(low, link, {"trial": k, "m_bar": m_bar, "L_double_prime": n_high})
        estimates.append(var_cvar(bifi(trial_risk_inputs(model, L, seed, k)), None, beta, estimator))
        if keep_surrogates:
            kept.append(bifi)
    return TrialReport(f"bi-fidelity m_bar={m_bar}", pool.benchmark(beta, estimator), estimates, kept)


def cdf_distance(surrogate, model: RandomInputModel, reference, L: int = 10_000, seed: int = 0) -> float:
    """Kolmogorov distance between a surrogate's output CDF and a reference sample."""
    return ks_distance(surrogate(risk_inputs(model, L, seed)), reference)


def surrogate_cdf(surrogate, model: RandomInputModel, L: int = 10_000, seed: int = 0):
    return empirical_cdf(surrogate(risk_inputs(model, L, seed)))
