"""Sampling-based VaR / CVaR estimation and trial comparison metrics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import ks_2samp

from .distributions import RandomInputModel, derive_seed, sample
from .errors import ConfigError, InsufficientTailError, WeightError

ESTIMATORS = ("rockafellar", "indicator")
DEFAULT_L = 10_000


@dataclass(frozen=True)
class RiskEstimate:
    beta: float
    var: float
    cvar: float
    sample_count: int
    k_beta: int
    estimator: str = "rockafellar"

    def as_row(self, seed=None) -> dict:
        row = asdict(self)
        row["seed"] = seed
        return row


def _check_beta(beta):
    if not (0.0 < beta < 1.0):
        raise ConfigError(f"risk level beta must lie in (0, 1), got {beta}")


def tail_index_uniform(L: int, beta: float) -> int:
    """k_beta = floor(L (1 - beta)) + 1 for equal weights 1/L.

    L (1 - beta) is snapped to the nearest integer when within 1e-9 of it, so
    that e.g. L = 100, beta = 0.95 gives k = 6 despite binary rounding.
    """
    t = L * (1.0 - beta)
    r = round(t)
    if abs(t - r) <= 1e-9 * max(1.0, t):
        t = r
    if t < 1:
        raise InsufficientTailError(
            f"L (1 - beta) = {t:.6g} < 1: need at least {math.ceil(1 / (1 - beta))} samples"
        )
    return int(math.floor(t)) + 1


def _tail_index_weighted(p_sorted, beta):
    c = np.cumsum(p_sorted)
    # smallest k with sum_{l<=k} p > 1 - beta (with a rounding guard)
    k = int(np.searchsorted(c, (1.0 - beta) + 1e-12, side="right")) + 1
    return min(k, len(p_sorted))


def var_cvar(samples, probabilities=None, beta: float = 0.95, estimator: str = "rockafellar") -> RiskEstimate:
    """VaR and CVaR of an output sample at risk level ``beta``.

    Samples are sorted in descending order (stable, ties keep input order).
    The tail index k is the smallest integer with
    ``sum_{l<k} p_l <= 1 - beta < sum_{l<=k} p_l`` and VaR is the k-th largest
    value.  ``estimator="rockafellar"`` returns
    ``VaR + sum_l p_l (y_l - VaR)_+ / (1 - beta)``; ``"indicator"`` returns
    ``sum_l p_l y_l 1[y_l >= VaR] / (1 - beta)``.
    """
    _check_beta(beta)
    if estimator not in ESTIMATORS:
        raise ConfigError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")
    y = np.asarray(samples, dtype=float).ravel()
    L = y.shape[0]
    if L == 0:
        raise InsufficientTailError("no samples")
    if not np.all(np.isfinite(y)):
        raise ConfigError("samples contain non-finite values")
    order = np.argsort(-y, kind="stable")
    y_sorted = y[order]
    if probabilities is None:
        k = tail_index_uniform(L, beta)
        var = float(y_sorted[k - 1])
        if estimator == "rockafellar":
            excess = np.sum(np.maximum(y - var, 0.0)) / L
            cvar = var + excess / (1.0 - beta)
        else:
            cvar = float(np.sum(np.where(y >= var, y, 0.0)) / L / (1.0 - beta))
        return RiskEstimate(float(beta), var, float(cvar), L, k, estimator)

    p = np.asarray(probabilities, dtype=float).ravel()
    if p.shape[0] != L:
        raise WeightError(f"{p.shape[0]} probabilities for {L} samples")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise WeightError(f"probabilities must be non-negative and sum to 1 (sum = {p.sum():.12g})")
    tail_index_uniform(L, beta)  # same L >= 1 / (1 - beta) precondition
    tail_mass = 1.0 - beta
    k = _tail_index_weighted(p[order], beta)
    var = float(y_sorted[k - 1])
    if estimator == "rockafellar":
        cvar = var + float(np.sum(p * np.maximum(y - var, 0.0))) / tail_mass
    else:
        cvar = float(np.sum(p * np.where(y >= var, y, 0.0))) / tail_mass
    return RiskEstimate(float(beta), var, float(cvar), L, k, estimator)


def risk_inputs(model: RandomInputModel, L: int, seed: int) -> np.ndarray:
    """MCS inputs used for risk estimation at master ``seed``."""
    return sample(model, "mcs", L, derive_seed(seed, "risk")).points


def var_cvar_surrogate(surrogate, model: RandomInputModel, L: int = DEFAULT_L, beta: float = 0.95,
                       seed: int = 0, estimator: str = "rockafellar") -> RiskEstimate:
    """Sample L inputs, evaluate the cheap surrogate, and estimate VaR/CVaR."""
    _check_beta(beta)
    tail_index_uniform(L, beta)
    y = surrogate(risk_inputs(model, L, seed))
    return var_cvar(y, None, beta, estimator)


def mrd(benchmark_cvar: float, trial_cvars) -> float:
    """Mean relative difference of trial estimates from a benchmark."""
    t = np.asarray(trial_cvars, dtype=float).ravel()
    if benchmark_cvar == 0:
        raise ConfigError("MRD is undefined for a zero benchmark")
    if t.size < 1:
        raise ConfigError("MRD needs at least one trial")
    return float(np.mean(np.abs(benchmark_cvar - t)) / abs(benchmark_cvar))


def empirical_cdf(samples) -> tuple[np.ndarray, np.ndarray]:
    """Sorted values and their empirical probabilities l / L."""
    y = np.sort(np.asarray(samples, dtype=float).ravel(), kind="stable")
    return y, np.arange(1, y.size + 1) / y.size


def ks_distance(a, b) -> float:
    """Kolmogorov distance between two empirical CDFs."""
    return float(ks_2samp(np.ravel(a), np.ravel(b)).statistic)
