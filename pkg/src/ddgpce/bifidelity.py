"""Bi-fidelity surrogates: a low-fidelity DD-GPCE corrected by a polynomial link.

The high-fidelity output is approximated as h(Y_L), expanded in polynomials
of the low-fidelity output Y_L that are orthonormal under the law of Y_L.
That law is represented by the low-fidelity DD-GPCE evaluated on QMC inputs,
while the link coefficients are fitted on pairs (y_L(x), y_H(x)) of actual
model runs at common inputs.
"""

from __future__ import annotations

import contextlib
import logging
from dataclasses import dataclass, field

import numpy as np

from .distributions import CHUNK, RandomInputModel, derive_seed, input_blocks, sample
from .errors import ConfigError, DdgpceError, DegenerateLowFidelityError
from .multiindex import generate_reduced
from .orthopoly import DEFAULT_MOMENT_SAMPLES, OrthonormalBasis, build_basis, build_univariate_basis
from .risk import RiskEstimate, risk_inputs, var_cvar
from .surrogate import (
    DEFAULT_RATIO,
    DdGpceSurrogate,
    ExperimentalDesign,
    FitReport,
    design_inputs,
    fit_sls,
    run_evaluator,
)

log = logging.getLogger(__name__)

DEFAULT_LINK_DEGREE = 3
DEFAULT_LINK_FACTOR = 8


@dataclass(frozen=True, eq=False)
class FourierLink:
    basis: OrthonormalBasis
    coefficients: np.ndarray
    fit_report: FitReport | None = None

    @property
    def degree(self) -> int:
        return self.basis.size - 1

    def __call__(self, y_low) -> np.ndarray:
        y = np.asarray(y_low, dtype=float).ravel()
        return self.basis(y) @ self.coefficients


@dataclass(frozen=True, eq=False)
class BiFidelitySurrogate:
    low: DdGpceSurrogate
    link: FourierLink
    provenance: dict = field(default_factory=dict)

    def __call__(self, points) -> np.ndarray:
        return evaluate_bifi(self, points)


@dataclass(frozen=True)
class BudgetModel:
    total: float
    cost_high: float
    cost_low: float
    n_low: int
    n_high: int


@dataclass(frozen=True)
class BudgetReport:
    low_cost_bound: float
    feasible: bool
    low_cost_ok: bool


def check_budget(budget: BudgetModel) -> BudgetReport:
    """Largest admissible low-fidelity cost (c_T - L'' c_H) / L' and feasibility."""
    if budget.cost_high <= 0 or budget.cost_low <= 0 or budget.total <= 0:
        raise ConfigError("budget and per-run costs must be positive")
    if budget.n_low < 1:
        raise ConfigError("L' must be positive")
    remaining = budget.total - budget.n_high * budget.cost_high
    bound = remaining / budget.n_low
    feasible = remaining >= 0
    return BudgetReport(bound, feasible, feasible and budget.cost_low <= bound)


def fit_low_surrogate(model, low_evaluator, S, m, n_low, seed, basis=None,
                      n_moment=DEFAULT_MOMENT_SAMPLES, qmc_seed=0, ratio_min=DEFAULT_RATIO):
    """Low-fidelity DD-GPCE; returns ``(surrogate, design)``."""
    if basis is None:
        iset = generate_reduced(model.dimension, S, m)
        if not n_low > iset.cardinality:
            raise ConfigError(f"need L' > L_(N,S,m): got L' = {n_low} <= {iset.cardinality}")
        basis = build_basis(model, iset, n_moment, qmc_seed)
    x = design_inputs(model, n_low, seed)
    y = run_evaluator(low_evaluator, x, "low-fidelity")
    design = ExperimentalDesign(x, y, "low")
    return fit_sls(basis, design, ratio_min), design


def low_output_sample(low: DdGpceSurrogate, model: RandomInputModel, n_samples: int, seed: int = 0) -> np.ndarray:
    """Realizations of the low-fidelity surrogate on QMC inputs."""
    return np.concatenate([low(x) for x in input_blocks(model, "qmc", n_samples, seed, CHUNK)])


def link_basis_from_samples(y_tilde, degree: int) -> OrthonormalBasis:
    """Orthonormal polynomials in Y_L from surrogate realizations."""
    if degree < 1:
        raise ConfigError(f"link degree must be at least 1, got {degree}")
    y = np.asarray(y_tilde, dtype=float).ravel()
    if y.size < 10 * (degree + 1):
        raise ConfigError(f"link basis needs at least {10 * (degree + 1)} samples, got {y.size}")
    mean, var = float(np.mean(y)), float(np.var(y))
    if not np.isfinite(var) or var == 0.0 or var <= 1e-12 * mean * mean:
        raise DegenerateLowFidelityError(
            f"low-fidelity surrogate is nearly constant (mean {mean:.6g}, variance {var:.3g}); "
            "increase m or S so it resolves the input dependence"
        )
    return build_univariate_basis(y, degree)


def build_link_basis(low: DdGpceSurrogate, model: RandomInputModel, degree: int,
                     n_samples: int = DEFAULT_MOMENT_SAMPLES, seed: int = 0) -> OrthonormalBasis:
    if degree < 1:
        raise ConfigError(f"link degree must be at least 1, got {degree}")
    if n_samples < 10 * (degree + 1):
        raise ConfigError(f"L-bar must be at least {10 * (degree + 1)}")
    return link_basis_from_samples(low_output_sample(low, model, n_samples, seed), degree)


def fit_link(basis: OrthonormalBasis, y_low, y_high, ratio_min: float = 1.0) -> FourierLink:
    """Least-squares link coefficients from paired low/high runs."""
    yl = np.asarray(y_low, dtype=float).ravel()
    yh = np.asarray(y_high, dtype=float).ravel()
    if yl.shape != yh.shape:
        raise ConfigError(f"{yl.size} low-fidelity values but {yh.size} high-fidelity values")
    fit = fit_sls(basis, ExperimentalDesign(yl[:, None], yh, "pairs"), ratio_min)
    return FourierLink(basis, fit.coefficients, fit.fit_report)


def evaluate_bifi(bifi: BiFidelitySurrogate, points) -> np.ndarray:
    return bifi.link(bifi.low(points))


@contextlib.contextmanager
def _step(name):
    try:
        yield
    except DdgpceError as exc:
        exc.args = (f"[bi-fidelity step: {name}] {exc.args[0] if exc.args else ''}",) + exc.args[1:]
        exc.step = name
        raise


@dataclass(frozen=True, eq=False)
class BiFidelityResult:
    estimates: list[RiskEstimate]
    surrogate: BiFidelitySurrogate
    low_calls: int
    high_calls: int

    @property
    def estimate(self) -> RiskEstimate:
        return self.estimates[0]


def run_bifidelity(
    model: RandomInputModel,
    low_evaluator,
    high_evaluator,
    S: int,
    m: int,
    m_bar: int = DEFAULT_LINK_DEGREE,
    L: int = 10_000,
    n_low: int | None = None,
    n_high: int | None = None,
    beta=0.95,
    seed: int = 0,
    n_moment: int = DEFAULT_MOMENT_SAMPLES,
    qmc_seed: int = 0,
    estimator: str = "rockafellar",
    reuse_design: bool = True,
    basis: OrthonormalBasis | None = None,
    ratio_min: float = DEFAULT_RATIO,
) -> BiFidelityResult:
    """Bi-fidelity VaR/CVaR estimation.

    By default the L'' high-fidelity runs are placed at the first L'' points
    of the (MCS) low-fidelity design, so exactly L' low-fidelity and L''
    high-fidelity runs are made.  With ``reuse_design=False`` the pairs use a
    fresh MCS draw and cost L'' extra low-fidelity runs.
    """
    betas = [beta] if np.isscalar(beta) else list(beta)
    for b in betas:
        if not 0 < b < 1:
            raise ConfigError(f"beta must lie in (0, 1), got {b}")
    if m_bar < 1:
        raise ConfigError(f"link degree m_bar must be at least 1, got {m_bar}")
    n_high = DEFAULT_LINK_FACTOR * (m_bar + 1) if n_high is None else n_high
    if not n_high > m_bar + 1:
        raise ConfigError(f"need L'' > m_bar + 1: got L'' = {n_high}")
    low_calls = high_calls = 0

    with _step("orthonormal basis in X"):
        if basis is None:
            iset = generate_reduced(model.dimension, S, m)
            n_low = int(np.ceil(4 * iset.cardinality)) if n_low is None else n_low
            if not n_low > iset.cardinality:
                raise ConfigError(f"need L' > L_(N,S,m): got L' = {n_low} <= {iset.cardinality}")
            basis = build_basis(model, iset, n_moment, qmc_seed)
        elif n_low is None:
            n_low = 4 * basis.size
    if reuse_design and n_high > n_low:
        raise ConfigError(f"L'' = {n_high} exceeds L' = {n_low} with reuse_design")

    with _step("low-fidelity coefficients"):
        x_design = design_inputs(model, n_low, seed)
        y_design = run_evaluator(low_evaluator, x_design, "low-fidelity")
        low_calls += n_low
        low = fit_sls(basis, ExperimentalDesign(x_design, y_design, "low"), ratio_min)

    with _step("orthonormal basis in Y_L"):
        link_basis = build_link_basis(low, model, m_bar, n_moment, qmc_seed)

    with _step("link coefficients"):
        if reuse_design:
            x_pairs, yl_pairs = x_design[:n_high], y_design[:n_high]
        else:
            x_pairs = sample(model, "mcs", n_high, derive_seed(seed, "pairs")).points
            yl_pairs = run_evaluator(low_evaluator, x_pairs, "low-fidelity")
            low_calls += n_high
        yh_pairs = run_evaluator(high_evaluator, x_pairs, "high-fidelity")
        high_calls += n_high
        link = fit_link(link_basis, yl_pairs, yh_pairs)

    provenance = {
        "seed": int(seed), "qmc_seed": int(qmc_seed), "S": int(S), "m": int(m), "m_bar": int(m_bar),
        "L_prime": int(n_low), "L_double_prime": int(n_high), "L_bar": int(n_moment),
        "reuse_design": bool(reuse_design),
    }
    bifi = BiFidelitySurrogate(low, link, provenance)

    with _step("risk estimation"):
        y = bifi(risk_inputs(model, L, seed))
        estimates = [var_cvar(y, None, b, estimator) for b in betas]
    log.info("bi-fidelity run: %d low, %d high evaluations", low_calls, high_calls)
    return BiFidelityResult(estimates, bifi, low_calls, high_calls)


run_algorithm2 = run_bifidelity
