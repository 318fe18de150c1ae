"""DD-GPCE surrogates fitted by standard least squares."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import qr, solve_triangular

from .distributions import RandomInputModel, derive_seed, sample
from .errors import ConfigError, DdgpceError, ModelEvaluationError, OversamplingWarning, RankDeficientError
from .multiindex import generate_reduced
from .orthopoly import DEFAULT_MOMENT_SAMPLES, OrthonormalBasis, build_basis, eval_basis

DEFAULT_RATIO = 3.0

Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class ExperimentalDesign:
    inputs: np.ndarray
    outputs: np.ndarray
    fidelity_tag: str = "high"

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.outputs, dtype=float).ravel()
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] != y.shape[0]:
            raise ConfigError(f"design has {x.shape[0]} inputs but {y.shape[0]} outputs")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ConfigError("design contains non-finite values")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "outputs", y)

    @property
    def size(self) -> int:
        return int(self.outputs.shape[0])


@dataclass(frozen=True)
class FitReport:
    residual: float
    n_samples: int
    n_terms: int
    condition_estimate: float

    @property
    def oversampling_ratio(self) -> float:
        return self.n_samples / self.n_terms


@dataclass(frozen=True, eq=False)
class DdGpceSurrogate:
    basis: OrthonormalBasis
    coefficients: np.ndarray
    fit_report: FitReport | None = None

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float).ravel()
        if c.shape[0] != self.basis.size:
            raise ConfigError(f"{c.shape[0]} coefficients for a basis of size {self.basis.size}")
        object.__setattr__(self, "coefficients", c)

    def __call__(self, points) -> np.ndarray:
        return evaluate(self, points)

    @property
    def mean(self) -> float:
        return float(self.coefficients[0])

    @property
    def variance(self) -> float:
        return float(np.sum(self.coefficients[1:] ** 2))

    def monomial_coefficients(self) -> np.ndarray:
        """Coefficients of the standardized monomials: y = p . M((x - shift) / scale)."""
        return self.basis.whitening.T @ self.coefficients


def fit_sls(basis: OrthonormalBasis, design: ExperimentalDesign, ratio_min: float = DEFAULT_RATIO) -> DdGpceSurrogate:
    """Least-squares coefficients minimizing the mean-squared design residual.

    Solved with column-pivoted QR of the design matrix, which yields the same
    minimizer as the normal equations without squaring the condition number.
    """
    K = basis.size
    Lp = design.size
    if design.inputs.shape[1] != basis.dimension:
        raise ConfigError(
            f"design inputs have dimension {design.inputs.shape[1]}, basis {basis.dimension}"
        )
    if not Lp > K:
        raise ConfigError(f"need L' > L_(N,S,m): got L' = {Lp} <= {K}")
    if Lp < ratio_min * K:
        warnings.warn(
            f"oversampling ratio L'/K = {Lp / K:.2f} is below {ratio_min:g}",
            OversamplingWarning,
            stacklevel=2,
        )
    A = eval_basis(basis, design.inputs)
    b = design.outputs
    Q, R, perm = qr(A, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    tol = max(A.shape) * np.finfo(float).eps * d[0]
    rank = int(np.sum(d > tol))
    if rank < K:
        raise RankDeficientError(
            f"design matrix has numerical rank {rank} < {K}; the experimental design "
            "does not identify all coefficients"
        )
    c = np.empty(K)
    c[perm] = solve_triangular(R, Q.T @ b)
    resid = b - A @ c
    report = FitReport(float(np.mean(resid**2)), Lp, K, float(d[0] / d[-1]))
    return DdGpceSurrogate(basis, c, report)


def evaluate(surrogate: DdGpceSurrogate, points) -> np.ndarray:
    """Surrogate values sum_i c_i Psi_i(x) at a batch of points."""
    x = np.asarray(points, dtype=float)
    if x.ndim == 1 and surrogate.basis.dimension > 1:
        return np.atleast_1d(eval_basis(surrogate.basis, x) @ surrogate.coefficients)
    return eval_basis(surrogate.basis, x) @ surrogate.coefficients


def second_moments(surrogate: DdGpceSurrogate) -> tuple[float, float]:
    """(mean, variance) from orthonormality: c_1 and sum_{i>=2} c_i^2."""
    return surrogate.mean, surrogate.variance


def run_evaluator(evaluator: Evaluator, points: np.ndarray, label: str = "model") -> np.ndarray:
    """Call ``evaluator`` on a batch and check the result shape and finiteness."""
    try:
        y = np.asarray(evaluator(points), dtype=float).ravel()
    except DdgpceError:
        raise
    except Exception as exc:
        raise ModelEvaluationError(f"{label} evaluator failed: {exc}") from exc
    if y.shape[0] != points.shape[0]:
        raise ModelEvaluationError(
            f"{label} evaluator returned {y.shape[0]} values for {points.shape[0]} inputs"
        )
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        raise ModelEvaluationError(
            f"{label} evaluator returned non-finite output at sample {int(bad[0])}",
            sample_index=int(bad[0]),
        )
    return y


def design_inputs(model: RandomInputModel, n_design: int, seed: int) -> np.ndarray:
    """MCS experimental-design inputs for a fit at master ``seed``."""
    return sample(model, "mcs", n_design, derive_seed(seed, "design")).points


def fit_surrogate(
    model: RandomInputModel,
    evaluator: Evaluator,
    S: int,
    m: int,
    n_design: int,
    seed: int,
    basis: OrthonormalBasis | None = None,
    n_moment: int = DEFAULT_MOMENT_SAMPLES,
    qmc_seed: int = 0,
    ratio_min: float = DEFAULT_RATIO,
    fidelity_tag: str = "high",
) -> DdGpceSurrogate:
    """Build (or reuse) the basis, sample an MCS design, evaluate, and fit."""
    if basis is None:
        iset = generate_reduced(model.dimension, S, m)
        if not n_design > iset.cardinality:
            raise ConfigError(f"need L' > L_(N,S,m): got L' = {n_design} <= {iset.cardinality}")
        basis = build_basis(model, iset, n_moment, qmc_seed)
    x = design_inputs(model, n_design, seed)
    y = run_evaluator(evaluator, x, fidelity_tag)
    return fit_sls(basis, ExperimentalDesign(x, y, fidelity_tag), ratio_min)
