import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ddgpce.distributions import Marginal, RandomInputModel, sample
from ddgpce.errors import ConfigError, ModelEvaluationError, OversamplingWarning, RankDeficientError
from ddgpce.multiindex import generate_reduced
from ddgpce.orthopoly import build_basis, eval_basis
from ddgpce.surrogate import (
    DdGpceSurrogate,
    ExperimentalDesign,
    evaluate,
    fit_sls,
    fit_surrogate,
    run_evaluator,
    second_moments,
)


@pytest.fixture(scope="module")
def basis3():
    model = RandomInputModel.equicorrelated([Marginal.normal(0.0, 1.0)] * 3, 0.4)
    return model, build_basis(model, generate_reduced(3, 2, 3), 50_000, seed=2)


def test_recovers_polynomial_in_span(basis3):
    model, basis = basis3
    rng = np.random.default_rng(0)
    c = rng.normal(size=basis.size)
    x = sample(model, "mcs", 3 * basis.size, 1).points
    fit = fit_sls(basis, ExperimentalDesign(x, evaluate(DdGpceSurrogate(basis, c), x)))
    assert np.allclose(fit.coefficients, c, rtol=1e-9, atol=1e-9)
    assert fit.fit_report.residual < 1e-20


def test_matches_normal_equations(basis3):
    model, basis = basis3
    x = sample(model, "mcs", 200, 3).points
    y = np.sin(x[:, 0]) + x[:, 1] * x[:, 2] ** 2
    fit = fit_sls(basis, ExperimentalDesign(x, y))
    A = eval_basis(basis, x)
    c_ne = np.linalg.solve(A.T @ A / len(y), A.T @ y / len(y))
    assert np.allclose(fit.coefficients, c_ne, rtol=1e-7, atol=1e-9)
    assert np.isclose(fit.fit_report.residual, np.mean((y - A @ c_ne) ** 2))


def test_mean_and_variance_from_coefficients():
    model = RandomInputModel.equicorrelated([Marginal.normal(1.0, 0.5)] * 2, 0.5)
    basis = build_basis(model, generate_reduced(2, 1, 1), 20_000)
    w = np.array([2.0, -1.0])
    x = sample(model, "mcs", 30, 0).points
    sur = fit_sls(basis, ExperimentalDesign(x, x @ w + 4.0))
    mean, var = second_moments(sur)
    cov = model.covariance()
    assert np.isclose(mean, 4.0 + model.means @ w, rtol=1e-3)
    assert np.isclose(var, w @ cov @ w, rtol=1e-3)


def test_monomial_coefficients_reproduce_surrogate(basis3):
    model, basis = basis3
    c = np.random.default_rng(1).normal(size=basis.size)
    sur = DdGpceSurrogate(basis, c)
    x = sample(model, "mcs", 5, 4).points
    assert np.allclose(basis.monomials(x) @ sur.monomial_coefficients(), sur(x))


def test_too_few_design_points(basis3):
    model, basis = basis3
    x = sample(model, "mcs", basis.size, 0).points
    with pytest.raises(ConfigError, match=f"L' = {basis.size} <= {basis.size}"):
        fit_sls(basis, ExperimentalDesign(x, x[:, 0]))


def test_oversampling_warning(basis3):
    model, basis = basis3
    x = sample(model, "mcs", basis.size + 5, 0).points
    with pytest.warns(OversamplingWarning):
        fit_sls(basis, ExperimentalDesign(x, x[:, 0]))


def test_rank_deficient_design(basis3):
    model, basis = basis3
    x = np.repeat(sample(model, "mcs", 5, 0).points, 20, axis=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(RankDeficientError):
            fit_sls(basis, ExperimentalDesign(x, x[:, 0]))


def test_design_validation():
    with pytest.raises(ConfigError):
        ExperimentalDesign(np.zeros((3, 2)), np.zeros(4))
    with pytest.raises(ConfigError):
        ExperimentalDesign(np.zeros((3, 2)), np.array([0, np.nan, 1]))


def test_run_evaluator_reports_sample_index():
    def bad(x):
        y = x[:, 0].copy()
        y[3] = np.nan
        return y

    with pytest.raises(ModelEvaluationError) as err:
        run_evaluator(bad, np.ones((6, 2)))
    assert err.value.sample_index == 3
    with pytest.raises(ModelEvaluationError):
        run_evaluator(lambda x: x[:-1, 0], np.ones((6, 2)))


@given(st.integers(1, 4), st.integers(0, 2**20))
def test_fit_surrogate_exact_on_linear(N, seed):
    model = RandomInputModel.independent([Marginal.uniform(-1.0, 2.0)] * N)
    w = np.arange(1.0, N + 1)
    sur = fit_surrogate(model, lambda x: x @ w - 1.0, 1, 1, 4 * (N + 1), seed, n_moment=10_000)
    x = sample(model, "mcs", 10, seed + 1).points
    assert np.allclose(sur(x), x @ w - 1.0, rtol=1e-9, atol=1e-9)


def test_fit_is_deterministic(basis3):
    model, basis = basis3
    f = lambda x: np.exp(0.3 * x[:, 0]) + x[:, 1]
    a = fit_surrogate(model, f, 2, 3, 100, 5, basis=basis)
    b = fit_surrogate(model, f, 2, 3, 100, 5, basis=basis)
    assert np.array_equal(a.coefficients, b.coefficients)
