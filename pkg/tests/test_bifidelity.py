import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ddgpce.bifidelity import (
    BiFidelitySurrogate,
    BudgetModel,
    build_link_basis,
    check_budget,
    evaluate_bifi,
    fit_link,
    link_basis_from_samples,
    run_bifidelity,
)
from ddgpce.distributions import Marginal, RandomInputModel, sample
from ddgpce.errors import ConfigError, DegenerateLowFidelityError, ModelEvaluationError, RankDeficientError
from ddgpce.models import CountingEvaluator, linear_gaussian
from ddgpce.risk import risk_inputs, var_cvar, var_cvar_surrogate
from ddgpce.surrogate import fit_surrogate

N_MOMENT = 50_000


@pytest.fixture(scope="module")
def setup():
    model = RandomInputModel.equicorrelated([Marginal.normal(1.0, 0.5)] * 3, 0.3)
    low = linear_gaussian(model, [1.0, -2.0, 0.5], 0.2)
    low_sur = fit_surrogate(model, low, 1, 2, 40, 0, n_moment=N_MOMENT)
    return model, low, low_sur


def test_budget_examples():
    r = check_budget(BudgetModel(100, 1, 0.5, 84, 16))
    assert r.low_cost_bound == 1.0 and r.feasible and r.low_cost_ok
    r = check_budget(BudgetModel(16, 1, 0.5, 84, 16))
    assert r.low_cost_bound == 0.0 and r.feasible and not r.low_cost_ok
    r = check_budget(BudgetModel(10, 1, 0.5, 84, 16))
    assert not r.feasible and not r.low_cost_ok
    with pytest.raises(ConfigError):
        check_budget(BudgetModel(10, 0, 0.5, 84, 16))


def test_identity_link(setup):
    model, low, low_sur = setup
    basis = build_link_basis(low_sur, model, 1, N_MOMENT)
    x = sample(model, "mcs", 16, 3).points
    link = fit_link(basis, low(x), low(x))
    y = np.linspace(-3, 5, 11)
    assert np.allclose(link(y), y, atol=1e-8)


def test_affine_link_exact_on_held_out(setup):
    model, low, low_sur = setup
    basis = build_link_basis(low_sur, model, 1, N_MOMENT)
    x = sample(model, "mcs", 16, 3).points
    link = fit_link(basis, low(x), 2 * low(x) + 3)
    y = np.linspace(-3, 5, 11)
    assert np.allclose(link(y), 2 * y + 3, rtol=1e-8, atol=1e-8)
    bifi = BiFidelitySurrogate(low_sur, link)
    assert math.isclose(link(np.array([5.0]))[0], 13.0, rel_tol=1e-10)
    xf = sample(model, "mcs", 100, 9).points
    assert np.allclose(evaluate_bifi(bifi, xf), 2 * low_sur(xf) + 3, rtol=1e-8)


def test_quadratic_link_composition(setup):
    model, low, low_sur = setup
    basis = build_link_basis(low_sur, model, 2, N_MOMENT)
    x = sample(model, "mcs", 24, 3).points
    bifi = BiFidelitySurrogate(low_sur, fit_link(basis, low(x), low(x) ** 2))
    xf = sample(model, "mcs", 200, 10).points
    assert np.allclose(bifi(xf), low(xf) ** 2, rtol=1e-6)


def test_degenerate_low_fidelity():
    with pytest.raises(DegenerateLowFidelityError):
        link_basis_from_samples(np.full(1000, 4.2), 2)
    with pytest.raises(ConfigError):
        link_basis_from_samples(np.arange(1000.0), 0)


def test_rank_deficient_pairs(setup):
    model, _, low_sur = setup
    basis = build_link_basis(low_sur, model, 2, N_MOMENT)
    with pytest.raises(RankDeficientError):
        fit_link(basis, np.full(20, 1.5), np.arange(20.0))


def test_pairs_count_mismatch(setup):
    model, _, low_sur = setup
    basis = build_link_basis(low_sur, model, 1, N_MOMENT)
    with pytest.raises(ConfigError):
        fit_link(basis, np.arange(10.0), np.arange(11.0))


@given(st.integers(0, 1000))
def test_link_residual_non_increasing(seed):
    rng = np.random.default_rng(seed)
    y_l = rng.normal(size=40)
    y_h = np.exp(0.5 * y_l) + 0.1 * np.sin(5 * y_l)
    sample_y = rng.normal(size=5000)
    res = [fit_link(link_basis_from_samples(sample_y, mb), y_l, y_h).fit_report.residual for mb in (1, 2, 3)]
    assert res[0] >= res[1] * (1 - 1e-9) and res[1] >= res[2] * (1 - 1e-9)


def run(model, low, high, **kw):
    args = dict(S=1, m=1, m_bar=1, L=10_000, n_low=40, n_high=16, beta=0.95, seed=7, n_moment=N_MOMENT)
    args.update(kw)
    return run_bifidelity(model, low, high, **args)


def test_exact_affine_end_to_end(setup):
    model, low, _ = setup
    high = CountingEvaluator(lambda x: 2 * low(x) + 3)
    lowc = CountingEvaluator(low)
    res = run(model, lowc, high)
    assert high.calls == 16 and lowc.calls == 40
    assert res.high_calls == 16 and res.low_calls == 40
    exact = var_cvar(2 * low(risk_inputs(model, 10_000, 7)) + 3, None, 0.95)
    assert math.isclose(res.estimate.cvar, exact.cvar, rel_tol=1e-6)


def test_identity_matches_low_pipeline(setup):
    model, low, _ = setup
    res = run(model, low, low)
    low_only = fit_surrogate(model, low, 1, 1, 40, 7, n_moment=N_MOMENT)
    ref = var_cvar_surrogate(low_only, model, 10_000, 0.95, 7)
    assert math.isclose(res.estimate.cvar, ref.cvar, rel_tol=1e-10)
    assert res.estimate.var == pytest.approx(ref.var, rel=1e-10)


def test_cvar_translation_equivariance(setup):
    model, _, _ = setup
    one = RandomInputModel.independent([Marginal.normal(0.0, 1.0)])
    low = lambda x: 3.0 * x[:, 0]
    res_h = run(one, low, lambda x: 2 * low(x) + 3, n_low=20)
    res_l = run(one, low, low, n_low=20)
    assert abs(res_h.estimate.cvar / (2 * res_l.estimate.cvar + 3) - 1) < 0.01


def test_fresh_pairs_cost_extra_low_runs(setup):
    model, low, _ = setup
    lowc, high = CountingEvaluator(low), CountingEvaluator(low)
    res = run(model, lowc, high, reuse_design=False)
    assert lowc.calls == 56 and high.calls == 16 and res.low_calls == 56


def test_errors_name_the_step(setup):
    model, low, _ = setup

    def broken(x):
        raise RuntimeError("solver crashed")

    with pytest.raises(ModelEvaluationError, match="link coefficients"):
        run(model, low, broken)
    with pytest.raises(ModelEvaluationError, match="low-fidelity coefficients"):
        run(model, broken, low)
    with pytest.raises(ConfigError, match="orthonormal basis in X"):
        run(model, low, low, S=3, m=2)


def test_preconditions(setup):
    model, low, _ = setup
    with pytest.raises(ConfigError):
        run(model, low, low, m_bar=0)
    with pytest.raises(ConfigError):
        run(model, low, low, n_high=2)
    with pytest.raises(ConfigError):
        run(model, low, low, beta=1.0)
    with pytest.raises(ConfigError):
        run(model, low, low, n_high=50)


def test_default_pair_count_and_determinism(setup):
    model, low, _ = setup
    high = CountingEvaluator(lambda x: np.exp(0.2 * low(x)))
    a = run(model, low, high, m_bar=3, n_high=None, n_low=80)
    assert high.calls == 32 and a.surrogate.provenance["L_double_prime"] == 32
    b = run(model, low, high, m_bar=3, n_high=None, n_low=80)
    assert a.estimate == b.estimate


def test_multiple_betas(setup):
    model, low, _ = setup
    res = run(model, low, low, beta=[0.95, 0.99])
    assert [e.beta for e in res.estimates] == [0.95, 0.99]
    assert res.estimates[1].cvar >= res.estimates[0].cvar
