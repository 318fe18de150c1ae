import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import hermite_e, legendre

from ddgpce.distributions import Marginal, RandomInputModel, sample
from ddgpce.errors import ConfigError, IllConditionedWarning, NonFiniteMomentError, NotPositiveDefiniteError
from ddgpce.multiindex import generate_full, generate_reduced, univariate
from ddgpce.orthopoly import (
    MomentMatrix,
    _PairwiseSum,
    build_basis,
    build_univariate_basis,
    estimate_moment_matrix,
    eval_basis,
    gram_deviation,
    monomial_vector,
    moment_matrix_from_blocks,
    whiten,
)


def gaussian_moment(k):
    return 0.0 if k % 2 else float(math.prod(range(k - 1, 0, -2)))


def hermite_orthonormal(k, z):
    c = np.zeros(k + 1)
    c[k] = 1.0
    return hermite_e.hermeval(z, c) / math.sqrt(math.factorial(k))


def legendre_orthonormal(k, t):
    c = np.zeros(k + 1)
    c[k] = 1.0
    return legendre.legval(t, c) * math.sqrt(2 * k + 1)


def exact_moment_matrix(iset, moment):
    K = iset.cardinality
    G = np.empty((K, K))
    for i in range(K):
        for j in range(K):
            G[i, j] = math.prod(moment(int(a + b)) for a, b in zip(iset.exponents[i], iset.exponents[j]))
    return MomentMatrix(G, 0, np.zeros(iset.dimension), np.ones(iset.dimension))


def test_whitening_reproduces_hermite():
    iset = univariate(5)
    basis = whiten(exact_moment_matrix(iset, gaussian_moment), iset)
    z = np.linspace(-3, 3, 13)
    P = eval_basis(basis, z)
    for k in range(6):
        assert np.allclose(P[:, k], hermite_orthonormal(k, z), atol=1e-9)


def test_whitening_reproduces_legendre():
    def uniform_moment(k):  # U(-1, 1)
        return 0.0 if k % 2 else 1.0 / (k + 1)

    iset = univariate(4)
    basis = whiten(exact_moment_matrix(iset, uniform_moment), iset)
    t = np.linspace(-1, 1, 9)
    for k in range(5):
        assert np.allclose(eval_basis(basis, t)[:, k], legendre_orthonormal(k, t), atol=1e-9)


def test_tensor_hermite_for_independent_gaussians():
    iset = generate_reduced(3, 2, 3)
    basis = whiten(exact_moment_matrix(iset, gaussian_moment), iset)
    rng = np.random.default_rng(0)
    z = rng.standard_normal((20, 3))
    P = eval_basis(basis, z)
    for k, row in enumerate(iset.exponents):
        want = np.prod([hermite_orthonormal(int(j), z[:, i]) for i, j in enumerate(row)], axis=0)
        assert np.allclose(P[:, k], want, atol=1e-8)


def test_qmc_moment_matrix_close_to_exact():
    model = RandomInputModel.independent([Marginal.normal(2.0, 3.0)] * 2)
    iset = generate_full(2, 3)
    G = estimate_moment_matrix(model, iset, 2**16, seed=1)
    assert np.allclose(G.matrix, exact_moment_matrix(iset, gaussian_moment).matrix, rtol=0.01, atol=0.05)
    assert G.matrix[0, 0] == 1.0 and np.array_equal(G.matrix, G.matrix.T)


def test_basis_under_affine_standardization():
    # the orthonormal functions do not depend on the standardization map
    model = RandomInputModel.independent([Marginal.normal(10.0, 0.5)])
    basis = build_basis(model, univariate(3), 2**17, seed=3)
    x = np.linspace(8.5, 11.5, 7)
    for k in range(4):
        assert np.allclose(eval_basis(basis, x)[:, k], hermite_orthonormal(k, (x - 10) / 0.5), atol=2e-2)


def test_monomial_vector():
    iset = generate_full(2, 2)
    assert np.allclose(monomial_vector(iset, [2.0, 3.0]), [1, 2, 3, 4, 6, 9])
    assert monomial_vector(iset, np.ones((5, 2))).shape == (5, 6)
    with pytest.raises(ConfigError):
        monomial_vector(iset, [1.0, 2.0, 3.0])


def test_single_point_and_scalar_evaluation(gauss3):
    basis = build_basis(gauss3, generate_reduced(3, 2, 2), 20_000)
    x = sample(gauss3, "mcs", 4, 0).points
    assert np.allclose(eval_basis(basis, x[1]), eval_basis(basis, x)[1])
    ub = build_univariate_basis(np.random.default_rng(0).normal(size=1000), 2)
    assert eval_basis(ub, 0.5).shape == (3,)
    assert np.allclose(eval_basis(ub, 0.5), eval_basis(ub, np.array([0.5]))[0])


def test_first_function_is_constant_one(mixed4):
    basis = build_basis(mixed4, generate_reduced(4, 2, 2), 50_000)
    x = sample(mixed4, "mcs", 10, 1).points
    assert np.allclose(eval_basis(basis, x)[:, 0], 1.0)


def test_gram_identity_on_fresh_qmc(mixed4):
    basis = build_basis(mixed4, generate_reduced(4, 2, 3), 200_000, seed=1)
    assert gram_deviation(basis, sample(mixed4, "qmc", 200_000, seed=9).points) < 0.03


def test_jitter_rescues_semidefinite():
    # a two-point law makes x^2 = 1, so the degree-2 moment matrix is singular
    y = np.tile([-1.0, 1.0], 500)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IllConditionedWarning)
        basis = build_univariate_basis(y, 2)
    assert basis.jitter > 0


def test_not_positive_definite():
    iset = univariate(2)
    G = MomentMatrix(np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, -5.0]]), 0, np.zeros(1), np.ones(1))
    with pytest.raises(NotPositiveDefiniteError):
        whiten(G, iset)


def test_ill_conditioning_warns():
    iset = univariate(1)
    G = MomentMatrix(np.diag([1.0, 1e-14]), 0, np.zeros(1), np.ones(1))
    with pytest.warns(IllConditionedWarning):
        whiten(G, iset)


def test_non_finite_moment_names_pair():
    iset = univariate(2)
    blocks = [np.array([[1.0], [np.inf]])]
    with pytest.raises(NonFiniteMomentError) as err:
        moment_matrix_from_blocks(blocks, iset, np.zeros(1), np.ones(1))
    assert err.value.pair is not None


def test_too_few_moment_samples(gauss3):
    with pytest.raises(ConfigError):
        estimate_moment_matrix(gauss3, generate_reduced(3, 1, 2), 50)


def test_pairwise_sum_matches_plain_sum():
    rng = np.random.default_rng(1)
    parts = [rng.normal(size=(3, 3)) for _ in range(37)]
    acc = _PairwiseSum()
    for p in parts:
        acc.add(p)
    assert np.allclose(acc.total(), np.sum(parts, axis=0), atol=1e-12)


def test_univariate_basis_orthonormal_on_its_sample():
    y = np.random.default_rng(4).lognormal(size=20_000)
    basis = build_univariate_basis(y, 3)
    assert gram_deviation(basis, y) < 1e-8


@given(
    N=st.integers(1, 4),
    S=st.integers(1, 2),
    m=st.integers(1, 3),
    rho=st.floats(0.0, 0.8),
    kinds=st.lists(st.sampled_from(["normal", "uniform", "lognormal"]), min_size=4, max_size=4),
    seed=st.integers(1, 2**16),
)
def test_basis_orthonormal_on_its_moment_sample(N, S, m, rho, kinds, seed):
    """Whitening makes the Gram matrix the identity on the sample that built it."""
    S = min(S, N)
    m = max(m, S)
    make = {"normal": lambda: Marginal.normal(1.0, 2.0), "uniform": lambda: Marginal.uniform(-1.0, 3.0),
            "lognormal": lambda: Marginal.lognormal(2.0, 0.3)}
    model = RandomInputModel.equicorrelated([make[k]() for k in kinds[:N]], rho) if N > 1 else \
        RandomInputModel.independent([make[kinds[0]]()])
    basis = build_basis(model, generate_reduced(N, S, m), 4096, seed)
    if basis.jitter:
        return  # regularized bases are only approximately orthonormal
    assert gram_deviation(basis, sample(model, "qmc", 4096, seed).points) < 1e-8
