"""Measure-consistent orthonormal polynomials via moment-matrix whitening.

Three steps, shared by the multivariate input basis and the univariate basis
in the low-fidelity output:

1. monomial vector M(x) over a multi-index set,
2. moment matrix G = E[M M^T] estimated by (quasi-)Monte Carlo,
3. G = Q Q^T (Cholesky), W = Q^{-1}, Psi(x) = W M(x).

Inputs are affinely standardized before monomials are formed.  The map is
invertible and is absorbed by W, so the polynomial space and the resulting
orthonormal functions are unchanged while G is far better conditioned.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.linalg import solve_triangular

from . import _kernels
from .distributions import CHUNK, RandomInputModel, input_blocks
from .errors import (
    ConfigError,
    IllConditionedWarning,
    NonFiniteMomentError,
    NotPositiveDefiniteError,
)
from .multiindex import MultiIndexSet, univariate

log = logging.getLogger(__name__)

DEFAULT_MOMENT_SAMPLES = 5_000_000
COND_WARN = 1e12
JITTER_STEPS = (1e-14, 1e-13, 1e-12, 1e-11, 1e-10)


@dataclass(frozen=True, eq=False)
class MomentMatrix:
    matrix: np.ndarray
    sample_count: int
    shift: np.ndarray
    scale: np.ndarray

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def condition_estimate(self) -> float:
        """Squared ratio of extreme Cholesky diagonal entries (>= 1)."""
        try:
            d = np.abs(np.diag(np.linalg.cholesky(self.matrix)))
        except np.linalg.LinAlgError:
            return float("inf")
        return float((d.max() / d.min()) ** 2)


def monomial_vector(index_set: MultiIndexSet, points) -> np.ndarray:
    """Monomials x^j for every j in ``index_set``.

    A single point of shape ``(N,)`` gives a ``(K,)`` vector, a batch of shape
    ``(L, N)`` gives ``(L, K)``.  Points are used as given (no standardization).
    """
    x = np.asarray(points, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != index_set.dimension:
        raise ConfigError(
            f"point dimension {x.shape[1]} does not match index set dimension {index_set.dimension}"
        )
    variables, powers = index_set.sparse()
    out = _monomials_chunked(x, variables, powers, index_set.max_power)
    return out[0] if single else out


def _monomials_chunked(z, variables, powers, max_power):
    L = z.shape[0]
    if L <= CHUNK:
        return _kernels.monomials(z, variables, powers, max_power)
    out = np.empty((L, variables.shape[0]))
    for s in range(0, L, CHUNK):
        out[s : s + CHUNK] = _kernels.monomials(z[s : s + CHUNK], variables, powers, max_power)
    return out


class _PairwiseSum:
    """Streaming pairwise (binary-counter) summation of equally sized blocks.

    The reduction tree depends only on the number of blocks, so the result is
    independent of how the caller is scheduled.
    """

    def __init__(self):
        self._stack: list[tuple[int, np.ndarray]] = []

    def add(self, value: np.ndarray):
        level, v = 0, value
        while self._stack and self._stack[-1][0] == level:
            _, prev = self._stack.pop()
            v = prev + v
            level += 1
        self._stack.append((level, v))

    def total(self) -> np.ndarray:
        if not self._stack:
            raise ValueError("empty sum")
        acc = self._stack[-1][1]
        for _, v in reversed(self._stack[:-1]):
            acc = v + acc
        return acc


def moment_matrix_from_blocks(
    blocks: Iterable[np.ndarray], index_set: MultiIndexSet, shift, scale
) -> MomentMatrix:
    """Estimate E[M M^T] of standardized inputs from a stream of raw point blocks."""
    variables, powers = index_set.sparse()
    shift = np.asarray(shift, dtype=float)
    scale = np.asarray(scale, dtype=float)
    acc = _PairwiseSum()
    n = 0
    for x in blocks:
        z = (np.asarray(x, dtype=float).reshape(len(x), -1) - shift) / scale
        M = _kernels.monomials(z, variables, powers, index_set.max_power)
        acc.add(M.T @ M)
        n += M.shape[0]
    G = acc.total() / n
    bad = np.argwhere(~np.isfinite(G))
    if bad.size:
        i, j = (int(v) for v in bad[0])
        raise NonFiniteMomentError(
            f"non-finite moment E[x^{index_set[i].exponents} x^{index_set[j].exponents}]",
            pair=(i, j),
        )
    G = 0.5 * (G + G.T)
    G[0, 0] = 1.0
    return MomentMatrix(G, n, shift, scale)


def estimate_moment_matrix(
    model: RandomInputModel,
    index_set: MultiIndexSet,
    n_samples: int = DEFAULT_MOMENT_SAMPLES,
    seed: int = 0,
    scheme: str = "qmc",
) -> MomentMatrix:
    """QMC estimate of the monomial moment matrix under the input law.

    Inputs are standardized with the exact marginal means and standard
    deviations of ``model``.
    """
    _check_sample_count(n_samples, index_set.cardinality)
    if model.dimension != index_set.dimension:
        raise ConfigError(
            f"input model has dimension {model.dimension}, index set {index_set.dimension}"
        )
    blocks = input_blocks(model, scheme, n_samples, seed)
    return moment_matrix_from_blocks(blocks, index_set, model.means, model.stds)


def estimate_moment_matrix_from_samples(samples, index_set: MultiIndexSet) -> MomentMatrix:
    """Moment matrix from an explicit sample, standardized by its own mean/std."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    _check_sample_count(x.shape[0], index_set.cardinality)
    shift = x.mean(axis=0)
    scale = x.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    blocks = (x[s : s + CHUNK] for s in range(0, x.shape[0], CHUNK))
    return moment_matrix_from_blocks(blocks, index_set, shift, scale)


def _check_sample_count(n, K):
    if n < 10 * K:
        raise ConfigError(f"moment estimation needs at least 10*K = {10 * K} samples, got {n}")


@dataclass(frozen=True, eq=False)
class OrthonormalBasis:
    """Psi(x) = W M((x - shift) / scale) over ``index_set``."""

    index_set: MultiIndexSet
    whitening: np.ndarray
    shift: np.ndarray
    scale: np.ndarray
    jitter: float = 0.0
    condition_estimate: float = 1.0
    _variables: np.ndarray = field(init=False, repr=False)
    _powers: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v, p = self.index_set.sparse()
        object.__setattr__(self, "_variables", v)
        object.__setattr__(self, "_powers", p)

    @property
    def size(self) -> int:
        return self.index_set.cardinality

    @property
    def dimension(self) -> int:
        return self.index_set.dimension

    def monomials(self, x) -> np.ndarray:
        z = (x - self.shift) / self.scale
        return _monomials_chunked(z, self._variables, self._powers, self.index_set.max_power)

    def __call__(self, points) -> np.ndarray:
        return eval_basis(self, points)


def whiten(G: MomentMatrix, index_set: MultiIndexSet) -> OrthonormalBasis:
    """Whitening matrix from the Cholesky factor of G.

    If the factorization fails, a diagonal jitter eps * max(diag G) is added to
    every diagonal entry except the constant one, escalating eps from 1e-14 to
    1e-10.  The jitter used is logged and stored on the basis.
    """
    A = np.array(G.matrix, dtype=float)
    if A.shape != (index_set.cardinality,) * 2:
        raise ConfigError("moment matrix size does not match the index set")
    jitter = 0.0
    try:
        Q = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        Q = None
        base = float(np.max(np.diag(A)))
        for eps in JITTER_STEPS:
            B = A.copy()
            B[np.arange(1, len(B)), np.arange(1, len(B))] += eps * base
            try:
                Q = np.linalg.cholesky(B)
            except np.linalg.LinAlgError:
                continue
            jitter = eps * base
            log.warning("moment matrix not positive definite; applied diagonal jitter %.3g", jitter)
            break
        if Q is None:
            raise NotPositiveDefiniteError(
                f"moment matrix of size {len(A)} is not positive definite after jitter up to "
                f"{JITTER_STEPS[-1]:g} * max diag"
            )
    d = np.abs(np.diag(Q))
    cond = float((d.max() / d.min()) ** 2)
    if cond > COND_WARN:
        warnings.warn(
            f"moment matrix condition estimate {cond:.3g} exceeds {COND_WARN:g}",
            IllConditionedWarning,
            stacklevel=2,
        )
    W = solve_triangular(Q, np.eye(len(Q)), lower=True)
    return OrthonormalBasis(index_set, W, G.shift, G.scale, jitter, cond)


def eval_basis(basis: OrthonormalBasis, points) -> np.ndarray:
    """Psi at one point (``(N,)`` -> ``(K,)``) or a batch (``(L, N)`` -> ``(L, K)``)."""
    x = np.asarray(points, dtype=float)
    single = (x.ndim == 1 and basis.dimension > 1) or x.ndim == 0
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x[None, :] if single else x[:, None]
    if x.shape[1] != basis.dimension:
        raise ConfigError(f"point dimension {x.shape[1]} does not match basis dimension {basis.dimension}")
    psi = basis.monomials(x) @ basis.whitening.T
    return psi[0] if single else psi


def build_basis(
    model: RandomInputModel,
    index_set: MultiIndexSet,
    n_samples: int = DEFAULT_MOMENT_SAMPLES,
    seed: int = 0,
) -> OrthonormalBasis:
    return whiten(estimate_moment_matrix(model, index_set, n_samples, seed), index_set)


def build_univariate_basis(samples, degree: int) -> OrthonormalBasis:
    """Orthonormal polynomials of degree <= ``degree`` for a scalar sample."""
    iset = univariate(degree)
    return whiten(estimate_moment_matrix_from_samples(np.ravel(samples), iset), iset)


def gram_deviation(basis: OrthonormalBasis, points) -> float:
    """max |mean(Psi_i Psi_j) - delta_ij| over a validation sample."""
    P = eval_basis(basis, points)
    if P.ndim == 1:
        P = P[None, :]
    return float(np.max(np.abs(P.T @ P / P.shape[0] - np.eye(P.shape[1]))))
