"""Hot numeric kernels with numba and pure-numpy implementations.

The numba path is used when numba imports and the environment variable
``DDGPCE_DISABLE_NUMBA`` is unset or falsy.  Both paths are always importable
(``numpy_impl`` / ``numba_impl``) so tests and the benchmark can compare them.

The monomial kernels multiply factors in the same order on both paths and
return bit-identical results.  The truss kernels use different factorizations
(hand-rolled Cholesky vs LAPACK) and agree to rounding.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

_FALSY = {"", "0", "false", "no", "off"}


def _env_disabled() -> bool:
    return os.environ.get("DDGPCE_DISABLE_NUMBA", "").strip().lower() not in _FALSY


# ---------------------------------------------------------------------------
# numpy implementations


def _monomials_np(z, variables, powers, max_power):
    L, N = z.shape
    table = np.empty((L, N, max_power + 1))
    table[:, :, 0] = 1.0
    for p in range(1, max_power + 1):
        table[:, :, p] = table[:, :, p - 1] * z
    out = np.ones((L, variables.shape[0]))
    for t in range(variables.shape[1]):
        out *= table[:, variables[:, t], powers[:, t]]
    return out


def _truss_solve_np(areas, kunit, force):
    """Solve sum_e a_e K_e u = f for each row of ``areas``.

    Returns ``(u, ok)`` where ``ok[l]`` is False if the stiffness matrix of
    sample ``l`` is not positive definite.
    """
    L = areas.shape[0]
    nf = kunit.shape[1]
    K = np.tensordot(areas, kunit, axes=(1, 0))
    ok = np.ones(L, dtype=bool)
    u = np.zeros((L, nf))
    try:
        np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        for l in range(L):
            try:
                np.linalg.cholesky(K[l])
            except np.linalg.LinAlgError:
                ok[l] = False
    if ok.any():
        rhs = np.broadcast_to(force, (int(ok.sum()), nf))[..., None]
        u[ok] = np.linalg.solve(K[ok], rhs)[..., 0]
    return u, ok


numpy_impl = SimpleNamespace(
    name="numpy", monomials=_monomials_np, truss_solve=_truss_solve_np
)


# ---------------------------------------------------------------------------
# numba implementations

try:
    import numba as _nb
except ImportError:  # pragma: no cover - numba is a declared dependency
    _nb = None

if _nb is not None:

    @_nb.njit(cache=True)
    def _monomials_nb(z, variables, powers, max_power):
        L, N = z.shape
        K, T = variables.shape
        out = np.empty((L, K))
        table = np.empty((N, max_power + 1))
        for l in range(L):
            for i in range(N):
                table[i, 0] = 1.0
                for p in range(1, max_power + 1):
                    table[i, p] = table[i, p - 1] * z[l, i]
            for k in range(K):
                v = 1.0
                for t in range(T):
                    v *= table[variables[k, t], powers[k, t]]
                out[l, k] = v
        return out

    @_nb.njit(cache=True)
    def _truss_solve_nb(areas, kunit, force):
        L, E = areas.shape
        nf = kunit.shape[1]
        u = np.zeros((L, nf))
        ok = np.ones(L, dtype=np.bool_)
        K = np.empty((nf, nf))
        y = np.empty(nf)
        for l in range(L):
            K[:, :] = 0.0
            for e in range(E):
                a = areas[l, e]
                for i in range(nf):
                    for j in range(nf):
                        K[i, j] += a * kunit[e, i, j]
            # in-place lower Cholesky
            for j in range(nf):
                s = K[j, j]
                for k in range(j):
                    s -= K[j, k] * K[j, k]
                if not s > 0.0:
                    ok[l] = False
                    break
                d = np.sqrt(s)
                K[j, j] = d
                for i in range(j + 1, nf):
                    s = K[i, j]
                    for k in range(j):
                        s -= K[i, k] * K[j, k]
                    K[i, j] = s / d
            if not ok[l]:
                continue
            for i in range(nf):
                s = force[i]
                for k in range(i):
                    s -= K[i, k] * y[k]
                y[i] = s / K[i, i]
            for i in range(nf - 1, -1, -1):
                s = y[i]
                for k in range(i + 1, nf):
                    s -= K[k, i] * u[l, k]
                u[l, i] = s / K[i, i]
        return u, ok

    numba_impl = SimpleNamespace(
        name="numba", monomials=_monomials_nb, truss_solve=_truss_solve_nb
    )
else:  # pragma: no cover
    numba_impl = None


def active():
    """The backend selected by the environment at call time."""
    if numba_impl is None or _env_disabled():
        return numpy_impl
    return numba_impl


def backend_name() -> str:
    return active().name


def monomials(z, variables, powers, max_power):
    z = np.ascontiguousarray(z, dtype=np.float64)
    return active().monomials(
        z,
        np.ascontiguousarray(variables, dtype=np.int64),
        np.ascontiguousarray(powers, dtype=np.int64),
        int(max_power),
    )


def truss_solve(areas, kunit, force):
    return active().truss_solve(
        np.ascontiguousarray(areas, dtype=np.float64),
        np.ascontiguousarray(kunit, dtype=np.float64),
        np.ascontiguousarray(force, dtype=np.float64),
    )
