import os
import subprocess
import sys

import numpy as np
import pytest

from ddgpce import _kernels
from ddgpce.models import builtin_truss36, truss36_input_model
from ddgpce.distributions import sample
from ddgpce.multiindex import generate_reduced

pytestmark = pytest.mark.skipif(_kernels.numba_impl is None, reason="numba unavailable")


def test_monomials_bit_identical():
    iset = generate_reduced(5, 2, 4)
    v, p = iset.sparse()
    z = np.random.default_rng(0).normal(size=(777, 5))
    a = _kernels.numpy_impl.monomials(z, v, p, iset.max_power)
    b = _kernels.numba_impl.monomials(z, v, p, iset.max_power)
    assert np.array_equal(a, b)


def test_truss_solve_agree():
    fine, _ = builtin_truss36()
    c = fine._setup()
    areas = fine.element_areas(sample(truss36_input_model(), "mcs", 50, 2).points)
    ua, oka = _kernels.numpy_impl.truss_solve(areas, c["kunit"], c["force"])
    ub, okb = _kernels.numba_impl.truss_solve(areas, c["kunit"], c["force"])
    assert oka.all() and okb.all()
    assert np.allclose(ua, ub, rtol=1e-10, atol=1e-10 * np.abs(ua).max())


def test_truss_solve_flags_singular_sample():
    fine, _ = builtin_truss36()
    c = fine._setup()
    areas = np.full((3, 36), 30.0)
    areas[1] = 0.0
    for impl in (_kernels.numpy_impl, _kernels.numba_impl):
        _, ok = impl.truss_solve(areas, c["kunit"], c["force"])
        assert list(ok) == [True, False, True]


@pytest.mark.parametrize("value,expected", [("1", "numpy"), ("yes", "numpy"), ("0", "numba"), ("", "numba")])
def test_environment_flag(value, expected):
    env = {**os.environ, "DDGPCE_DISABLE_NUMBA": value}
    out = subprocess.run([sys.executable, "-c", "from ddgpce import _kernels; print(_kernels.backend_name())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected


def test_flag_read_at_call_time(monkeypatch):
    monkeypatch.setenv("DDGPCE_DISABLE_NUMBA", "1")
    assert _kernels.backend_name() == "numpy"
    monkeypatch.setenv("DDGPCE_DISABLE_NUMBA", "0")
    assert _kernels.backend_name() == "numba"


def test_pipeline_same_on_both_backends(monkeypatch, gauss3):
    from ddgpce.orthopoly import build_basis

    iset = generate_reduced(3, 2, 3)
    monkeypatch.setenv("DDGPCE_DISABLE_NUMBA", "1")
    a = build_basis(gauss3, iset, 20_000)
    monkeypatch.setenv("DDGPCE_DISABLE_NUMBA", "0")
    b = build_basis(gauss3, iset, 20_000)
    assert np.array_equal(a.whitening, b.whitening)
