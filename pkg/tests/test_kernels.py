import os
import subprocess
import sys

import numpy as np
import pytest
from numpy.polynomial.hermite import hermgauss

from stratos import _kernels_py, kernels

compiled = pytest.importorskip("stratos._kernels")


@pytest.fixture
def problem():
    rng = np.random.default_rng(4)
    sizes = rng.integers(1, 9, 300)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    n = offsets[-1]
    eta = rng.normal(-0.5, 1.5, n)
    y = (rng.random(n) < 0.4).astype(float)
    return eta, y, offsets


@pytest.mark.parametrize("sigma2", [0.0, 0.3, 4.0, 80.0])
def test_modes_agree(problem, sigma2):
    eta, y, off = problem
    b0 = np.zeros(off.size - 1)
    for a, b in zip(_kernels_py.cluster_modes(eta, y, off, sigma2, b0), compiled.cluster_modes(eta, y, off, sigma2, b0)):
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-10)


def test_mode_solves_the_score(problem):
    eta, y, off = problem
    s2 = 2.0
    b, _, ok = kernels.cluster_modes(eta, y, off, s2, np.zeros(off.size - 1))
    assert ok
    p = 1 / (1 + np.exp(-(eta + np.repeat(b, np.diff(off)))))
    g = np.add.reduceat(y - p, off[:-1]) - b / s2
    assert np.max(np.abs(g)) < 1e-8


@pytest.mark.parametrize("k", [1, 5, 21])
def test_quadrature_agree(problem, k):
    eta, y, off = problem
    s2 = 0.7
    b, h, _ = _kernels_py.cluster_modes(eta, y, off, s2, np.zeros(off.size - 1))
    h = h + 1 / s2
    nodes, weights = hermgauss(k)
    np.testing.assert_allclose(_kernels_py.agq_log_integrals(eta, y, off, b, h, s2, nodes, weights),
                               compiled.agq_log_integrals(eta, y, off, b, h, s2, nodes, weights), rtol=1e-12)
    for a, c in zip(_kernels_py.agq_posterior_residuals(eta, y, off, b, h, s2, nodes, weights),
                    compiled.agq_posterior_residuals(eta, y, off, b, h, s2, nodes, weights)):
        np.testing.assert_allclose(a, c, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(_kernels_py.cluster_loglik(eta, y, off, b), compiled.cluster_loglik(eta, y, off, b),
                               rtol=1e-12)


def test_rank_sum_counts_agree():
    d = np.array([2, 5, 5, 8, 10, 12, 14, 16, 18, 20], dtype=np.int64)
    for n1 in range(0, 11):
        np.testing.assert_array_equal(_kernels_py.rank_sum_counts(d, n1), compiled.rank_sum_counts(d, n1))


def test_env_forces_python_backend():
    code = "import stratos.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, STRATOS_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert kernels.BACKEND == ("python" if os.environ.get("STRATOS_PURE_PYTHON", "") not in ("", "0") else "cython")
