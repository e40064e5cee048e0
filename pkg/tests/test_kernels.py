import os
import subprocess
import sys

import numpy as np
import pytest
from scipy.stats import norm

from constrained_risk import kernels
from constrained_risk.loss import absolute, power, squared, threshold
from constrained_risk.simulate import random_instances

BACKENDS = [pytest.param(kernels.numpy_impl, id="numpy"),
            pytest.param(kernels.numba_impl, id="numba",
                         marks=pytest.mark.skipif(kernels.numba_impl is None,
                                                  reason="numba unavailable"))]

LOSSES = [(squared(), True), (absolute(), True), (power(1.5), True), (power(0.5), False),
          (threshold(0.4), False)]


@pytest.mark.parametrize("impl", BACKENDS)
@pytest.mark.parametrize("loss, convex", LOSSES, ids=lambda x: getattr(x, "name", str(x)))
def test_oracle_budget_respected(impl, loss, convex):
    sizes, p0, p1, t0, t1, delta = random_instances(100, 11, loss)
    D = np.abs(t1 - t0)
    s, r1, r0, lam, status = impl.oracle_batch(p0, p1, D, delta, *loss.kernel, convex)
    assert np.all(status != kernels.STATUS_INFEASIBLE)
    assert np.all(r0 <= delta + 1e-9)
    assert np.all((s >= 0) & (s <= 1))
    # recompute both risks from s
    v = s * D[:, None]
    assert np.allclose(r1, np.sum(p1 * loss((1 - s) * D[:, None]), axis=1), atol=1e-12)
    assert np.allclose(r0, np.sum(p0 * loss(v), axis=1), atol=1e-12)


@pytest.mark.skipif(kernels.numba_impl is None, reason="numba unavailable")
@pytest.mark.parametrize("loss, convex", LOSSES, ids=lambda x: getattr(x, "name", str(x)))
def test_backends_agree(loss, convex):
    sizes, p0, p1, t0, t1, delta = random_instances(100, 5, loss)
    D = np.abs(t1 - t0)
    a = kernels.numpy_impl.oracle_batch(p0, p1, D, delta, *loss.kernel, convex)
    b = kernels.numba_impl.oracle_batch(p0, p1, D, delta, *loss.kernel, convex)
    assert np.array_equal(a[4], b[4])
    # pow() may differ in the last ulp between backends, which can flip a
    # golden-section step; agreement is then at the 1e-10 bracket tolerance
    assert np.allclose(a[1], b[1], rtol=1e-8, atol=1e-10)
    assert np.allclose(a[2], b[2], rtol=1e-8, atol=1e-10)


@pytest.mark.parametrize("impl", BACKENDS)
@pytest.mark.parametrize("code, param", [(0, 2.0), (0, 1.0), (0, 3.0), (1, 0.2)])
def test_estimator_losses(impl, rng, code, param):
    x = rng.normal(0.1, 1.0, (500, 25))
    tau, theta = 0.15, 0.1
    m = x.mean(axis=1)
    est = np.where(np.abs(m) > tau, m, 0.0)
    err = np.abs(est - theta)
    expected = err ** param if code == 0 else (err >= param).astype(float)
    assert np.allclose(impl.estimator_losses(x, tau, theta, code, param), expected,
                       rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("impl", BACKENDS)
def test_gauss_loglr(impl, rng):
    x = rng.normal(size=(50, 7))
    expected = np.sum(norm.logpdf(x, 0.3, np.sqrt(1.5)) - norm.logpdf(x, -0.1, 1.0), axis=1)
    assert np.allclose(impl.gauss_loglr(x, 0.3, 1.5, -0.1, 1.0), expected, rtol=1e-12)


def test_trivial_and_infeasible_status():
    p0 = np.array([[0.5, 0.5]])
    p1 = np.array([[0.25, 0.75]])
    s, r1, r0, lam, status = kernels.numpy_impl.oracle_batch(p0, p1, np.array([1.0]),
                                                             np.array([5.0]), 0, 2.0, True)
    assert status[0] == kernels.STATUS_TRIVIAL and r1[0] == 0.0
    s, r1, r0, lam, status = kernels.numpy_impl.oracle_batch(p0, p1, np.array([1.0]),
                                                             np.array([-1.0]), 0, 2.0, True)
    assert status[0] == kernels.STATUS_INFEASIBLE


@pytest.mark.parametrize("flag, expected", [("1", "numpy"), ("", None)])
def test_env_flag_selects_backend(flag, expected):
    env = dict(os.environ, CONSTRAINED_RISK_NO_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c",
                          "import constrained_risk as c; print(c.backend_name())"],
                         env=env, capture_output=True, text=True, check=True).stdout.strip()
    if expected is None:
        expected = "numba" if kernels.numba_impl is not None else "numpy"
    assert out == expected
