import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from constrained_risk.bounds import (CONVEX_THM, GENERIC_COR, POWER_LARGE, POWER_SMALL,
                                     bound_convex, bound_for_loss, bound_from_models,
                                     bound_generic, bound_power, hinge)
from constrained_risk.dist import Discrete, Gaussian, Product
from constrained_risk.divergence import affinity_quadrature
from constrained_risk.errors import InvalidInputError
from constrained_risk.loss import absolute, power, separation, squared, threshold

mp.mp.dps = 40


def mp_two_point(sep, aff, budget):
    v = mp.sqrt(mp.mpf(sep)) - mp.sqrt(mp.mpf(aff) * mp.mpf(budget))
    return float(max(v, 0) ** 2)


@pytest.mark.parametrize("x, expected", [(-1.0, 0.0), (0.0, 0.0), (2.5, 2.5)])
def test_hinge(x, expected):
    assert hinge(x) == expected


def test_convex_example():
    rep = bound_convex(1.0, 10.0, 0.01)
    assert rep.value == pytest.approx(mp_two_point(1, 10, "0.01"), rel=1e-14)
    assert rep.value == pytest.approx(0.4675445, abs=1e-7)
    assert rep.branch == CONVEX_THM


def test_convex_trivial_cases():
    assert bound_convex(0.7, 5.0, 0.0).value == pytest.approx(0.7)
    assert bound_convex(1.0, 10.0, 0.1).value == 0.0


def test_generic_example():
    # affinity delta^-c with delta = 1e-3, c = 1/2
    rep = bound_generic(1.0, 10 ** 1.5, 1e-3)
    # sqrt(10^1.5 * 10^-3) = 10^-0.75
    assert rep.value == pytest.approx(float((1 - mp.mpf(10) ** mp.mpf(-0.75)) ** 2), rel=1e-12)
    assert rep.value == pytest.approx(0.6759669, abs=1e-7)
    assert rep.branch == GENERIC_COR
    assert bound_generic(0.0, 3.0, 0.1).value == 0.0
    assert bound_generic(1.0, 1.0, 0.0).value == 1.0


def test_power_k1_example():
    n, eps, alpha = 100, mp.mpf("0.01"), mp.mpf(1) / 8
    theta = mp.sqrt(alpha * mp.log(1 / eps) / n)
    aff = eps ** -alpha
    budget = eps / mp.sqrt(n)
    expected = (mp.sqrt(theta) - mp.sqrt(aff * budget)) ** 2
    rep = bound_power(float(theta), 1.0, float(aff), float(budget))
    assert rep.value == pytest.approx(float(expected), rel=1e-12)
    assert float(theta) == pytest.approx(0.0758714, abs=1e-7)
    assert rep.branch == POWER_SMALL


def test_power_k2_branches_agree():
    rep = bound_power(1.0, 2.0, 2.0, 0.1)
    assert rep.value == pytest.approx(float((1 - mp.sqrt("0.2")) ** 2), rel=1e-13)
    assert rep.value == pytest.approx(0.3055728, abs=1e-7)


def test_power_large_branch():
    rep = bound_power(1.0, 4.0, 2.0, 1e-4)  # delta^2 = 1e-2
    assert rep.branch == POWER_LARGE
    assert rep.value == pytest.approx((1 - math.sqrt(0.02)) ** 4, rel=1e-13)


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0, 3.0, 7.5])
def test_power_zero_budget(k):
    assert bound_power(0.8, k, 1.0, 0.0).value == pytest.approx(0.8 ** k, rel=1e-13)


def test_infinite_affinity_gives_zero():
    assert bound_convex(1.0, math.inf, 1e-12).value == 0.0
    assert bound_power(1.0, 3.0, math.inf, 0.0).value == 0.0


@pytest.mark.parametrize("args", [(1.0, 0.5, 0.1), (-1.0, 2.0, 0.1), (1.0, 2.0, -0.1)])
def test_invalid_inputs(args):
    with pytest.raises(InvalidInputError):
        bound_convex(*args)


@pytest.mark.parametrize("k", [0.0, -1.0, math.inf])
def test_invalid_k(k):
    with pytest.raises(InvalidInputError):
        bound_power(1.0, k, 1.0, 0.1)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 4), st.floats(1, 50), st.floats(0, 0.5))
def test_k2_continuity(sep, aff, budget):
    a = bound_power(sep, 2.0, aff, budget).value
    b = hinge(sep - math.sqrt(aff * budget)) ** 2
    assert abs(a - b) <= 1e-12 * max(1.0, a)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 5), st.floats(1, 100), st.floats(0, 1), st.floats(0, 1), st.floats(1, 3))
def test_monotone(sep, aff, budget, extra, scale):
    base = bound_convex(sep, aff, budget).value
    assert 0.0 <= base <= sep + 1e-12
    assert bound_convex(sep, aff, budget + extra).value <= base + 1e-12
    assert bound_convex(sep, aff * scale, budget).value <= base + 1e-12
    assert bound_convex(sep + extra, aff, budget).value >= base - 1e-12


def test_from_models_identical():
    g = Gaussian(0.0, 1.0)
    assert bound_from_models(g, g, squared(), 0.1).value == 0.0


def test_from_models_matches_manual_threshold():
    n, delta, c = 400, 1e-3, 0.5
    h = 1.0 / math.sqrt(n)
    theta = h * math.sqrt(c * math.log(1 / delta))
    p1, p0 = Product(Gaussian(theta, 1.0), n), Product(Gaussian(0.0, 1.0), n)
    loss = threshold(h / 2)
    rep = bound_from_models(p1, p0, loss, delta)
    manual = bound_generic(separation(loss, 0.0, theta), math.exp(n * theta * theta), delta)
    assert rep.value == pytest.approx(manual.value, rel=1e-9)
    # loss threshold h/2 keeps the pair separated; affinity is delta^-c
    assert rep.value == pytest.approx(0.6759669, abs=1e-6)
    assert rep.provenance["p1"] == p1.spec()


def test_from_models_matches_manual_abs():
    n, eps = 100, 0.01
    theta = math.sqrt(0.125 * math.log(1 / eps) / n)
    rep = bound_from_models(Product(Gaussian(theta, 1.0), n), Product(Gaussian(0.0, 1.0), n),
                            absolute(), eps / math.sqrt(n))
    assert rep.value == pytest.approx(0.0544185816, abs=1e-9)


# --- the inequalities the bound is built from -------------------------------

@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(0.01, 5))
def test_convex_majorization(t, d):
    for loss in (squared(), power(1.5), power(3.0)):
        lhs = math.sqrt(loss(t * d)) + math.sqrt(loss((1 - t) * d))
        assert lhs >= math.sqrt(2 * loss(d / 2)) - 1e-12


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(0.01, 5), st.floats(0.01, 3))
def test_generic_majorization(t, d, tau):
    loss = threshold(tau)
    assert loss(t * d) + loss((1 - t) * d) >= loss(d / 2)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(0.05, 2))
def test_power_majorization(t, k):
    assert (1 - t) ** (k / 2) + t ** (k / 2) >= 1 - 1e-12


def _pmf(draw_list):
    p = np.asarray(draw_list, dtype=float)
    p = p / p.sum()
    p[-1] = 1.0 - p[:-1].sum()
    return p


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.05, 1), min_size=3, max_size=3),
       st.lists(st.floats(0.05, 1), min_size=3, max_size=3),
       st.lists(st.floats(0, 4), min_size=3, max_size=3))
def test_change_of_measure(a, b, f):
    p0, p1, f = _pmf(a), _pmf(b), np.asarray(f)
    aff = affinity_quadrature(Discrete((0, 1, 2), tuple(p1)), Discrete((0, 1, 2), tuple(p0))).value
    assert np.dot(p1, f) <= math.sqrt(aff * np.dot(p0, f * f)) + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.05, 1), min_size=4, max_size=4),
       st.lists(st.floats(0, 3), min_size=4, max_size=4), st.floats(2, 6))
def test_holder_reduction(a, x, k):
    p, x = _pmf(a), np.asarray(x)
    assume(np.any(x > 0))
    assert np.dot(p, x ** 2) <= np.dot(p, x ** k) ** (2 / k) * (1 + 1e-12)


def test_bound_for_loss_dispatch():
    assert bound_for_loss(squared(), 0, 1, 1.0, 0.0).branch == CONVEX_THM
    assert bound_for_loss(threshold(0.1), 0, 1, 1.0, 0.0).branch == GENERIC_COR
    assert bound_for_loss(power(3), 0, 1, 1.0, 0.0).branch == POWER_LARGE
