import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hypokfp.errors import UsageError
from hypokfp.symbols import (CoefficientPath, FrequencyPoint, characteristic, dissipation,
                             frac_power_symbol, multiplier_homogeneity_deviation, multiplier_m,
                             multiplier_sup)

vec = st.lists(st.floats(-3, 3), min_size=3, max_size=3)
PATH = CoefficientPath((-0.6, -0.3, 0.1), (1.0, 1.6), delta=0.5)


def fp(v):
    return FrequencyPoint([v[0]], [v[1]], [v[2]])


def test_characteristic_examples():
    w = FrequencyPoint([0.3], [-1.0], [2.0])
    same = characteristic(0.4, 0.4, w)
    assert np.allclose([same.xi, same.eta, same.zeta], [w.xi, w.eta, w.zeta], rtol=0, atol=0)
    moved = characteristic(0.0, -1.0, FrequencyPoint([0.0], [1.0], [0.0]))
    assert (moved.xi[0], moved.eta[0], moved.zeta[0]) == (-1.0, 1.0, 0.0)


@given(vec, st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_characteristic_flow_composes(v, t, t1, t2):
    w = fp(v)
    a = characteristic(t1, t2, characteristic(t, t1, w))
    b = characteristic(t, t2, w)
    for p, q in zip((a.xi, a.eta, a.zeta), (b.xi, b.eta, b.zeta)):
        assert np.allclose(p, q, rtol=1e-12, atol=1e-12)


def test_dissipation_closed_forms():
    one = CoefficientPath.constant(1.0)
    assert dissipation(one, -0.7, 0.0, FrequencyPoint([1.0], [0.0], [0.0])) == pytest.approx(0.7)
    assert dissipation(one, -0.9, 0.0, FrequencyPoint([0.0], [1.0], [0.0])) == pytest.approx(0.9 ** 3 / 3)


@given(vec, st.floats(-1.5, 0.5), st.floats(0.01, 1.5))
def test_dissipation_matches_quadrature_and_lower_bound(v, t, length):
    w = fp(v)
    tp = t - length
    exact = dissipation(PATH, tp, t, w)
    cuts = [tp] + [b for b in PATH.interior_breakpoints if tp < b < t] + [t]
    gn, gw = np.polynomial.legendre.leggauss(20)
    num = low = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        tau = 0.5 * (hi - lo) * gn + 0.5 * (hi + lo)
        xi = characteristic(t, tau, FrequencyPoint(np.full((20, 1), v[0]), np.full((20, 1), v[1]),
                                                   np.full((20, 1), v[2]))).xi[:, 0]
        a = PATH.matrix_at(0.5 * (lo + hi))[0, 0]
        num += 0.5 * (hi - lo) * np.sum(gw * a * xi ** 2)
        low += 0.5 * (hi - lo) * np.sum(gw * 0.5 * xi ** 2)
    assert exact == pytest.approx(num, rel=1e-10, abs=1e-12)
    assert exact >= low - 1e-12


def test_dissipation_is_additive():
    w = FrequencyPoint([0.4], [1.2], [-0.8])
    whole = dissipation(PATH, -1.0, 0.3, w)
    # the first leg follows the characteristic through (-0.2, w moved to -0.2)
    mid = characteristic(0.3, -0.2, w)
    assert whole == pytest.approx(dissipation(PATH, -1.0, -0.2, mid) + dissipation(PATH, -0.2, 0.3, w),
                                  rel=1e-13)


@pytest.mark.parametrize("kind, w, expected", [
    ("z15", FrequencyPoint([1.0], [1.0], [0.0]), 0.0),
    ("y13", FrequencyPoint([0.0], [8.0], [0.0]), 4.0),
    ("xy16", FrequencyPoint([2.0], [27.0], [0.0]), 6.0),
    ("xx", FrequencyPoint([3.0, 4.0], [0.0, 0.0], [0.0, 0.0]), 25.0),
])
def test_symbol_examples(kind, w, expected):
    assert float(frac_power_symbol(kind, w)) == pytest.approx(expected, rel=1e-14, abs=0)


def test_unknown_symbol_kind():
    with pytest.raises(UsageError):
        frac_power_symbol("nope", FrequencyPoint([1.0], [1.0], [1.0]))


@pytest.mark.parametrize("xi, eta, expected", [(1.0, 1.0, 0.5), (2.0, 8.0, 0.5), (0.0, 0.0, 0.0)])
def test_multiplier_examples(xi, eta, expected):
    assert multiplier_m([xi], [eta]) == pytest.approx(expected, abs=1e-15)


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(0.1, 10))
def test_multiplier_bounded_and_homogeneous(xi, eta, k):
    m = multiplier_m([xi], [eta])
    assert m <= 0.5 + 1e-15
    assert multiplier_m([k * xi], [k ** 3 * eta]) == pytest.approx(m, abs=1e-12)


def test_multiplier_sup_and_wrong_exponent():
    assert abs(multiplier_sup() - 0.5) <= 1e-9
    assert multiplier_homogeneity_deviation(4.0, 3.0) <= 1e-12
    assert multiplier_homogeneity_deviation(4.0, 2.0) > 0.1


@pytest.mark.parametrize("kwargs", [
    dict(breakpoints=(0,), pieces=()),
    dict(breakpoints=(1, 0), pieces=(1.0,)),
    dict(breakpoints=(0, 1), pieces=(3.0,)),
    dict(breakpoints=(0, 1), pieces=(((1.0, 0.3), (0.0, 1.0)),)),
])
def test_coefficient_path_validation(kwargs):
    with pytest.raises(UsageError):
        CoefficientPath(**kwargs, delta=0.5)


def test_rescaled_time():
    s = PATH.rescaled_time(2.0)
    assert s.breakpoints == (-0.15, -0.075, 0.025)
    assert s.matrix_at(-0.1)[0, 0] == PATH.matrix_at(-0.4)[0, 0]
    assert math.isclose(s.matrix_at(0.0)[0, 0], 1.6)
