import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hypokfp.errors import UsageError
from hypokfp.solver import QuadratureSpec
from hypokfp.symbols import FrequencyPoint
from hypokfp.trial import (SpatialPacket, TimeProfile, TrialFunction, dilate_trial, f_hat, f_value,
                           rhs_l2_norm)

GAUSS = TrialFunction.single(TimeProfile(-1.0, 0.0), SpatialPacket.gaussian(1))


def w(xi, eta=0.0, zeta=0.0):
    return FrequencyPoint([xi], [eta], [zeta])


def test_gaussian_transform_values():
    assert f_hat(GAUSS, -2.0, w(0.3)) == 0
    assert complex(f_hat(GAUSS, -0.5, w(0.0))) == pytest.approx((2 * math.pi) ** 1.5, rel=1e-15)


def test_hermite_order_one_transform():
    pkt = SpatialPacket(((0.0,),) * 3, ((1.0,),) * 3, ((1,), (0,), (0,)), ((0.0,),) * 3)
    xi = 0.7
    expected = -1j * math.sqrt(2 * math.pi) * xi * math.exp(-xi * xi / 2) * 2 * math.pi
    assert complex(pkt.hat(w(xi))) == pytest.approx(expected, rel=1e-14)


@given(st.floats(-2, 2), st.floats(0.5, 2), st.integers(0, 3), st.floats(-1, 1))
def test_transform_matches_physical_quadrature(c, b, k, om):
    pkt = SpatialPacket(((c,), (0.0,), (0.0,)), ((b,), (1.0,), (1.0,)), ((k,), (0,), (0,)),
                        ((om,), (0.0,), (0.0,)))
    xs = np.linspace(c - 12 / b, c + 12 / b, 6001)
    vals = pkt.value(xs[:, None], np.zeros((xs.size, 1)), np.zeros((xs.size, 1)))
    xi = 0.4
    num = np.trapezoid(vals * np.exp(-1j * xi * xs), xs) * 2 * math.pi
    assert complex(pkt.hat(w(xi))) == pytest.approx(num, abs=1e-8)


def test_rhs_norm_examples():
    base = rhs_l2_norm(GAUSS)
    assert base == pytest.approx(math.pi ** 0.75, rel=1e-12)
    assert rhs_l2_norm(GAUSS.scaled(2.0)) == pytest.approx(2 * base, rel=1e-14)
    later = TrialFunction.single(TimeProfile(0.0, 2.0), SpatialPacket.gaussian(1))
    assert rhs_l2_norm(GAUSS + later) ** 2 == pytest.approx(base ** 2 + rhs_l2_norm(later) ** 2,
                                                            rel=1e-10)


def test_bump_profile_smooth_and_supported():
    p = TimeProfile(-1.0, 0.0, "bump", order=3)
    ts = np.linspace(-1.5, 0.5, 401)
    v = p(ts)
    assert np.all(v[(ts <= -1) | (ts >= 0)] == 0)
    assert np.all(v[(ts > -1) & (ts < 0)] > 0)
    assert p.breakpoints()[0] == -1.0 and p.breakpoints()[-1] == 0.0


def test_dilation_identity_and_widths():
    assert dilate_trial(GAUSS, 1.0) == GAUSS
    d = dilate_trial(GAUSS, 2.0)
    prof, pkt, _ = d.packets[0]
    assert (prof.s0, prof.s1) == (-0.25, 0.0)
    assert pkt.inv_width == ((2.0,), (8.0,), (32.0,))


@pytest.mark.parametrize("r", [0.5, 2.0, 3.0])
def test_dilation_norm_law(r):
    trial = TrialFunction.single(TimeProfile(-0.8, 0.1, "bump"),
                                 SpatialPacket(((0.3,), (0.2,), (-0.1,)), ((1.2,), (0.8,), (1.0,)),
                                               ((1,), (0,), (2,)), ((0.5,), (0.0,), (0.3,))))
    ratio = rhs_l2_norm(dilate_trial(trial, r)) / rhs_l2_norm(trial)
    assert ratio == pytest.approx(r ** (-11 / 2), rel=1e-8)


def test_f_value_matches_packet():
    assert f_value(GAUSS, -0.5, np.array([[0.0]]), np.array([[0.0]]), np.array([[0.0]])) == pytest.approx(1.0)
    assert f_value(GAUSS, 0.5, np.array([[0.0]]), np.array([[0.0]]), np.array([[0.0]])) == 0


@pytest.mark.parametrize("kwargs", [
    dict(s0=0.0, s1=0.0), dict(s0=0.0, s1=1.0, shape="triangle"),
])
def test_profile_validation(kwargs):
    with pytest.raises(UsageError):
        TimeProfile(**kwargs)


def test_quadrature_spec_validation():
    with pytest.raises(UsageError):
        QuadratureSpec(freq_nodes=(1, 2))
    with pytest.raises(UsageError):
        QuadratureSpec(rel_tol=2.0)
