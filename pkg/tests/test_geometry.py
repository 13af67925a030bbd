from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hypokfp import poly
from hypokfp.errors import UsageError
from hypokfp.geometry import (Cylinder, PhasePoint, PiMultiple, compose, cylinder_contains,
                              cylinder_mask, cylinder_volume, dilate, identity, inverse,
                              oscillation, scaling_conjugation_check)

F = Fraction
coord = st.floats(-5, 5, allow_nan=False)
rat = st.fractions(min_value=-4, max_value=4, max_denominator=16)
radius = st.sampled_from([F(1, 2), F(1), F(3, 2), F(2), F(3)])


def points(d=1, comp=coord):
    return st.builds(lambda v: PhasePoint.from_array(v, d), st.lists(comp, min_size=1 + 3 * d,
                                                                    max_size=1 + 3 * d))


def close(a, b, tol=1e-12):
    return np.max(np.abs(a.as_array() - b.as_array())) <= tol * max(1, np.max(np.abs(b.as_array())))


def test_composition_example():
    assert compose(PhasePoint(1, 1, 0, 0), PhasePoint(1, 0, 0, 0)) == PhasePoint(2, 1, -1, F(1, 2))


def test_inverse_example():
    assert inverse(PhasePoint(1, 1, 0, 0)) == PhasePoint(-1, -1, -1, F(-1, 2))
    assert inverse(identity(2)) == identity(2)


def test_dilation_example():
    assert dilate(2, PhasePoint(1, 1, 1, 1)) == PhasePoint(4, 2, 8, 32)


@pytest.mark.parametrize("d", [1, 2, 3])
@given(data=st.data())
def test_group_laws_exact_on_rationals(d, data):
    g, h, k = (data.draw(points(d, rat)) for _ in range(3))
    assert compose(compose(g, h), k) == compose(g, compose(h, k))
    assert compose(g, inverse(g)) == identity(d) == compose(inverse(g), g)
    assert compose(identity(d), g) == g == compose(g, identity(d))


@given(points(2), points(2), st.floats(0.2, 5))
def test_dilation_is_automorphism(g, h, r):
    assert close(dilate(r, compose(g, h)), compose(dilate(r, g), dilate(r, h)))


@pytest.mark.parametrize("r", [0.5, 3.0])
@given(points(1))
def test_dilation_inverse_scaling(r, X):
    assert close(dilate(r, dilate(1 / r, X)), X, 1e-14)


@pytest.mark.parametrize("X, expected", [
    (PhasePoint(-0.5, 0, 0, 0), True),
    (PhasePoint(-0.5, 0, 0, 1.5), False),
    (PhasePoint(0.0, 0, 0, 0), False),
    (PhasePoint(-1.0, 0, 0, 0), False),
])
def test_unit_cylinder_membership(X, expected):
    assert cylinder_contains(Cylinder.at_origin(1), X) is expected


def test_skewed_cylinder_membership():
    Q = Cylinder(PhasePoint(0, 1, 0, 0), 1)
    assert cylinder_contains(Q, PhasePoint(-0.5, 1, 0.4, 0))
    assert not cylinder_contains(Q, PhasePoint(-0.5, 1, 1.6, 0))


@given(points(1, rat), points(1, rat), radius, radius, radius)
def test_cylinder_covariance_exact(X0, X, r, R, s):
    q0 = cylinder_contains(Cylinder.at_origin(r, 1, R), X)
    q1 = cylinder_contains(Cylinder(X0, s * r, s * R), compose(X0, dilate(s, X)))
    assert q0 == q1


def test_mask_matches_scalar_membership():
    rng = np.random.default_rng(3)
    Q = Cylinder(PhasePoint(0.2, 0.3, -0.1, 0.4), 0.9, 1.1)
    pts = rng.uniform(-1.5, 1.5, size=(500, 4))
    mask = cylinder_mask(Q, pts[:, 0], pts[:, 1:2], pts[:, 2:3], pts[:, 3:4])
    ref = [cylinder_contains(Q, PhasePoint.from_array(p)) for p in pts]
    assert list(mask) == ref
    assert 0 < mask.sum() < len(pts)


@pytest.mark.parametrize("r, d, expected", [
    (1, 1, 8), (2, 1, 16384), (F(1, 2), 1, F(8, 2 ** 11)),
])
def test_volume_d1(r, d, expected):
    assert cylinder_volume(Cylinder.at_origin(r, d), exact=True) == expected


def test_volume_d2_is_pi_cubed():
    assert cylinder_volume(Cylinder.at_origin(1, 2), exact=True) == PiMultiple(F(1), 3)
    assert float(cylinder_volume(Cylinder.at_origin(1, 2))) == pytest.approx(np.pi ** 3)


def test_oscillation_of_constant_and_time_function():
    Q = Cylinder.at_origin(1.0, 1)
    assert oscillation(lambda t, x, y, z: np.full(x.shape[0], 2.0), Q) == 0.0
    assert oscillation(lambda t, x, y, z: np.sin(t) * np.ones(x.shape[0]), Q) == 0.0


def test_oscillation_of_sign_is_one():
    Q = Cylinder.at_origin(1.0, 1)
    val = oscillation(lambda t, x, y, z: np.sign(x[:, 0]), Q)
    assert val == pytest.approx(1.0, abs=1e-14)
    mc = oscillation(lambda t, x, y, z: np.sign(x[:, 0]), Q, method="monte_carlo", samples=20000)
    assert mc == pytest.approx(1.0, abs=0.03)


def test_tensor_oscillation_rejects_d2():
    with pytest.raises(UsageError):
        oscillation(lambda t, x, y, z: x[:, 0], Cylinder.at_origin(1.0, 2))


@pytest.mark.parametrize("r", [F(1, 2), 2, 3])
def test_scaling_conjugation_polynomials(r):
    t, xs, ys, zs = poly.Polynomial.variables(1)
    X0 = PhasePoint(F(-1, 3), F(1, 2), F(2), F(-1, 4))
    for u in (zs[0] + t * ys[0] + t * t * xs[0] / 2, xs[0] * xs[0], xs[0] ** 3 * ys[0]):
        assert scaling_conjugation_check(u, 1, r, X0) == 0.0
    assert scaling_conjugation_check(xs[0] * xs[0], 1, 1, identity(1)) == 0.0


@pytest.mark.parametrize("bad", [0, -1])
def test_invalid_radius(bad):
    with pytest.raises(UsageError):
        dilate(bad, identity(1))
    with pytest.raises(UsageError):
        Cylinder.at_origin(bad)
