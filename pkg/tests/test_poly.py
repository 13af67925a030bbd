from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from hypokfp import poly
from hypokfp.errors import InvariantViolation, UndefinedRatioError, UsageError
from hypokfp.geometry import Cylinder, PiMultiple
from hypokfp.poly import Polynomial, apply_P0, cylinder_integral, evolve
from hypokfp.symbols import CoefficientPath

F = Fraction
t, (x,), (y,), (z,) = Polynomial.variables(1)
PATH = CoefficientPath((F(-3, 5), F(-3, 10), F(1, 10)), (F(1), F(8, 5)), 0.5)


@pytest.mark.parametrize("u, expected", [
    (Polynomial.constant(3), Polynomial(1)),
    (y + t * x, Polynomial(1)),
    (x * x, Polynomial.constant(-2)),
    (x * x + t * 2, Polynomial(1)),
    (z + t * y + t * t * x / 2, Polynomial(1)),
])
def test_apply_P0(u, expected):
    assert apply_P0(u, 1) == expected


@pytest.mark.parametrize("g, expected", [
    (y, y + (t + 4) * x),
    (z, z + (t + 4) * y + (t + 4) * (t + 4) / 2 * x),
    (x * x, x * x + (t + 4) * 2),
])
def test_evolve_examples(g, expected):
    u = evolve(g, 1, -4, 0)
    assert len(u.pieces) == 1
    assert u.pieces[0][2] == expected


def test_evolve_piecewise_solves_and_is_continuous():
    g = x ** 3 * y + z
    u = evolve(g, PATH, -4, 0)
    assert len(u.pieces) == 2  # outer pieces extend to +-infinity
    for (lo, hi, p), (lo2, _, q) in zip(u.pieces, u.pieces[1:]):
        assert p.at_time(hi) == q.at_time(lo2)
    for lo, hi, p in u.pieces:
        assert apply_P0(p, PATH.at((lo + hi) / 2)).is_zero()


def test_evolve_rejects_time_dependent_data():
    with pytest.raises(UsageError):
        evolve(t * x, 1, -1, 0)


@pytest.mark.parametrize("u, expected", [
    (Polynomial.constant(1), F(8)),
    (x, F(0)),
    (t * x * x, F(-4, 3)),
])
def test_cylinder_integrals(u, expected):
    assert cylinder_integral(u, Cylinder.at_origin(1)) == expected


def test_cylinder_integral_d2_carries_pi_cubed():
    v = cylinder_integral(Polynomial.constant(1, 2), Cylinder.at_origin(1, 2))
    assert v == PiMultiple(F(1), 3)


monomials = st.tuples(st.integers(0, 2), st.integers(0, 3), st.integers(0, 2), st.integers(0, 1))


@given(monomials, st.sampled_from([F(1, 2), F(2), F(3)]))
def test_integral_scaling_law(exps, r):
    # int_{Q_r} u = r^11 int_{Q_1} u(delta_r X) for centred cylinders
    u = Polynomial.monomial(exps)
    scaled = u.substitute(poly.group_dilation_map(poly.PhasePoint(0, 0, 0, 0), r, 1))
    lhs = cylinder_integral(u, Cylinder.at_origin(r))
    rhs = r ** 11 * cylinder_integral(scaled, Cylinder.at_origin(1))
    assert lhs == rhs


def test_poincare_pinned_values():
    one = poly.poincare_ratio(Polynomial.constant(1), 1)
    assert one.ratio_squared_exact == 2 ** 11
    assert one.ratio == pytest.approx(2 ** 5.5, rel=1e-15)
    lin = poly.poincare_ratio(y + t * x, 1)
    assert (lin.numerator_sq, lin.small_sq) == (F(4194304, 9), F(32, 9))
    assert lin.ratio == pytest.approx(362.03867196751233, rel=1e-14)
    cub = poly.poincare_ratio(z + t * y + t * t * x / 2, 1)
    assert (cub.numerator_sq, cub.small_sq, cub.grad_z_sq) == (F(348127232, 45), F(166, 45), F(16384))
    assert cub.ratio == pytest.approx(21.408417392473836, rel=1e-14)


def test_poincare_rejects_non_solutions_and_zero():
    with pytest.raises(UsageError):
        poly.poincare_ratio(x * x, 1)
    with pytest.raises(UndefinedRatioError):
        poly.poincare_ratio(Polynomial(1), 1)


def test_poincare_invariant_violation_when_denominator_vanishes(monkeypatch):
    # a nonzero solution always has positive mass on Q_1; force the degenerate branch
    real = poly.l2_norm_squared
    monkeypatch.setattr(poly, "l2_norm_squared",
                        lambda u, Q: F(0) if Q.r == 1 else real(u, Q))
    with pytest.raises(InvariantViolation):
        poly.poincare_ratio(Polynomial.constant(1), 1)


def test_poincare_corpus_shape_and_determinism():
    a = poly.poincare_corpus(1, 1, max_weight=4, n_random=5, seed=3)
    b = poly.poincare_corpus(1, 1, max_weight=4, n_random=5, seed=3)
    assert [(l, g) for l, g, _ in a] == [(l, g) for l, g, _ in b]
    labels = [l for l, _, _ in a]
    assert labels[0] == "mono:1" and sum(l.startswith("rand:") for l in labels) == 5
    assert all(g.weighted_degree() <= 4 for l, g, _ in a if l.startswith("mono:"))


def test_kernel_matrix_d1():
    M, det, rows, cols = poly.kernel_moment_matrix(1)
    assert M == [[8, 0, 0], [0, F(8, 3), F(-4, 3)], [0, 0, F(8, 3)]]
    assert det == F(512, 9)
    assert cols == ["1", "x1", "y1+t*x1"]


def test_kernel_matrix_scaling_and_d2():
    _, det2, _, _ = poly.kernel_moment_matrix(1, 2)
    assert det2 == F(1125899906842624, 9) and det2 > 0
    _, d2, _, _ = poly.kernel_moment_matrix(2)
    assert d2 == PiMultiple(F(1, 4096), 18)


@pytest.mark.parametrize("d", [1, 2])
def test_kernel_basis_is_in_kernel(d):
    for _, b in poly.kernel_basis(d):
        assert apply_P0(b, poly.as_matrix(1, d)).is_zero()
        assert all(b.d_z(i).is_zero() for i in range(d))


def test_interior_ratio_examples():
    R = F(3, 4)
    assert poly.interior_ratio(Polynomial.constant(1), R=R) == pytest.approx(
        (8 * 0.75 ** 11) ** -0.5, rel=1e-14)
    assert poly.interior_ratio(y + t * x, (0, 0, 1)) == 0.0
    assert poly.interior_ratio(y + t * x, (1, 0, 0)) == pytest.approx(7.646021937539931, rel=1e-14)
