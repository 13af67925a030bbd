import math

import numpy as np
import pytest

from hypokfp.errors import UsageError
from hypokfp.solver import (QuadratureSpec, SpectralSolution, duhamel_fixed, homogeneous_hat,
                            ode_reference, residual_check, residual_convergence, solve_hat)
from hypokfp.symbols import CoefficientPath, FrequencyPoint
from hypokfp.trial import SpatialPacket, TimeProfile, TrialFunction

UNIT = CoefficientPath.constant(1.0)
PATH = CoefficientPath((-0.6, -0.3, 0.1), (1.0, 1.6), delta=0.5)
GAUSS = TrialFunction.single(TimeProfile(-1.0, 0.0), SpatialPacket.gaussian(1))
MIXED = TrialFunction(((TimeProfile(-0.7, -0.2, "bump"), SpatialPacket.gaussian(1, 0.8), 1.0),
                       (TimeProfile(-0.5, 0.2), SpatialPacket(((0.3,), (0.0,), (0.0,)),
                                                              ((1.0,), (1.0,), (1.0,)),
                                                              ((1,), (0,), (0,)),
                                                              ((0.5,), (0.0,), (0.0,))), 0.5j)))


def w(xi, eta=0.0, zeta=0.0):
    return FrequencyPoint([xi], [eta], [zeta])


def test_closed_form_benchmark():
    G = complex(SpatialPacket.gaussian(1).hat(w(1.0)))
    u = complex(solve_hat(SpectralSolution(UNIT, 1.0, GAUSS), 0.0, w(1.0)))
    assert u == pytest.approx(G * (1 - math.exp(-2)) / 2, rel=1e-10)
    assert u.real == pytest.approx(4.1299072999370505, rel=1e-12)


def test_causality_and_zero_source():
    sol = SpectralSolution(PATH, 1.0, MIXED)
    assert solve_hat(sol, -0.8, w(1.0, 0.5, 0.5)) == 0
    empty = SpectralSolution(PATH, 1.0, TrialFunction(()))
    assert solve_hat(empty, 0.0, w(1.0)) == 0


@pytest.mark.parametrize("t", [-0.45, -0.1, 0.3])
@pytest.mark.parametrize("xi", [0.5, 2.0])
def test_ode_oracle(t, xi):
    sol = SpectralSolution(PATH, 1.0, MIXED)
    u = complex(solve_hat(sol, t, w(xi)))
    ref = ode_reference(sol, t, [xi])
    assert abs(u - ref) <= 1e-8 * abs(ref)


def test_fixed_rule_converges_to_adaptive():
    sol = SpectralSolution(PATH, 0.5, MIXED)
    pt = w(0.8, -0.4, 0.6)
    ref = complex(solve_hat(sol, 0.1, pt))
    assert complex(duhamel_fixed(sol, 0.1, pt, 24)) == pytest.approx(ref, rel=1e-10)


def test_linearity_in_source():
    a = SpectralSolution(PATH, 1.0, GAUSS)
    b = SpectralSolution(PATH, 1.0, MIXED)
    ab = SpectralSolution(PATH, 1.0, GAUSS.scaled(2.0) + MIXED)
    pt = w(0.7, 0.3, -0.2)
    lhs = complex(solve_hat(ab, 0.0, pt))
    rhs = 2 * complex(solve_hat(a, 0.0, pt)) + complex(solve_hat(b, 0.0, pt))
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_decay_bound():
    sol = SpectralSolution(PATH, 1.0, MIXED)
    pt = w(0.7, 0.3, -0.2)
    u = abs(complex(solve_hat(sol, 0.1, pt)))
    bound = SpectralSolution(PATH, 1.0, MIXED)
    from hypokfp.symbols import characteristic
    from hypokfp.trial import f_hat
    ts = np.linspace(-0.7, 0.1, 4001)
    vals = [math.exp(-(0.1 - s)) * abs(complex(f_hat(MIXED, s, characteristic(0.1, s, pt))))
            for s in ts]
    assert u <= np.trapezoid(vals, ts) * (1 + 1e-3)
    assert bound.lam == 1.0


def test_residual_and_order():
    sol = SpectralSolution(UNIT, 1.0, GAUSS)
    pt = w(1.0, 0.5, 0.5)
    res, slope = residual_convergence(sol, -0.25, pt, [0.02, 0.01, 0.005, 0.0025])
    assert abs(slope - 2) <= 0.2
    assert res[0] == pytest.approx(9.849e-5, rel=1e-3)
    assert residual_check(sol, -0.25, pt, 0.01, richardson=True) <= 1e-5


def test_residual_zero_source():
    empty = SpectralSolution(UNIT, 1.0, TrialFunction(()))
    assert residual_check(empty, -0.25, w(1.0, 0.5, 0.5), 0.01) == 0.0


def test_homogeneous_propagation():
    g = SpatialPacket.gaussian(1).hat
    pt = w(0.4, -0.7, 1.1)
    assert complex(homogeneous_hat(PATH, g, -0.2, -0.2, pt)) == complex(g(pt))
    one = complex(homogeneous_hat(PATH, g, -1.0, 0.4, pt))
    two = complex(homogeneous_hat(PATH, lambda v: homogeneous_hat(PATH, g, -1.0, -0.35, v),
                                  -0.35, 0.4, pt))
    assert abs(one - two) <= 1e-12 * abs(one)
    with pytest.raises(UsageError):
        homogeneous_hat(PATH, g, 0.0, -1.0, pt)


def test_zeta_mode_is_damped():
    # the transported xi picks up a zeta component, so (0, 0, zeta) decays strictly
    g = SpatialPacket.gaussian(1).hat
    pt = w(0.0, 0.0, 0.7)
    moved = abs(complex(homogeneous_hat(PATH, g, -1.0, 0.0, pt)))
    assert 0 < moved < abs(complex(g(pt)))
    still = w(0.0, 0.0, 0.0)
    assert complex(homogeneous_hat(PATH, g, -1.0, 0.0, still)) == complex(g(still))


def test_negative_lambda_rejected():
    with pytest.raises(UsageError):
        SpectralSolution(UNIT, -1.0, GAUSS)
    assert QuadratureSpec().truncation == 6.0
