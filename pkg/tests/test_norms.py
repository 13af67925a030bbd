import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypokfp import norms
from hypokfp.errors import UndefinedRatioError, UsageError
from hypokfp.norms import (EstimateReport, SeminormVector, TrialFamily, constant_search,
                           estimate_ratio, gaussian_moment_reference, interpolation_gap,
                           scale_invariance_multi, seminorms_multi)
from hypokfp.solver import QuadratureSpec
from hypokfp.symbols import CoefficientPath
from hypokfp.trial import SpatialPacket, TimeProfile, TrialFunction

UNIT = CoefficientPath.constant(1.0)
PATH = CoefficientPath((-0.6, -0.3, 0.1), (1.0, 1.6), delta=0.5)
GAUSS = TrialFunction.single(TimeProfile(-1.0, 0.0), SpatialPacket.gaussian(1))
LIGHT = QuadratureSpec(freq_nodes=(16, 12, 10), time_nodes=4, duhamel_nodes=6)
FAMILY = TrialFamily()


def test_gaussian_oracle_pinned():
    ref = gaussian_moment_reference(1.0)
    assert ref == pytest.approx((0.8503726770957576, 0.5139879569740212, 0.5411898672804797),
                                rel=1e-12)
    assert gaussian_moment_reference(1.0, nodes=60) == pytest.approx(ref, rel=1e-12)


def test_engine_matches_gaussian_oracle():
    v = seminorms_multi(GAUSS, UNIT, [1.0])[0]
    ref = gaussian_moment_reference(1.0)
    got = (v.lambda_u, v.sqrtlambda_grad_x, v.grad_x2)
    assert max(abs(g - r) / r for g, r in zip(got, ref)) <= 1e-4
    assert v.rhs == pytest.approx(math.pi ** 0.75, rel=1e-12)


def test_zero_source_and_lambda_zero():
    zero = seminorms_multi(TrialFunction(()), UNIT, [0.0, 1.0], LIGHT)
    assert all(not np.any(v.as_array()) for v in zero)
    v = seminorms_multi(GAUSS, UNIT, [0.0], LIGHT)[0]
    assert v.lambda_u == 0.0 and v.sqrtlambda_grad_x == 0.0
    assert math.isfinite(estimate_ratio(v))


def test_amplitude_homogeneity():
    a, b = (seminorms_multi(t, PATH, [0.1, 1.0], LIGHT) for t in (GAUSS, GAUSS.scaled(2.0)))
    for va, vb in zip(a, b):
        assert np.allclose(vb.as_array(), 2 * va.as_array(), rtol=1e-10, atol=0)


def test_concentrated_mode_ratio():
    k = 8.0
    pkt = SpatialPacket(((0.0,),) * 3, ((0.5,), (1.0,), (1.0,)), ((0,),) * 3,
                        ((k,), (0.0,), (0.0,)))
    trial = TrialFunction.single(TimeProfile(-1.0, 0.0), pkt)
    v = seminorms_multi(trial, UNIT, [1.0], LIGHT)[0]
    assert v.grad_x2 / v.lambda_u == pytest.approx(k * k, rel=0.2)


def test_ratio_helpers():
    assert estimate_ratio(SeminormVector(rhs=1.0)) == 0.0
    with pytest.raises(UndefinedRatioError):
        estimate_ratio(SeminormVector(grad_x2=1.0))
    assert interpolation_gap(SeminormVector(grad_x2=2.0, frac_y13=4.0, mixed_xy16=3.0)) == 0.0
    with pytest.raises(UsageError):
        SeminormVector(grad_x2=-1.0)


@pytest.mark.parametrize("r", [0.5, 2.0, 4.0])
def test_scale_covariance(r):
    trial = FAMILY.build(np.random.default_rng([5, 1]).random(FAMILY.n_params))
    for dev, rdev in scale_invariance_multi(trial, PATH, [0.0, 1.0], r, LIGHT):
        assert dev <= 1e-10 and rdev <= 1e-10


def test_scale_factor_at_r2():
    base = seminorms_multi(GAUSS, UNIT, [1.0], LIGHT)[0]
    st_, sa, sl = norms._scaled_problem(GAUSS, UNIT, [1.0], 2.0)
    scaled = seminorms_multi(st_, sa, sl, LIGHT)[0]
    assert scaled.grad_x2 / base.grad_x2 == pytest.approx(2 ** -3.5, rel=1e-10)
    assert estimate_ratio(scaled) == pytest.approx(estimate_ratio(base), abs=1e-10)


@settings(max_examples=6)
@given(st.integers(0, 2 ** 32 - 1))
def test_interpolation_bound_on_family(seed):
    trial = FAMILY.build(np.random.default_rng(seed).random(FAMILY.n_params))
    for v in seminorms_multi(trial, PATH, [0.0, 1.0], LIGHT):
        assert interpolation_gap(v) <= 1e-8


def test_family_build_and_validation():
    p = np.full(FAMILY.n_params, 0.5)
    trial = FAMILY.build(p)
    assert len(trial.packets) == 2
    with pytest.raises(UsageError):
        FAMILY.build(p[:-1])
    with pytest.raises(UsageError):
        TrialFamily(d=2)


def _fake(trial):
    # cheap deterministic stand-in for the engine, driven by the trial's parameters
    s = sum(abs(c) * prof.s1 ** 2 + pkt.inv_width[0][0] for prof, pkt, c in trial.packets)
    return [SeminormVector(grad_x2=s, rhs=1.0)]


def test_search_budget_one_and_prefix_property():
    one = constant_search(FAMILY, PATH, [1.0], 1, seed=4, evaluate=_fake)
    assert one.n_trials == 1
    maxima = [constant_search(FAMILY, PATH, [1.0], b, seed=4, evaluate=_fake).max_ratio
              for b in (1, 5, 12, 30)]
    assert maxima == sorted(maxima)
    long = constant_search(FAMILY, PATH, [1.0], 30, seed=4, evaluate=_fake)
    short = constant_search(FAMILY, PATH, [1.0], 12, seed=4, evaluate=_fake)
    assert [r.params for r in long.records[:12]] == [r.params for r in short.records]
    assert any(r.origin.startswith("refine:") for r in long.records)


def test_fixed_family_max_equals_trial_ratio():
    fam = TrialFamily(fixed=GAUSS)
    rep = constant_search(fam, UNIT, [1.0], 2, quad=LIGHT)
    v = seminorms_multi(GAUSS, UNIT, [1.0], LIGHT)[0]
    assert rep.max_ratio == pytest.approx(estimate_ratio(v), rel=1e-12)


def test_search_identical_across_workers_and_round_trip():
    a = constant_search(FAMILY, PATH, [0.0, 1.0], 3, seed=9, quad=LIGHT, scales=(2.0,), jobs=1)
    b = constant_search(FAMILY, PATH, [0.0, 1.0], 3, seed=9, quad=LIGHT, scales=(2.0,), jobs=2)
    assert a.to_dict() == b.to_dict()
    assert EstimateReport.from_dict(a.to_dict()).to_dict() == a.to_dict()
