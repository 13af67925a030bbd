"""Verification suites run by the command-line driver.

Each suite takes a validated :class:`~hypokfp.config.ExperimentConfig` and a
worker count and returns a :class:`~hypokfp.report.SuiteReport`.  Checks are
recorded, not raised; a suite raises only on quadrature tolerance failures
(:class:`~hypokfp.errors.ToleranceError`).
"""
from __future__ import annotations

import math
import time
from fractions import Fraction

import numpy as np

from . import discrete, geometry, norms, poly, symbols
from .config import ExperimentConfig, fixed_trial, search_quadrature
from .errors import InvariantViolation, UndefinedRatioError
from .geometry import Cylinder, PhasePoint, compose, cylinder_contains, dilate, identity, inverse
from .report import SuiteReport
from .solver import SpectralSolution, homogeneous_hat, ode_reference, residual_check, \
    residual_convergence, solve_hat
from .symbols import CoefficientPath, FrequencyPoint
from .trial import SpatialPacket, TimeProfile, TrialFunction

__all__ = ["SUITE_FUNCTIONS", "run_suite"]


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


# -- geometry -----------------------------------------------------------------

def _random_point(rng, d: int, scale: float = 1.0) -> PhasePoint:
    v = rng.normal(scale=scale, size=1 + 3 * d)
    return PhasePoint.from_array([float(c) for c in v], d)


def _rational_point(rng, d: int, spread) -> PhasePoint:
    # multiples of 1/16 inside +-spread per group (t, x, y, z)
    def q(s):
        return Fraction(int(rng.integers(-16 * s, 16 * s + 1)), 16)
    return PhasePoint(q(spread[0]), tuple(q(spread[1]) for _ in range(d)),
                      tuple(q(spread[2]) for _ in range(d)), tuple(q(spread[3]) for _ in range(d)))


def suite_check_geometry(cfg: ExperimentConfig, jobs: int = 1) -> SuiteReport:
    sec = "check-geometry"
    rep = SuiteReport(sec, cfg.config_hash, cfg.seed)
    n = cfg.integer(sec, "samples")
    tol = cfg.tol(sec)
    t0 = time.perf_counter()
    for d in cfg.integers(sec, "dims"):
        rng = np.random.default_rng([cfg.seed, d])
        errs = {"associativity": 0.0, "identity": 0.0, "inverse": 0.0,
                "dilation_automorphism": 0.0, "dilation_composition": 0.0}
        e = identity(d)
        for _ in range(n):
            a, b, c = (_random_point(rng, d) for _ in range(3))
            r, s = (float(math.exp(rng.uniform(-1, 1))) for _ in range(2))
            A = lambda p: p.as_array()  # noqa: E731
            errs["associativity"] = max(errs["associativity"],
                                        _rel(A(compose(compose(a, b), c)), A(compose(a, compose(b, c)))))
            errs["identity"] = max(errs["identity"], _rel(A(compose(e, a)), A(a)),
                                   _rel(A(compose(a, e)), A(a)))
            errs["inverse"] = max(errs["inverse"], _rel(A(compose(a, inverse(a))), A(e)),
                                  _rel(A(compose(inverse(a), a)), A(e)))
            errs["dilation_automorphism"] = max(
                errs["dilation_automorphism"],
                _rel(A(dilate(r, compose(a, b))), A(compose(dilate(r, a), dilate(r, b)))))
            errs["dilation_composition"] = max(errs["dilation_composition"],
                                               _rel(A(dilate(r, dilate(s, a))), A(dilate(r * s, a))))
        for name, err in errs.items():
            rep.add_row(check=name, d=d, samples=n, max_error=err, mismatches=None)
            rep.check(f"{name} (d={d})", err <= tol, err, tol)
        # exact covariance: X in Q_{r,R}(0) iff X0 o delta_s X in Q_{sr,sR}(X0)
        mismatches, inside = 0, 0
        radii = [Fraction(1, 2), Fraction(1), Fraction(3, 2), Fraction(2)]
        for _ in range(n):
            r = radii[int(rng.integers(len(radii)))]
            R = r * radii[int(rng.integers(len(radii)))]
            s = radii[int(rng.integers(len(radii)))]
            kind = "past" if rng.random() < 0.5 else "symmetric"
            X0 = _rational_point(rng, d, (2, 2, 2, 2))
            k = 1.2 / math.sqrt(d)
            X = _rational_point(rng, d, (float(r * r), float(k * r), float(k * r ** 3),
                                         float(k * R ** 5)))
            q0 = cylinder_contains(Cylinder(identity(d), r, R, kind), X)
            q1 = cylinder_contains(Cylinder(X0, s * r, s * R, kind), compose(X0, dilate(s, X)))
            mismatches += q0 != q1
            inside += q0
        rep.add_row(check="cylinder_covariance_exact", d=d, samples=n, max_error=None,
                    mismatches=mismatches)
        rep.check(f"cylinder dilation covariance, exact rationals (d={d})", mismatches == 0,
                  mismatches, 0, f"{inside} of {n} samples inside")

    rep.timing["group_and_cylinder_s"] = time.perf_counter() - t0

    # scaling conjugation on exact polynomial solutions
    t0 = time.perf_counter()
    ctol = cfg.tol(sec, "conjugation_tolerance")
    n_poly = cfg.integer(sec, "polynomials")
    corpus = poly.poincare_corpus(1, 1, max_weight=10, n_random=n_poly, seed=cfg.seed)
    sols = [(lab, ev.pieces[0][2]) for lab, _, ev in corpus if lab.startswith("rand:")][:n_poly]
    rng = np.random.default_rng([cfg.seed, 99])
    worst = 0.0
    for lab, u in sols:
        for r in cfg.numbers(sec, "radii"):
            X0 = _rational_point(rng, 1, (1, 1, 1, 1))
            res = geometry.scaling_conjugation_check(u, 1, r, X0)
            worst = max(worst, res)
            rep.add_row(check="scaling_conjugation", d=1, samples=lab, max_error=res, r=r)
    rep.check(f"scaling conjugation over {len(sols)} solutions", worst <= ctol and len(sols) == n_poly,
              worst, ctol)
    rep.timing["scaling_conjugation_s"] = time.perf_counter() - t0

    osc = geometry.oscillation(lambda t, x, y, z: np.full(x.shape[0], 1.5),
                               Cylinder.at_origin(1.0, 1), method="tensor")
    rep.add_row(check="oscillation_constant", d=1, samples=None, max_error=osc)
    rep.check("oscillation of a constant coefficient vanishes", osc == 0.0, osc, 0.0)
    return rep


# -- solver -------------------------------------------------------------------

def _gaussian_trial(s0=-1.0, s1=0.0, shape="indicator") -> TrialFunction:
    return TrialFunction.single(TimeProfile(s0, s1, shape), SpatialPacket.gaussian(1))


def suite_solve(cfg: ExperimentConfig, jobs: int = 1) -> SuiteReport:
    sec = "solve"
    rep = SuiteReport(sec, cfg.config_hash, cfg.seed)
    q = cfg.quadrature
    unit = CoefficientPath.constant(1, 1, float(cfg.delta))
    gauss = _gaussian_trial()

    w0 = FrequencyPoint([1.0], [0.0], [0.0])
    G = complex(gauss.packets[0][1].hat(w0))
    exact = G * (1 - math.exp(-2)) / 2
    val = complex(solve_hat(SpectralSolution(unit, 1.0, gauss, q), 0.0, w0))
    err = abs(val - exact) / abs(exact)
    ctol = cfg.tol(sec, "closed_form_tolerance")
    rep.add_row(check="closed_form", t=0.0, xi=1.0, eta=0.0, zeta=0.0, value=val.real,
                reference=exact.real, error=err)
    rep.check("Gaussian closed form G(1 - e^-2)/2", err <= ctol, err, ctol)

    # ODE oracle on the eta = zeta = 0 slice, configured coefficients, mixed profiles
    a = cfg.coefficients
    mixed = TrialFunction(((TimeProfile(-0.7, -0.2, "bump"), SpatialPacket.gaussian(1, 0.8), 1.0),
                           (TimeProfile(-0.5, 0.2, "indicator"),
                            SpatialPacket(((0.3,), (0.0,), (0.0,)), ((1.0,), (1.0,), (1.0,)),
                                          ((1,), (0,), (0,)), ((0.5,), (0.0,), (0.0,))), 0.5j)))
    sol = SpectralSolution(a, cfg.real(sec, "lambda"), mixed, q)
    tol = cfg.tol(sec)
    worst = 0.0
    for t in cfg.reals(sec, "ode_times"):
        for xi in cfg.reals(sec, "ode_xi"):
            u = complex(solve_hat(sol, t, FrequencyPoint([xi], [0.0], [0.0])))
            ref = ode_reference(sol, t, [xi])
            e = abs(u - ref) / max(abs(ref), 1e-300)
            worst = max(worst, e)
            rep.add_row(check="ode_oracle", t=t, xi=xi, eta=0.0, zeta=0.0, value=u.real,
                        reference=ref.real, error=e)
    rep.check("Duhamel solution matches ODE oracle on eta = zeta = 0", worst <= tol, worst, tol)

    # transformed-equation residual
    t = cfg.real(sec, "t")
    xi, eta, zeta = cfg.reals(sec, "point")
    w = FrequencyPoint([xi], [eta], [zeta])
    gsol = SpectralSolution(unit, 1.0, gauss, q)
    steps = cfg.reals(sec, "steps")
    res, slope = residual_convergence(gsol, t, w, steps)
    for h, r_ in zip(steps, res):
        rep.add_row(check="residual", t=t, xi=xi, eta=eta, zeta=zeta, step=h, error=float(r_))
    rep.check("residual convergence order 2 +- 0.2", abs(slope - 2) <= 0.2, slope, 2.0)
    rich = residual_check(gsol, t, w, steps[1], richardson=True)
    rtol = cfg.tol(sec, "residual_tolerance")
    rep.add_row(check="residual_richardson", t=t, xi=xi, eta=eta, zeta=zeta, step=steps[1],
                error=rich)
    rep.check("Richardson-extrapolated residual", rich <= rtol, rich, rtol)
    rep.summary["residual_slope"] = slope

    # propagator composition and the (0, 0, zeta) mode
    rng = np.random.default_rng([cfg.seed, 7])
    pkt = SpatialPacket.gaussian(1)
    worst = 0.0
    for _ in range(50):
        t0, s_, t1 = np.sort(rng.uniform(-1.0, 0.4, size=3))
        wp = FrequencyPoint(*(rng.normal(size=(1,)) for _ in range(3)))
        one = complex(homogeneous_hat(a, pkt.hat, t0, t1, wp))
        two = complex(homogeneous_hat(a, lambda v: homogeneous_hat(a, pkt.hat, t0, s_, v), s_, t1, wp))
        worst = max(worst, abs(one - two) / max(abs(one), 1e-300))
    rep.add_row(check="propagator_composition", error=worst)
    ptol = 1e-12 if cfg.tolerance is None else cfg.tolerance
    rep.check("propagator composition over a split interval", worst <= ptol, worst, ptol)

    zw = FrequencyPoint([0.0], [0.0], [0.7])
    moved = complex(homogeneous_hat(a, pkt.hat, -1.0, 0.0, zw))
    still = complex(pkt.hat(zw))
    rep.add_row(check="zeta_mode_damping", t=0.0, xi=0.0, eta=0.0, zeta=0.7, value=abs(moved),
                reference=abs(still))
    rep.check("(0, 0, zeta) mode is strictly damped", 0 < abs(moved) < abs(still),
              abs(moved), abs(still))

    before = complex(solve_hat(sol, -0.8, FrequencyPoint([1.0], [0.5], [0.5])))
    rep.add_row(check="causality", t=-0.8, xi=1.0, eta=0.5, zeta=0.5, value=abs(before))
    rep.check("solution vanishes before the source support", before == 0, abs(before), 0.0)
    return rep


# -- estimate constant --------------------------------------------------------

def suite_estimate_constant(cfg: ExperimentConfig, jobs: int = 1) -> SuiteReport:
    sec = "estimate-constant"
    rep = SuiteReport(sec, cfg.config_hash, cfg.seed)
    lambdas = cfg.reals(sec, "lambdas")
    scales = cfg.reals(sec, "scales")
    T = cfg.real(sec, "T")
    if cfg.raw(sec, "family").strip() == "fixed":
        family = norms.TrialFamily(d=cfg.d, fixed=fixed_trial(cfg))
    else:
        family = norms.TrialFamily(d=1, n_packets=cfg.integer(sec, "n_packets"),
                                   max_hermite=cfg.integer(sec, "max_hermite"))
    result = norms.constant_search(family, cfg.coefficients, lambdas, cfg.integer(sec, "budget"),
                                   seed=cfg.seed, quad=search_quadrature(cfg), T=T, scales=scales,
                                   jobs=jobs, config_hash=cfg.config_hash)
    tol = cfg.tol(sec)
    slack = cfg.real(sec, "interpolation_slack")
    finite = True
    worst_entry = worst_ratio = 0.0
    worst_gap = -math.inf
    for r in result.records:
        finite &= math.isfinite(r.ratio)
        ent = max((v["entries"] for v in r.scale_deviation.values()), default=0.0)
        rat = max((v["ratio"] for v in r.scale_deviation.values()), default=0.0) / max(r.ratio, 1e-300)
        worst_entry, worst_ratio = max(worst_entry, ent), max(worst_ratio, rat)
        worst_gap = max(worst_gap, r.interpolation_gap)
        rep.add_row(index=r.index, origin=r.origin, lam=r.lam, **r.vector.as_dict(), ratio=r.ratio,
                    scale_dev_entries=ent, scale_dev_ratio=rat,
                    interpolation_gap=r.interpolation_gap)
    rep.check(f"estimate ratio finite on {result.n_trials} trials x {len(lambdas)} lambdas", finite,
              result.max_ratio)
    if scales:
        rep.check("seminorms follow the dilation law", worst_entry <= tol, worst_entry, tol)
        rep.check("estimate ratio is dilation invariant", worst_ratio <= tol, worst_ratio, tol)
    rep.check("interpolation bound for the mixed term", worst_gap <= slack, worst_gap, slack)
    rep.summary.update(n_trials=result.n_trials, max_ratio=result.max_ratio,
                       per_term_max_ratio=result.per_term_max(), lambdas=lambdas, scales=scales,
                       search_quadrature=list(search_quadrature(cfg).freq_nodes))

    # accuracy cross-check of the accurate engine against an independent oracle
    unit = CoefficientPath.constant(1, 1, float(cfg.delta))
    v = norms.seminorms_multi(_gaussian_trial(), unit, [1.0], cfg.quadrature, 0.0)[0]
    ref = norms.gaussian_moment_reference(1.0)
    got = (v.lambda_u, v.sqrtlambda_grad_x, v.grad_x2)
    err = max(abs(g - r_) / r_ for g, r_ in zip(got, ref))
    rtol = cfg.real(sec, "reference_tolerance")
    rep.summary["gaussian_reference"] = {"engine": list(got), "oracle": list(ref), "rel_error": err}
    rep.check("seminorm engine matches Gaussian moment oracle", err <= rtol, err, rtol)
    return rep


# -- poincare -----------------------------------------------------------------

def suite_poincare(cfg: ExperimentConfig, jobs: int = 1) -> SuiteReport:
    sec = "poincare"
    rep = SuiteReport(sec, cfg.config_hash, cfg.seed)
    a = cfg.coefficients
    corpus = poly.poincare_corpus(a, cfg.d, cfg.integer(sec, "max_weight"),
                                  cfg.integer(sec, "n_random"), cfg.seed,
                                  t_start=cfg.number(sec, "t_start"))
    best, best_label, finite, violations = 0.0, None, True, []
    unit_sq = None
    for label, _, u in corpus:
        try:
            res = poly.poincare_ratio(u, a)
        except (InvariantViolation, UndefinedRatioError) as exc:
            violations.append(f"{label}: {exc}")
            rep.add_row(label=label, ratio=None, note=str(exc))
            continue
        finite &= math.isfinite(res.ratio)
        if res.ratio > best:
            best, best_label = res.ratio, label
        if label == "mono:1":
            unit_sq = res.ratio_squared_exact
        rep.add_row(label=label, numerator_sq=res.numerator_sq, small_sq=res.small_sq,
                    grad_z_sq=res.grad_z_sq, hess_x_sq=res.hess_x_sq, ratio=res.ratio,
                    ratio_sq_exact=res.ratio_squared_exact)
    rep.check(f"finite ratio on all {len(corpus)} corpus members", finite and not violations,
              len(violations), 0, "; ".join(violations[:5]))
    target = Fraction(2) ** (2 * cfg.d + 9) if cfg.d == 1 else None
    if target is not None:
        rep.check("constant solution: squared ratio 2^11", unit_sq == target, unit_sq, target)
    rep.summary.update(n_members=len(corpus), max_ratio=best, argmax=best_label,
                       unit_ratio_squared=unit_sq)
    return rep


# -- kernel -------------------------------------------------------------------

KERNEL_PINNED = {1: Fraction(512, 9), 2: geometry.PiMultiple(Fraction(1, 4096), 18)}


def suite_kernel_check(cfg: ExperimentConfig, jobs: int = 1) -> SuiteReport:
    sec = "kernel-check"
    rep = SuiteReport(sec, cfg.config_hash, cfg.seed)
    for d in cfg.integers(sec, "dims"):
        basis = poly.kernel_basis(d)
        ok = True
        for _, b in basis:
            for i in range(d):
                ok &= poly.apply_P0(b, poly.as_matrix(1, d)).is_zero()
                ok &= b.d_z(i).is_zero()
                ok &= all(b.d_x(i).d_x(j).is_zero() for j in range(d))
        rep.check(f"kernel family solves P0 u = 0 with D_x^2 u = D_z u = 0 (d={d})", ok)
        M, det, rows, cols = poly.kernel_moment_matrix(d)
        for rl, row in zip(rows, M):
            for cl, v in zip(cols, row):
                rep.add_row(d=d, functional=rl, basis=cl, entry=v)
        pinned = KERNEL_PINNED.get(d)
        value = det if d == 1 else f"{det.coeff} pi^{det.pi_power}"
        rep.summary[f"det_d{d}"] = value
        rep.summary[f"det_d{d}_float"] = float(det)
        rep.check(f"moment matrix determinant nonzero (d={d})", float(det) != 0, float(det))
        if pinned is not None:
            rep.check(f"moment matrix determinant pinned (d={d})", det == pinned, value,
                      pinned if d == 1 else f"{pinned.coeff} pi^{pinned.pi_power}")
    return rep


# -- multiplier ---------------------------------------------------------------

def suite_multiplier(cfg: ExperimentConfig, jobs: int = 1) -> SuiteReport:
    sec = "multiplier"
    rep = SuiteReport(sec, cfg.config_hash, cfg.seed)
    sup = symbols.multiplier_sup(cfg.real(sec, "lo"), cfg.real(sec, "hi"),
                                 cfg.integer(sec, "per_decade"))
    stol = cfg.tol(sec, "sup_tolerance")
    rep.add_row(check="sup", k=None, exponent=None, value=sup)
    rep.check("sup of the multiplier on the log grid is 1/2", abs(sup - 0.5) <= stol, sup, 0.5)
    rep.check("multiplier bounded by 1/2", sup <= 0.5 + 1e-15, sup, 0.5)
    e = cfg.real(sec, "exponent")
    tol = cfg.tol(sec)
    worst = 0.0
    for k in cfg.reals(sec, "k"):
        dev = symbols.multiplier_homogeneity_deviation(k, e)
        worst = max(worst, dev)
        rep.add_row(check="homogeneity", k=k, exponent=e, value=dev)
    rep.check(f"invariant under (xi, eta) -> (k xi, k^{e:g} eta)", worst <= tol, worst, tol)
    claimed = cfg.real(sec, "claimed_exponent")
    fk = cfg.real(sec, "flag_k")
    dev2 = symbols.multiplier_homogeneity_deviation(fk, claimed)
    thr = cfg.real(sec, "flag_threshold")
    rep.add_row(check="claimed_exponent", k=fk, exponent=claimed, value=dev2)
    rep.check(f"exponent {claimed:g} flagged as not a symmetry (deviation at k={fk:g})",
              dev2 > thr, dev2, thr)
    rep.summary.update(sup=sup, homogeneity_exponent=e, claimed_exponent=claimed,
                       claimed_exponent_deviation=dev2, claimed_exponent_flagged=dev2 > thr)
    return rep


# -- maximal and sharp functions ----------------------------------------------

def _hl_fs(n: int, p_grid, c) -> tuple:
    corpus = discrete.standard_corpus(n)
    radii = discrete.dyadic_radii(next(iter(corpus.values())))
    return corpus, radii, discrete.empirical_hl_fs(corpus, p_grid, c, radii)


def suite_maximal_sharp(cfg: ExperimentConfig, jobs: int = 1) -> SuiteReport:
    sec = "maximal-sharp"
    rep = SuiteReport(sec, cfg.config_hash, cfg.seed)
    p_grid = cfg.reals(sec, "p")
    c = cfg.real(sec, "c")
    sizes = [cfg.integer(sec, "n")] + [v for v in [cfg.integer(sec, "refine")] if v]
    maxima = []
    for k, n in enumerate(sizes):
        corpus, radii, res = _hl_fs(n, p_grid, c)
        for row in res["rows"]:
            rep.add_row(table="hl_fs", resolution=n, name=row["name"], p=row["p"],
                        norm_f=row["norm_f"], norm_maximal=row["norm_maximal"],
                        norm_sharp=row["norm_sharp"], hl_ratio=row["hl_ratio"],
                        fs_ratio=row["fs_ratio"], flags=row["flags"])
        finite = all(math.isfinite(v) for row in res["rows"] for v in (row["hl_ratio"], row["fs_ratio"])
                     if v is not None)
        rep.check(f"HL and FS ratios finite (n={n})", finite, res["max_hl_ratio"])
        maxima.append((res["max_hl_ratio"], res["max_fs_ratio"]))
        rep.summary[f"n{n}"] = {"radii": radii, "max_hl_ratio": res["max_hl_ratio"],
                                "max_fs_ratio": res["max_fs_ratio"]}
        if k == 0:
            const = corpus["constant"]
            m = discrete.maximal(const, c, radii).samples
            s = discrete.sharp(const, radii).samples
            rep.check("maximal function of a constant equals it", bool(np.all(m == 1.0)),
                      float(np.max(np.abs(m - 1.0))), 0.0)
            rep.check("sharp function of a constant vanishes", bool(np.all(s == 0.0)),
                      float(np.max(s)), 0.0)
            worst = -math.inf
            for name, f in corpus.items():
                gap = discrete.sharp(f, radii).samples - 2 * discrete.maximal(f, 1.0, radii).samples
                worst = max(worst, float(np.max(gap)))
            rep.check("sharp <= 2 maximal at every grid point", worst <= 0.0, worst, 0.0)
    if len(maxima) == 2:
        stab = cfg.real(sec, "stability")
        for j, name in enumerate(("HL", "FS")):
            a, b = maxima[0][j], maxima[1][j]
            drift = abs(b - a) / abs(a)
            rep.check(f"{name} maximum ratio stable under refinement {sizes[0]} -> {sizes[1]}",
                      drift <= stab, drift, stab)

    ftol = cfg.tol(sec, "frac_tolerance")
    worst = 0.0
    gauss = lambda z: math.exp(-z * z / 2)  # noqa: E731
    gauss_hat = lambda k: math.sqrt(2 * math.pi) * math.exp(-k * k / 2)  # noqa: E731
    for s in cfg.reals(sec, "frac_s"):
        for z0 in cfg.reals(sec, "frac_points"):
            pw = discrete.frac_laplacian_pointwise(gauss, s, z0)
            fo = discrete.frac_laplacian_fourier(gauss_hat, s, z0)
            e = abs(pw - fo)
            worst = max(worst, e)
            rep.add_row(table="frac_laplacian", s=s, z0=z0, pointwise=pw, fourier=fo, abs_error=e)
    rep.check("fractional Laplacian: difference integral matches Fourier multiplier", worst <= ftol,
              worst, ftol)
    return rep


SUITE_FUNCTIONS = {
    "check-geometry": suite_check_geometry,
    "solve": suite_solve,
    "estimate-constant": suite_estimate_constant,
    "poincare": suite_poincare,
    "kernel-check": suite_kernel_check,
    "multiplier": suite_multiplier,
    "maximal-sharp": suite_maximal_sharp,
}


def run_suite(name: str, cfg: ExperimentConfig, jobs: int = 1) -> SuiteReport:
    start = time.perf_counter()
    rep = SUITE_FUNCTIONS[name](cfg, jobs)
    rep.timing["runtime_s"] = time.perf_counter() - start
    return rep
