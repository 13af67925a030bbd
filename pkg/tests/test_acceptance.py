"""Acceptance criteria, each run at its stated tolerance and time budget.

Every test prints one ``ACCEPTANCE <n> PASS|FAIL`` line to the terminal.
"""
import math
import time
from fractions import Fraction

import pytest

from hypokfp.config import parse_config
from hypokfp.suites import run_suite

DEFAULT = parse_config("")


def _report(capsys, n, ok, text):
    with capsys.disabled():
        print(f"\nACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {text}")


def _timed(name, cfg=DEFAULT, jobs=1):
    t0 = time.perf_counter()
    rep = run_suite(name, cfg, jobs)
    return rep, time.perf_counter() - t0


def _check(rep, label_start):
    hits = [c for c in rep.checks if c.label.startswith(label_start)]
    assert hits, f"no check labelled {label_start!r}"
    return hits


@pytest.fixture(scope="module")
def geometry_run():
    return _timed("check-geometry")


def test_1_geometry(capsys, geometry_run):
    rep, secs = geometry_run
    groups = [c for c in rep.checks if "(d=" in c.label]
    dims = {c.label.split("(d=")[1][0] for c in groups}
    secs = rep.timing["group_and_cylinder_s"]
    ok = all(c.passed for c in groups) and dims == {"1", "2", "3"} and secs < 5
    worst = max(c.value for c in groups if isinstance(c.value, float))
    _report(capsys, 1, ok, f"group/dilation/cylinder checks d=1,2,3 over 1000 samples, "
                           f"max float error {worst:.2e}, exact covariance mismatches 0, {secs:.1f}s")
    assert ok


def test_2_scaling_conjugation(capsys, geometry_run):
    rep, secs = geometry_run
    c = _check(rep, "scaling conjugation")[0]
    rows = [r for r in rep.rows if r["check"] == "scaling_conjugation"]
    secs = rep.timing["scaling_conjugation_s"]
    ok = c.passed and c.value <= 1e-10 and len(rows) == 60 and secs < 10
    _report(capsys, 2, ok, f"20 solutions x r in {{1/2,2,3}}: max residual {c.value:.1e}, {secs:.1f}s")
    assert ok


def test_3_solver(capsys):
    rep, secs = _timed("solve")
    ode = _check(rep, "Duhamel solution matches ODE")[0]
    closed = _check(rep, "Gaussian closed form")[0]
    slope = _check(rep, "residual convergence order")[0]
    rich = _check(rep, "Richardson")[0]
    ok = (ode.value <= 1e-8 and closed.value <= 1e-10 and abs(slope.value - 2) <= 0.2
          and rich.value <= 1e-5 and rep.passed and secs < 60)
    _report(capsys, 3, ok, f"ODE oracle {ode.value:.1e}, closed form {closed.value:.1e}, "
                           f"order {slope.value:.4f}, residual {rich.value:.1e}, {secs:.1f}s")
    assert ok


def test_4_main_estimate(capsys):
    rep, secs = _timed("estimate-constant")
    lams = sorted({r["lam"] for r in rep.rows})
    n_trials = rep.summary["n_trials"]
    finite = all(math.isfinite(r["ratio"]) for r in rep.rows)
    ent = max(r["scale_dev_entries"] for r in rep.rows)
    rat = max(r["scale_dev_ratio"] for r in rep.rows)
    gap = max(r["interpolation_gap"] for r in rep.rows)
    ok = (n_trials >= 100 and lams == [0.0, 0.1, 1.0, 10.0] and finite and ent <= 1e-5
          and rat <= 1e-5 and gap <= 1e-8 and rep.passed and secs < 30 * 60)
    _report(capsys, 4, ok, f"{n_trials} trials x {len(lams)} lambdas, max ratio "
                           f"{rep.summary['max_ratio']:.4f}, dilation deviation {max(ent, rat):.1e}, "
                           f"max interpolation gap {gap:.3f}, {secs:.0f}s")
    assert ok


def test_5_poincare(capsys):
    rep, secs = _timed("poincare")
    again, _ = _timed("poincare")
    unit = rep.summary["unit_ratio_squared"]
    finite = all(r["ratio"] is not None and math.isfinite(r["ratio"]) for r in rep.rows)
    ok = (len(rep.rows) == rep.summary["n_members"] and finite and unit == Fraction(2 ** 11)
          and again.to_csv() == rep.to_csv() and secs < 300)
    _report(capsys, 5, ok, f"{len(rep.rows)} members finite, u=1 squared ratio {unit}, "
                           f"max ratio {rep.summary['max_ratio']:.4f} ({rep.summary['argmax']}), "
                           f"bit-identical rerun, {secs:.1f}s")
    assert ok


def test_6_kernel(capsys):
    rep, secs = _timed("kernel-check")
    ok = rep.summary["det_d1"] == Fraction(512, 9) and rep.summary["det_d2_float"] != 0 \
        and rep.passed and secs < 60
    _report(capsys, 6, ok, f"det d=1 {rep.summary['det_d1']}, det d=2 {rep.summary['det_d2']}, "
                           f"{secs:.1f}s")
    assert ok


def test_7_multiplier(capsys):
    rep, secs = _timed("multiplier")
    s = rep.summary
    homog = _check(rep, "invariant under")[0]
    ok = (abs(s["sup"] - 0.5) <= 1e-9 and homog.value <= 1e-12 and s["homogeneity_exponent"] == 3
          and s["claimed_exponent_flagged"] and s["claimed_exponent_deviation"] > 0.1)
    _report(capsys, 7, ok, f"sup {s['sup']!r}, exponent-3 deviation {homog.value:.1e}, exponent-2 "
                           f"deviation at k=4 {s['claimed_exponent_deviation']:.4f} (flagged)")
    assert ok


def test_8_discrete(capsys):
    rep, secs = _timed("maximal-sharp")
    trivial = _check(rep, "maximal function of a constant") + _check(rep, "sharp function of a constant")
    bound = _check(rep, "sharp <= 2 maximal")[0]
    stab = _check(rep, "HL maximum ratio stable") + _check(rep, "FS maximum ratio stable")
    frac = _check(rep, "fractional Laplacian")[0]
    ok = (all(c.passed for c in trivial) and bound.passed and all(c.passed for c in stab)
          and frac.value <= 1e-3 and rep.passed and secs < 600)
    drift = ", ".join(f"{c.value:.3f}" for c in stab)
    _report(capsys, 8, ok, f"trivial identities exact, sharp<=2M, HL/FS drift 16->32 {drift}, "
                           f"frac Laplacian {frac.value:.1e}, {secs:.0f}s")
    assert ok


DETERMINISM = [
    ("check-geometry", ""),
    ("solve", ""),
    ("estimate-constant", "[estimate-constant]\nbudget = 8\n"),
    ("poincare", "[poincare]\nn_random = 20\n"),
    ("kernel-check", ""),
    ("multiplier", ""),
    ("maximal-sharp", "[maximal-sharp]\nrefine = 0\n"),
]


def test_9_determinism(capsys):
    same = []
    for name, text in DETERMINISM:
        cfg = parse_config(text + "[general]\nseed = 17\n")
        a = run_suite(name, cfg, 1).to_csv()
        b = run_suite(name, cfg, 2).to_csv()
        same.append(a == b)
    ok = all(same)
    _report(capsys, 9, ok, f"CSV bodies byte-identical across --jobs 1/2 for "
                           f"{sum(same)}/{len(same)} suites")
    assert ok
