"""Fourier-side solution of ``P0 u + lam u = f`` along characteristics.

With ``a = a(t)`` the spatial Fourier transform turns the equation into the
first-order transport problem::

    dU/dt + xi^T a(t) xi U + eta . grad_xi U + zeta . grad_eta U + lam U = F

whose solution is the Duhamel integral::

    U(t, w) = int_{-inf}^t exp(-lam (t - t') - D(t', t, w)) F(t', char(t, t', w)) dt'

with ``D`` the exact dissipation from :mod:`hypokfp.symbols`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad_vec, solve_ivp

from .errors import ToleranceError, UsageError
from .symbols import CoefficientPath, FrequencyPoint, characteristic, dissipation
from .trial import TrialFunction, f_hat

__all__ = [
    "QuadratureSpec",
    "SpectralSolution",
    "solve_hat",
    "duhamel_fixed",
    "residual_check",
    "residual_convergence",
    "homogeneous_hat",
    "ode_reference",
]


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature settings shared by the solver and the seminorm engine.

    ``freq_nodes`` are Gauss-Legendre nodes per component of ``(xi, eta, zeta)``;
    ``time_nodes``/``duhamel_nodes`` are nodes per smooth time piece for the
    outer norm integral and the inner Duhamel integral.  Spectral boxes are cut
    at ``truncation`` Gaussian widths unless ``radii`` fixes them explicitly.
    ``rel_tol`` and ``max_subdivisions`` drive adaptive pointwise evaluation.
    """

    freq_nodes: tuple = (40, 32, 24)
    time_nodes: int = 8
    duhamel_nodes: int = 12
    truncation: float = 6.0
    radii: tuple | None = None
    rel_tol: float = 1e-10
    max_subdivisions: int = 200
    parseval_nodes: int = 160

    def __post_init__(self):
        fn = tuple(int(n) for n in self.freq_nodes)
        if len(fn) != 3 or min(fn) < 1:
            raise UsageError("freq_nodes must be three positive integers")
        object.__setattr__(self, "freq_nodes", fn)
        if self.time_nodes < 1 or self.duhamel_nodes < 1 or self.parseval_nodes < 1:
            raise UsageError("node counts must be positive")
        if not 0 < self.rel_tol < 1:
            raise UsageError("rel_tol must lie in (0, 1)")
        if self.truncation <= 0:
            raise UsageError("truncation must be positive")
        if self.radii is not None:
            radii = tuple(float(r) for r in self.radii)
            if len(radii) != 3 or min(radii) <= 0:
                raise UsageError("radii must be three positive numbers")
            object.__setattr__(self, "radii", radii)
        if self.max_subdivisions < 1:
            raise UsageError("max_subdivisions must be positive")


@dataclass(frozen=True)
class SpectralSolution:
    coefficients: CoefficientPath
    lam: float
    source: TrialFunction
    time_quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        if self.lam < 0:
            raise UsageError("lambda must be >= 0")
        if self.source.packets and self.source.d != self.coefficients.d:
            raise UsageError("source and coefficient dimensions differ")

    @property
    def d(self) -> int:
        return self.coefficients.d

    def breakpoints(self) -> tuple:
        pts = set(float(b) for b in self.coefficients.interior_breakpoints)
        pts.update(self.source.time_breakpoints())
        return tuple(sorted(pts))


def _point(w) -> FrequencyPoint:
    if isinstance(w, FrequencyPoint):
        return FrequencyPoint(np.asarray(w.xi, dtype=float), np.asarray(w.eta, dtype=float),
                              np.asarray(w.zeta, dtype=float))
    xi, eta, zeta = w
    return FrequencyPoint(xi, eta, zeta)


def _integrand(sol: SpectralSolution, t: float, w: FrequencyPoint, tp):
    tp = np.asarray(tp, dtype=float)
    shape_t = tp.shape
    tpx = tp.reshape(shape_t + (1,) * (w.xi.ndim - 1))
    moved = characteristic(t, tpx, w)
    damp = dissipation(sol.coefficients, tpx, t, w)
    return np.exp(-sol.lam * (t - tpx) - damp) * f_hat(sol.source, tpx, moved)


def _split(sol: SpectralSolution, lo: float, hi: float) -> list:
    cuts = [lo] + [b for b in sol.breakpoints() if lo < b < hi] + [hi]
    return list(zip(cuts[:-1], cuts[1:]))


def solve_hat(sol: SpectralSolution, t: float, w) -> np.ndarray:
    """``U(t, w)`` by adaptive Gauss-Kronrod quadrature of the Duhamel integral.

    The integral runs over the source's time support up to ``t`` and is split
    at every coefficient and profile breakpoint.
    """
    w = _point(w)
    s0, s1 = sol.source.time_support
    shape = w.xi.shape[:-1]
    if not sol.source.packets or t <= s0:
        return np.zeros(shape, dtype=complex)
    q = sol.time_quadrature
    total = np.zeros(shape, dtype=complex)
    budget = q.max_subdivisions
    for a, b in _split(sol, s0, min(t, s1)):

        def fn(tp):
            return _integrand(sol, t, w, tp)

        val, err, info = quad_vec(fn, a, b, epsrel=q.rel_tol, epsabs=0.0, limit=budget,
                                  norm="max", full_output=True)
        scale = float(np.max(np.abs(val))) if np.size(val) else 0.0
        if info.status != 0 and err > 10 * q.rel_tol * max(scale, 1e-300):
            raise ToleranceError(
                f"Duhamel quadrature on [{a}, {b}] stopped with error {err:.3e} "
                f"(status {info.status}, {info.intervals.shape[0]} intervals)")
        total = total + val
    return total


def duhamel_fixed(sol: SpectralSolution, t: float, w: FrequencyPoint, nodes: int | None = None):
    """Fixed Gauss-Legendre version of :func:`solve_hat` (used inside norm integrals)."""
    n = nodes or sol.time_quadrature.duhamel_nodes
    w = _point(w)
    s0, s1 = sol.source.time_support
    shape = w.xi.shape[:-1]
    if not sol.source.packets or t <= s0:
        return np.zeros(shape, dtype=complex)
    gn, gw = np.polynomial.legendre.leggauss(n)
    total = np.zeros(shape, dtype=complex)
    for a, b in _split(sol, s0, min(t, s1)):
        tp = 0.5 * (b - a) * gn + 0.5 * (a + b)
        vals = _integrand(sol, t, w, tp)
        total = total + np.tensordot(0.5 * (b - a) * gw, vals, axes=(0, 0))
    return total


def residual_check(sol: SpectralSolution, t: float, w, h: float, richardson: bool = False) -> float:
    """Relative residual of the transformed equation by central differences of step ``h``.

    With ``richardson`` every difference quotient is replaced by the
    combination ``(4 D(h/2) - D(h)) / 3``, which is fourth-order accurate.
    ``w`` must be a single frequency point (component arrays of shape ``(d,)``).
    """
    w = _point(w)
    if w.xi.ndim != 1:
        raise UsageError("residual_check takes a single frequency point")
    d = w.d

    def U(tt, xi, eta):
        return complex(solve_hat(sol, tt, FrequencyPoint(xi, eta, w.zeta)))

    def derivatives(step):
        dudt = (U(t + step, w.xi, w.eta) - U(t - step, w.xi, w.eta)) / (2 * step)
        transport = 0.0
        for i in range(d):
            e = np.zeros(d)
            e[i] = step
            dxi = (U(t, w.xi + e, w.eta) - U(t, w.xi - e, w.eta)) / (2 * step)
            deta = (U(t, w.xi, w.eta + e) - U(t, w.xi, w.eta - e)) / (2 * step)
            transport += w.eta[i] * dxi + w.zeta[i] * deta
        return dudt + transport

    u0 = U(t, w.xi, w.eta)
    deriv = derivatives(h)
    if richardson:
        deriv = (4 * derivatives(h / 2) - deriv) / 3
    a = sol.coefficients.matrix_at(t)
    F = complex(f_hat(sol.source, t, w))
    res = deriv + float(w.xi @ a @ w.xi) * u0 + sol.lam * u0 - F
    return abs(res) / max(abs(F), abs(u0), 1e-300)


def residual_convergence(sol: SpectralSolution, t: float, w, steps: Sequence[float]):
    """Residuals for each step size and the least-squares log-log slope."""
    res = np.array([residual_check(sol, t, w, h) for h in steps])
    slope = float(np.polyfit(np.log(steps), np.log(res), 1)[0])
    return res, slope


def homogeneous_hat(a: CoefficientPath, initial_hat: Callable, t0: float, t: float, w) -> np.ndarray:
    """Transform of the ``P0 u = 0`` solution with ``u(t0) = g`` and ``initial_hat = g^``."""
    if t < t0:
        raise UsageError("homogeneous_hat needs t >= t0")
    w = _point(w)
    back = characteristic(t, t0, w)
    return np.exp(-dissipation(a, t0, t, w)) * initial_hat(back)


def ode_reference(sol: SpectralSolution, t: float, xi, rtol: float = 1e-12, atol: float = 1e-14):
    """``U(t, xi, 0, 0)`` from a DOP853 solve of the scalar ODE on the ``eta = zeta = 0`` slice.

    Independent of the Duhamel quadrature; restarted at every breakpoint.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    zero = np.zeros_like(xi)
    s0, _ = sol.source.time_support
    if t <= s0:
        return 0j
    cuts = [s0] + [b for b in sol.breakpoints() if s0 < b < t] + [t]
    state = np.zeros(2)
    for a, b in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (a + b)
        k = float(xi @ sol.coefficients.matrix_at(mid) @ xi) + sol.lam

        eps = 1e-13 * max(1.0, b - a)

        def rhs(tt, y, a=a, b=b, eps=eps, k=k):
            # profiles jump at piece ends; sample them from inside the piece
            tt = min(max(tt, a + eps), b - eps)
            F = complex(f_hat(sol.source, tt, FrequencyPoint(xi, zero, zero)))
            return [-k * y[0] + F.real, -k * y[1] + F.imag]

        out = solve_ivp(rhs, (a, b), state, method="DOP853", rtol=rtol, atol=atol)
        if not out.success:
            raise ToleranceError(f"reference ODE solve failed: {out.message}")
        state = out.y[:, -1]
    return complex(state[0], state[1])
