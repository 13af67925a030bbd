"""Frequency-side objects: characteristic flow, dissipation, multiplier symbols.

Frequencies ``(xi, eta, zeta)`` are dual to ``(x, y, z)``.  Frequency arrays
always carry the component index on the last axis, so a single point has
shape ``(d,)`` and a grid of points shape ``S + (d,)``.  The arithmetic only
uses ``+ - * /`` and integer powers, which keeps object arrays of
``Fraction`` exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import UsageError

__all__ = [
    "FrequencyPoint",
    "CoefficientPath",
    "characteristic",
    "dissipation",
    "dissipation_coefficients",
    "frac_power_symbol",
    "multiplier_m",
    "multiplier_sup",
    "multiplier_homogeneity_deviation",
    "SYMBOL_KINDS",
]

SYMBOL_KINDS = ("xx", "y13", "z15", "xy16", "transport_weight")


def _arr(v):
    if isinstance(v, np.ndarray):
        return v
    v = list(v) if not np.isscalar(v) else [v]
    if any(isinstance(c, Fraction) for c in v):
        return np.array(v, dtype=object)
    return np.asarray(v, dtype=float)


@dataclass(frozen=True)
class FrequencyPoint:
    xi: np.ndarray
    eta: np.ndarray
    zeta: np.ndarray

    def __post_init__(self):
        xi, eta, zeta = (_arr(v) for v in (self.xi, self.eta, self.zeta))
        if not (xi.shape[-1:] == eta.shape[-1:] == zeta.shape[-1:]):
            raise UsageError("xi, eta, zeta must share the last (dimension) axis")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "zeta", zeta)

    @property
    def d(self) -> int:
        return self.xi.shape[-1]

    def scaled(self, k) -> "FrequencyPoint":
        """Anisotropic frequency dilation ``(k xi, k^3 eta, k^5 zeta)``."""
        return FrequencyPoint(self.xi * k, self.eta * k ** 3, self.zeta * k ** 5)


def _as_matrix(a, d: int):
    if np.isscalar(a) or isinstance(a, Fraction):
        return tuple(tuple(a if i == j else 0 for j in range(d)) for i in range(d))
    rows = tuple(tuple(row) for row in a)
    if len(rows) != d or any(len(r) != d for r in rows):
        raise UsageError(f"coefficient matrix must be {d}x{d}")
    return rows


@dataclass(frozen=True)
class CoefficientPath:
    """Piecewise constant symmetric matrix ``a(t)``.

    ``pieces[k]`` applies on ``[breakpoints[k], breakpoints[k+1])``; the first
    and last pieces extend to minus and plus infinity respectively, so only
    the interior breakpoints ever split an integral.
    """

    breakpoints: tuple
    pieces: tuple
    delta: float = 0.5
    d: int = field(default=0)

    def __post_init__(self):
        bps = tuple(self.breakpoints)
        if len(bps) < 2:
            raise UsageError("a coefficient path needs at least two breakpoints")
        if any(b >= c for b, c in zip(bps, bps[1:])):
            raise UsageError("breakpoints must be strictly increasing")
        if len(self.pieces) != len(bps) - 1:
            raise UsageError("need exactly one matrix per breakpoint interval")
        if not 0 < self.delta < 1:
            raise UsageError("ellipticity constant delta must lie in (0, 1)")
        d = self.d
        if d == 0:
            p0 = self.pieces[0]
            d = 1 if (np.isscalar(p0) or isinstance(p0, Fraction)) else len(p0)
        pieces = tuple(_as_matrix(p, d) for p in self.pieces)
        for k, m in enumerate(pieces):
            fm = np.array(m, dtype=float)
            if not np.allclose(fm, fm.T, rtol=0, atol=1e-14):
                raise UsageError(f"coefficient piece {k} is not symmetric")
            ev = np.linalg.eigvalsh(fm)
            tol = 1e-12
            if ev.min() < self.delta - tol or ev.max() > 1 / self.delta + tol:
                raise UsageError(
                    f"coefficient piece {k} violates ellipticity: eigenvalues {ev} "
                    f"outside [{self.delta}, {1 / self.delta}]")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "d", d)

    @classmethod
    def constant(cls, a, d: int = 1, delta: float = 0.5) -> "CoefficientPath":
        return cls((0, 1), (_as_matrix(a, d),), delta, d)

    @property
    def interior_breakpoints(self) -> tuple:
        return self.breakpoints[1:-1]

    def bounds(self) -> list:
        """``(lo, hi, matrix)`` for every piece, with infinite outer ends."""
        lo = [-math.inf, *self.interior_breakpoints]
        hi = [*self.interior_breakpoints, math.inf]
        return list(zip(lo, hi, self.pieces))

    def segments(self, t0, t1) -> list:
        """Pieces overlapping ``[t0, t1]`` clipped to that interval."""
        out = []
        for lo, hi, m in self.bounds():
            a, b = max(lo, t0), min(hi, t1)
            if a < b:
                out.append((a, b, m))
        return out

    def at(self, t):
        for lo, hi, m in self.bounds():
            if lo <= t < hi:
                return m
        return self.pieces[-1]

    def matrix_at(self, t) -> np.ndarray:
        return np.array(self.at(t), dtype=float)

    def rescaled_time(self, r) -> "CoefficientPath":
        """The path ``t -> a(r^2 t)``."""
        r2 = r * r
        return CoefficientPath(tuple(b / r2 for b in self.breakpoints), self.pieces,
                               self.delta, self.d)


def characteristic(t, t_prime, w: FrequencyPoint) -> FrequencyPoint:
    """Frequency reached from ``(t, w)`` by following the transport flow to ``t_prime``."""
    s = t_prime - t
    if isinstance(s, np.ndarray):
        s = s[..., None]
    return FrequencyPoint(w.xi + s * w.eta + s * s / 2 * w.zeta, w.eta + s * w.zeta, w.zeta)


def _qform(m, u, v):
    d = len(m)
    acc = 0
    for i in range(d):
        for j in range(d):
            if m[i][j] != 0:
                acc = acc + m[i][j] * u[..., i] * v[..., j]
    if isinstance(acc, int):
        acc = u[..., 0] * 0
    return acc


def dissipation_coefficients(m, w: FrequencyPoint) -> list:
    """Coefficients ``c_0..c_4`` of ``s -> xi(t+s)^T m xi(t+s)``."""
    xi, eta, zeta = w.xi, w.eta, w.zeta
    return [
        _qform(m, xi, xi),
        2 * _qform(m, xi, eta),
        _qform(m, eta, eta) + _qform(m, xi, zeta),
        _qform(m, eta, zeta),
        _qform(m, zeta, zeta) / 4,
    ]


def dissipation(a: CoefficientPath, t_prime, t, w: FrequencyPoint):
    """``int_{t'}^{t} xi(tau)^T a(tau) xi(tau) dtau`` along the characteristic through ``(t, w)``.

    Closed form on each constant piece.  ``t_prime`` and ``t`` may be scalars or
    arrays broadcasting against the leading shape of ``w``.
    """
    tp = np.asarray(t_prime) if isinstance(t_prime, np.ndarray) else t_prime
    if np.any(np.asarray(tp > t)):
        raise UsageError("dissipation needs t' <= t")
    total = 0
    for lo, hi, m in a.bounds():
        lo_eff = np.maximum(tp, lo) if isinstance(tp, np.ndarray) or isinstance(t, np.ndarray) \
            else max(tp, lo)
        hi_eff = np.minimum(t, hi) if isinstance(tp, np.ndarray) or isinstance(t, np.ndarray) \
            else min(t, hi)
        if not isinstance(lo_eff, np.ndarray) and not isinstance(hi_eff, np.ndarray):
            if not lo_eff < hi_eff:
                continue
        else:
            hi_eff = np.maximum(hi_eff, lo_eff)
        sa, sb = lo_eff - t, hi_eff - t
        c = dissipation_coefficients(m, w)
        pa, pb = sa, sb
        for k in range(5):
            total = total + c[k] * (pb - pa) / (k + 1)
            pa, pb = pa * sa, pb * sb
    return total


def _norm(v):
    v = np.asarray(v, dtype=float)
    return np.sqrt(np.sum(v * v, axis=-1))


def frac_power_symbol(kind: str, w: FrequencyPoint):
    """Fourier symbols of the left-hand-side seminorms (each of anisotropic degree 2)."""
    if kind == "xx":
        return _norm(w.xi) ** 2
    if kind == "y13":
        return np.cbrt(_norm(w.eta)) ** 2
    if kind == "z15":
        return _norm(w.zeta) ** 0.4
    if kind == "xy16":
        return _norm(w.xi) * np.cbrt(_norm(w.eta))
    if kind == "transport_weight":
        return np.ones_like(_norm(w.xi))
    raise UsageError(f"unknown symbol kind {kind!r}; expected one of {SYMBOL_KINDS}")


def multiplier_m(xi, eta):
    """``|xi| |eta|^{1/3} / (|xi|^2 + |eta|^{2/3})``, zero at the origin."""
    nx = _norm(np.atleast_1d(xi)) if np.ndim(xi) <= 1 else _norm(xi)
    ne = _norm(np.atleast_1d(eta)) if np.ndim(eta) <= 1 else _norm(eta)
    ce = np.cbrt(ne)
    den = nx * nx + ce * ce
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, nx * ce / np.where(den > 0, den, 1.0), 0.0)
    return out[()] if np.ndim(out) == 0 else out


def _log_grid(lo: float, hi: float, per_decade: int) -> np.ndarray:
    n = int(round((math.log10(hi) - math.log10(lo)) * per_decade)) + 1
    return np.logspace(math.log10(lo), math.log10(hi), n)


def multiplier_sup(lo: float = 1e-6, hi: float = 1e6, per_decade: int = 100) -> float:
    """Supremum of the multiplier over a log-spaced grid of ``(|xi|, |eta|)``."""
    g = _log_grid(lo, hi, per_decade)
    best = 0.0
    for chunk in np.array_split(g, max(1, len(g) // 200)):
        vals = multiplier_m(chunk[:, None, None], g[None, :, None])
        best = max(best, float(np.max(vals)))
    return best


def multiplier_homogeneity_deviation(k: float, eta_exponent: float = 3.0, lo: float = 1e-3,
                                     hi: float = 1e3, per_decade: int = 20) -> float:
    """``max |m(k xi, k^e eta) - m(xi, eta)|`` over a log grid."""
    g = _log_grid(lo, hi, per_decade)
    xi = g[:, None, None]
    eta = g[None, :, None]
    base = multiplier_m(xi, eta)
    moved = multiplier_m(k * xi, k ** eta_exponent * eta)
    return float(np.max(np.abs(moved - base)))
