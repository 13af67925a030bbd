"""Lie group structure of the Kolmogorov operator with three transport levels.

Points of space-time are ``X = (t, x, y, z)`` with ``x, y, z`` in R^d.  The
group law is::

    (t0, x0, y0, z0) o (t, x, y, z)
        = (t + t0, x + x0, y + y0 - t x0, z + z0 - t y0 + t^2/2 x0)

and the dilations ``(t, x, y, z) -> (r^2 t, r x, r^3 y, r^5 z)`` are group
automorphisms.  All scalar operations here are written with plain arithmetic
so they work unchanged on ``float`` and on ``fractions.Fraction``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Callable, Sequence

import numpy as np

from .errors import UsageError

__all__ = [
    "PhasePoint",
    "Dilation",
    "Cylinder",
    "SpatialSlice",
    "PiMultiple",
    "identity",
    "compose",
    "inverse",
    "dilate",
    "cylinder_contains",
    "cylinder_mask",
    "slice_contains",
    "cylinder_volume",
    "ball_volume",
    "oscillation",
    "scaling_conjugation_check",
]


def _half(v):
    # v / 2 without leaving exact arithmetic for int or Fraction input
    return v / 2 if isinstance(v, float) else Fraction(v) / 2


def _vec(v) -> tuple:
    if isinstance(v, (Real, Fraction)):
        return (v,)
    return tuple(v)


@dataclass(frozen=True)
class PhasePoint:
    """A point ``(t, x, y, z)`` of R^{1+3d}; also used as a group element."""

    t: Real
    x: tuple
    y: tuple
    z: tuple

    def __post_init__(self):
        object.__setattr__(self, "x", _vec(self.x))
        object.__setattr__(self, "y", _vec(self.y))
        object.__setattr__(self, "z", _vec(self.z))
        if not (len(self.x) == len(self.y) == len(self.z)) or len(self.x) < 1:
            raise UsageError("x, y, z must share a dimension d >= 1")
        for c in (self.t, *self.x, *self.y, *self.z):
            if isinstance(c, float) and not math.isfinite(c):
                raise UsageError("phase point components must be finite")

    @property
    def d(self) -> int:
        return len(self.x)

    @classmethod
    def from_array(cls, arr, d: int | None = None) -> "PhasePoint":
        arr = list(arr)
        if d is None:
            if (len(arr) - 1) % 3:
                raise UsageError("flat phase point must have length 1 + 3d")
            d = (len(arr) - 1) // 3
        return cls(arr[0], arr[1:1 + d], arr[1 + d:1 + 2 * d], arr[1 + 2 * d:1 + 3 * d])

    def as_array(self) -> np.ndarray:
        return np.array([float(self.t), *map(float, self.x), *map(float, self.y),
                         *map(float, self.z)])

    def as_tuple(self) -> tuple:
        return (self.t, *self.x, *self.y, *self.z)


GroupElement = PhasePoint


def identity(d: int) -> PhasePoint:
    return PhasePoint(0, (0,) * d, (0,) * d, (0,) * d)


def _check_dims(*points: PhasePoint) -> int:
    d = points[0].d
    if any(p.d != d for p in points):
        raise UsageError("dimension mismatch between phase points")
    return d


def compose(g: PhasePoint, h: PhasePoint) -> PhasePoint:
    """Group product ``g o h``."""
    _check_dims(g, h)
    t0, x0, y0, z0 = g.t, g.x, g.y, g.z
    t, x, y, z = h.t, h.x, h.y, h.z
    return PhasePoint(
        t + t0,
        tuple(a + b for a, b in zip(x, x0)),
        tuple(yi + y0i - t * x0i for yi, y0i, x0i in zip(y, y0, x0)),
        tuple(zi + z0i - t * y0i + _half(t * t) * x0i
              for zi, z0i, y0i, x0i in zip(z, z0, y0, x0)),
    )


def inverse(g: PhasePoint) -> PhasePoint:
    # solves g o h = e component by component
    t0, x0, y0, z0 = g.t, g.x, g.y, g.z
    t = -t0
    x = tuple(-a for a in x0)
    y = tuple(-b + t * a for a, b in zip(x0, y0))
    z = tuple(-c + t * b - _half(t * t) * a for a, b, c in zip(x0, y0, z0))
    return PhasePoint(t, x, y, z)


@dataclass(frozen=True)
class Dilation:
    r: Real

    def __post_init__(self):
        if not self.r > 0:
            raise UsageError(f"dilation parameter must be positive, got {self.r!r}")


def _radius(r) -> Real:
    return r.r if isinstance(r, Dilation) else Dilation(r).r


def dilate(r, X: PhasePoint) -> PhasePoint:
    """Anisotropic scaling with exponents (2, 1, 3, 5)."""
    r = _radius(r)
    r3 = r * r * r
    r5 = r3 * r * r
    return PhasePoint(r * r * X.t, tuple(r * v for v in X.x), tuple(r3 * v for v in X.y),
                      tuple(r5 * v for v in X.z))


@dataclass(frozen=True)
class Cylinder:
    """``Q_{r,R}(X0)`` (``kind="past"``) or its two-sided version (``kind="symmetric"``)."""

    center: PhasePoint
    r: Real
    R: Real | None = None
    kind: str = "past"

    def __post_init__(self):
        if self.R is None:
            object.__setattr__(self, "R", self.r)
        if not (self.r > 0 and self.R > 0):
            raise UsageError("cylinder radii must be positive")
        if self.kind not in ("past", "symmetric"):
            raise UsageError(f"unknown cylinder kind {self.kind!r}")

    @property
    def d(self) -> int:
        return self.center.d

    @classmethod
    def at_origin(cls, r, d: int = 1, R=None, kind: str = "past") -> "Cylinder":
        return cls(identity(d), r, R, kind)

    def time_window(self) -> tuple:
        t0, r2 = self.center.t, self.r * self.r
        if self.kind == "past":
            return t0 - r2, t0
        return t0 - r2, t0 + r2


@dataclass(frozen=True)
class SpatialSlice:
    """The skewed spatial section ``D_R(X0, t)``."""

    center: PhasePoint
    R: Real
    t: Real

    def slab_center(self) -> tuple:
        return _slab_center(self.center, self.t)


def _slab_center(c: PhasePoint, t) -> tuple:
    # D_R(X0, t) and the cylinder sections are balls around this moving centre
    s = t - c.t
    yc = tuple(y0 - s * x0 for x0, y0 in zip(c.x, c.y))
    zc = tuple(z0 - s * y0 + _half(s * s) * x0 for x0, y0, z0 in zip(c.x, c.y, c.z))
    return c.x, yc, zc


def _norm(v) -> float:
    return math.sqrt(sum(float(a) * float(a) for a in v))


def _norm2(v):
    return sum(a * a for a in v)


def _lt_radius(v, rho) -> bool:
    # |v| < rho, compared in squared form so rational input stays exact
    return _norm2(v) < rho * rho


def cylinder_contains(Q: Cylinder, X: PhasePoint) -> bool:
    _check_dims(Q.center, X)
    lo, hi = Q.time_window()
    if not (lo < X.t < hi):
        return False
    xc, yc, zc = _slab_center(Q.center, X.t)
    r, R = Q.r, Q.R
    return (_lt_radius([a - b for a, b in zip(X.x, xc)], r)
            and _lt_radius([a - b for a, b in zip(X.y, yc)], r ** 3)
            and _lt_radius([a - b for a, b in zip(X.z, zc)], R ** 5))


def slice_contains(D: SpatialSlice, x, y, z) -> bool:
    xc, yc, zc = D.slab_center()
    R = D.R
    return (_lt_radius([a - b for a, b in zip(_vec(x), xc)], R)
            and _lt_radius([a - b for a, b in zip(_vec(y), yc)], R ** 3)
            and _lt_radius([a - b for a, b in zip(_vec(z), zc)], R ** 5))


def cylinder_mask(Q: Cylinder, t, x, y, z) -> np.ndarray:
    """Vectorised membership: ``t`` has shape ``S``, ``x, y, z`` shape ``S + (d,)``."""
    c = Q.center
    t = np.asarray(t, dtype=float)
    x, y, z = (np.asarray(v, dtype=float) for v in (x, y, z))
    x0, y0, z0 = (np.asarray(v, dtype=float) for v in (c.x, c.y, c.z))
    lo, hi = (float(v) for v in Q.time_window())
    s = (t - float(c.t))[..., None]
    r, R = float(Q.r), float(Q.R)
    dx = x - x0
    dy = y - y0 + s * x0
    dz = z - z0 + s * y0 - s * s / 2 * x0
    return ((t > lo) & (t < hi)
            & (np.sum(dx * dx, axis=-1) < r * r)
            & (np.sum(dy * dy, axis=-1) < r ** 6)
            & (np.sum(dz * dz, axis=-1) < R ** 10))


@dataclass(frozen=True)
class PiMultiple:
    """The exact real number ``coeff * pi**pi_power``."""

    coeff: Fraction
    pi_power: int = 0

    def __float__(self) -> float:
        return float(self.coeff) * math.pi ** self.pi_power

    def __mul__(self, other):
        if isinstance(other, PiMultiple):
            return PiMultiple(self.coeff * other.coeff, self.pi_power + other.pi_power)
        return PiMultiple(self.coeff * other, self.pi_power)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, PiMultiple):
            return PiMultiple(self.coeff / other.coeff, self.pi_power - other.pi_power)
        return PiMultiple(self.coeff / other, self.pi_power)

    def __add__(self, other):
        if other == 0:
            return self
        if not isinstance(other, PiMultiple):
            other = PiMultiple(Fraction(other), 0)
        if self.coeff == 0:
            return other
        if other.coeff == 0:
            return self
        if other.pi_power != self.pi_power:
            raise ValueError("cannot add multiples of different powers of pi exactly")
        return PiMultiple(self.coeff + other.coeff, self.pi_power)

    __radd__ = __add__

    def __neg__(self):
        return PiMultiple(-self.coeff, self.pi_power)

    def __sub__(self, other):
        return self + (-other)

    def __eq__(self, other):
        if isinstance(other, PiMultiple):
            if self.coeff == 0 or other.coeff == 0:
                return self.coeff == other.coeff
            return self.coeff == other.coeff and self.pi_power == other.pi_power
        if self.pi_power == 0 or self.coeff == 0:
            return self.coeff == other
        return NotImplemented

    def __hash__(self):
        return hash((self.coeff, self.pi_power if self.coeff else 0))


def ball_volume(rho, d: int, exact: bool = False):
    """Lebesgue measure of the Euclidean ball of radius ``rho`` in R^d, d in {1, 2}."""
    if d == 1:
        vol = PiMultiple(Fraction(2) * Fraction(rho), 0) if exact else 2 * rho
    elif d == 2:
        vol = PiMultiple(Fraction(rho) ** 2, 1) if exact else math.pi * rho * rho
    else:
        raise UsageError(f"ball volumes are implemented for d in {{1, 2}}, got d={d}")
    return vol


def cylinder_volume(Q: Cylinder, exact: bool = False):
    """``|Q_{r,R}|``.  With ``exact=True`` the result is a :class:`PiMultiple`."""
    d = Q.d
    r, R = Q.r, Q.R
    height = r * r if Q.kind == "past" else 2 * r * r
    if exact:
        height = Fraction(height)
        return (ball_volume(Fraction(r), d, True) * ball_volume(Fraction(r) ** 3, d, True)
                * ball_volume(Fraction(R) ** 5, d, True) * height)
    return height * ball_volume(r, d) * ball_volume(r ** 3, d) * ball_volume(R ** 5, d)


def oscillation(a_sampler: Callable, Q: Cylinder, nodes: int = 8, time_nodes: int = 4,
                method: str = "tensor", samples: int = 4000, seed: int = 0) -> float:
    """Spatial mean oscillation of ``a`` over ``Q_R(X0)``.

    The double average of ``|a(t, w1) - a(t, w2)|`` over ``D_R(X0, t)^2``,
    averaged over the time window.  ``a_sampler(t, x, y, z)`` is vectorised:
    ``x, y, z`` have shape ``(n, d)`` and it returns shape ``(n,)`` or
    ``(n, d, d)`` (matrix differences use the Frobenius norm).

    ``method="tensor"`` uses Gauss-Legendre products (d = 1 only);
    ``method="monte_carlo"`` draws ``samples`` seeded pairs per time node.
    """
    d = Q.d
    R = float(Q.R)
    lo, hi = (float(v) for v in Q.time_window())
    tn, tw = np.polynomial.legendre.leggauss(time_nodes)
    tt = 0.5 * (hi - lo) * tn + 0.5 * (hi + lo)
    tw = tw / 2.0
    halves = (R, R ** 3, R ** 5)
    rng = np.random.default_rng(seed)
    total = 0.0
    if method == "tensor":
        if d != 1:
            raise UsageError("tensor oscillation quadrature is implemented for d = 1")
        gn, gw = np.polynomial.legendre.leggauss(nodes)
        gw = gw / 2.0
        ref = [gn * h for h in halves]
        mesh = np.meshgrid(*ref, indexing="ij")
        wts = np.einsum("i,j,k->ijk", gw, gw, gw).ravel()
        for t, w_t in zip(tt, tw):
            xc, yc, zc = (np.array([float(v) for v in c]) for c in _slab_center(Q.center, t))
            x = mesh[0].reshape(-1, 1) + xc
            y = mesh[1].reshape(-1, 1) + yc
            z = mesh[2].reshape(-1, 1) + zc
            vals = np.asarray(a_sampler(np.full(x.shape[0], t), x, y, z), dtype=float)
            diff = _pair_abs_diff(vals)
            total += w_t * float(wts @ diff @ wts)
        return total
    if method != "monte_carlo":
        raise UsageError(f"unknown oscillation method {method!r}")
    for t, w_t in zip(tt, tw):
        centers = [np.array([float(v) for v in c]) for c in _slab_center(Q.center, t)]
        pts = []
        for _ in range(2):
            pts.append([c + _ball_samples(rng, samples, d, h) for c, h in zip(centers, halves)])
        tvec = np.full(samples, t)
        a1 = np.asarray(a_sampler(tvec, *pts[0]), dtype=float)
        a2 = np.asarray(a_sampler(tvec, *pts[1]), dtype=float)
        diff = (a1 - a2).reshape(samples, -1)
        total += w_t * float(np.mean(np.sqrt(np.sum(diff * diff, axis=1))))
    return total


def _pair_abs_diff(vals: np.ndarray) -> np.ndarray:
    flat = vals.reshape(vals.shape[0], -1)
    diff = flat[:, None, :] - flat[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _ball_samples(rng, n: int, d: int, rho: float) -> np.ndarray:
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * rho * rng.random((n, 1)) ** (1.0 / d)


def scaling_conjugation_check(u, a, r, X0: PhasePoint, grid_points: int = 3) -> float:
    """Max over a grid of ``|P u~(X) - r^2 (P u)(X~)|`` with ``X~ = X0 o dilate(r, X)``.

    ``u`` is an exact :class:`~hypokfp.poly.Polynomial` and ``a`` a constant
    symmetric matrix (or scalar for d = 1).  Both sides are formed as exact
    polynomials and compared at rational grid points, so rational input gives
    an exactly zero residual.
    """
    from . import poly

    d = u.d
    r = _radius(r)
    amat = poly.as_matrix(a, d)
    Xt = poly.group_dilation_map(X0, r, d)
    u_tilde = u.substitute(Xt)
    lhs = poly.apply_P0(u_tilde, amat)
    rhs = poly.apply_P0(u, amat).substitute(Xt) * (Fraction(r) ** 2 if not isinstance(r, float) else r * r)
    diff = lhs - rhs
    pts = [Fraction(k, grid_points) for k in range(-grid_points, grid_points + 1)]
    rng = np.random.default_rng(0)
    worst = 0.0
    nvars = 1 + 3 * d
    for _ in range(max(20, grid_points ** 2)):
        X = [pts[i] for i in rng.integers(0, len(pts), size=nvars)]
        worst = max(worst, abs(float(diff.evaluate(X))))
    return worst
