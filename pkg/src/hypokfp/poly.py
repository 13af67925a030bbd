"""Exact polynomial solutions of ``P0 u = 0`` and the inequalities checked on them.

Polynomials live in the variables ``(t, x_1..x_d, y_1..y_d, z_1..z_d)`` with
``Fraction`` coefficients.  The generator ``A = x.grad_y + y.grad_z + a:D_x^2``
lowers the anisotropic weight ``2 k_t + |k_x| + 3 |k_y| + 5 |k_z|`` by exactly
two, so ``exp((t - s) A) g`` is a finite sum and every evolved polynomial is an
exact solution.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import InvariantViolation, UndefinedRatioError, UsageError
from .geometry import Cylinder, PhasePoint, PiMultiple, cylinder_volume
from .symbols import CoefficientPath

__all__ = [
    "Polynomial",
    "PiecewisePolynomial",
    "as_matrix",
    "apply_P0",
    "generator",
    "evolve",
    "group_dilation_map",
    "translate_to_origin",
    "cylinder_integral",
    "l2_norm_squared",
    "PoincareResult",
    "poincare_ratio",
    "poincare_corpus",
    "kernel_basis",
    "kernel_moment_matrix",
    "interior_ratio",
    "exact_det",
]


def _frac(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, float):
        return Fraction(c)
    return Fraction(c)


class Polynomial:
    """Sparse multivariate polynomial with exact rational coefficients.

    ``terms`` maps an exponent tuple of length ``1 + 3d`` (order t, x, y, z)
    to a nonzero ``Fraction``.
    """

    __slots__ = ("d", "terms")

    def __init__(self, d: int, terms: dict | None = None):
        self.d = d
        clean = {}
        for k, v in (terms or {}).items():
            if len(k) != 1 + 3 * d:
                raise UsageError("exponent tuple length must be 1 + 3d")
            v = _frac(v)
            if v != 0:
                clean[tuple(k)] = v
        self.terms = clean

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, c, d: int = 1) -> "Polynomial":
        return cls(d, {(0,) * (1 + 3 * d): c})

    @classmethod
    def var(cls, name: str, i: int = 0, d: int = 1) -> "Polynomial":
        return cls(d, {_unit(d, name, i): 1})

    @classmethod
    def monomial(cls, exps: Sequence[int], coeff=1, d: int = 1) -> "Polynomial":
        return cls(d, {tuple(exps): coeff})

    @classmethod
    def variables(cls, d: int = 1):
        """``t, x, y, z`` with ``x, y, z`` lists of length d."""
        t = cls.var("t", 0, d)
        return (t, [cls.var("x", i, d) for i in range(d)], [cls.var("y", i, d) for i in range(d)],
                [cls.var("z", i, d) for i in range(d)])

    # arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.d != self.d:
                raise UsageError("dimension mismatch between polynomials")
            return other
        return Polynomial.constant(other, self.d)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return Polynomial(self.d, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.d, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            c = _frac(other)
            return Polynomial(self.d, {k: v * c for k, v in self.terms.items()})
        other = self._coerce(other)
        out: dict = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                out[k] = out.get(k, 0) + v1 * v2
        return Polynomial(self.d, out)

    __rmul__ = __mul__

    def __truediv__(self, c):
        c = _frac(c)
        return Polynomial(self.d, {k: v / c for k, v in self.terms.items()})

    def __pow__(self, n: int):
        out = Polynomial.constant(1, self.d)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other, self.d)
        return self.d == other.d and self.terms == other.terms

    def __hash__(self):
        return hash((self.d, frozenset(self.terms.items())))

    def __repr__(self):
        if not self.terms:
            return "Polynomial(0)"
        names = _names(self.d)
        parts = []
        for k, v in sorted(self.terms.items(), reverse=True):
            mono = "*".join(f"{n}^{e}" if e > 1 else n for n, e in zip(names, k) if e)
            parts.append(f"{v}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)

    # queries ------------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def weighted_degree(self) -> int:
        """Anisotropic weight ``2 k_t + |k_x| + 3|k_y| + 5|k_z|`` (``-1`` for zero)."""
        if not self.terms:
            return -1
        w = _weights(self.d)
        return max(sum(a * b for a, b in zip(k, w)) for k in self.terms)

    def degree(self) -> int:
        return max((sum(k) for k in self.terms), default=-1)

    def depends_on_t(self) -> bool:
        return any(k[0] for k in self.terms)

    def derivative(self, var: int, order: int = 1) -> "Polynomial":
        out = {}
        for k, v in self.terms.items():
            e = k[var]
            if e < order:
                continue
            c = v
            for j in range(order):
                c *= e - j
            nk = list(k)
            nk[var] = e - order
            out[tuple(nk)] = out.get(tuple(nk), 0) + c
        return Polynomial(self.d, out)

    def d_t(self):
        return self.derivative(0)

    def d_x(self, i: int = 0):
        return self.derivative(1 + i)

    def d_y(self, i: int = 0):
        return self.derivative(1 + self.d + i)

    def d_z(self, i: int = 0):
        return self.derivative(1 + 2 * self.d + i)

    def evaluate(self, X) -> Fraction | float:
        if isinstance(X, PhasePoint):
            X = X.as_tuple()
        X = list(X)
        total = 0
        for k, v in self.terms.items():
            term = v
            for xi, e in zip(X, k):
                if e:
                    term = term * xi ** e
            total = total + term
        return total

    def evaluate_array(self, pts: np.ndarray) -> np.ndarray:
        """Float evaluation at points of shape ``(n, 1 + 3d)``."""
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape[0])
        for k, v in self.terms.items():
            term = np.full(pts.shape[0], float(v))
            for j, e in enumerate(k):
                if e:
                    term = term * pts[:, j] ** e
            out += term
        return out

    def substitute(self, images: Sequence["Polynomial"]) -> "Polynomial":
        """Compose with a polynomial map: variable ``j`` is replaced by ``images[j]``."""
        if len(images) != 1 + 3 * self.d:
            raise UsageError("need one image polynomial per variable")
        d_out = images[0].d
        cache: dict = {}

        def power(j, e):
            key = (j, e)
            if key not in cache:
                cache[key] = images[j] ** e
            return cache[key]

        total = Polynomial(d_out)
        for k, v in self.terms.items():
            term = Polynomial.constant(v, d_out)
            for j, e in enumerate(k):
                if e:
                    term = term * power(j, e)
            total = total + term
        return total

    def at_time(self, s) -> "Polynomial":
        """Restriction ``u(s, x, y, z)`` as a t-free polynomial."""
        s = _frac(s)
        out: dict = {}
        for k, v in self.terms.items():
            nk = (0,) + k[1:]
            out[nk] = out.get(nk, 0) + v * s ** k[0]
        return Polynomial(self.d, out)


@lru_cache(maxsize=None)
def _weights(d: int) -> tuple:
    return (2,) + (1,) * d + (3,) * d + (5,) * d


@lru_cache(maxsize=None)
def _names(d: int) -> tuple:
    if d == 1:
        return ("t", "x", "y", "z")
    return ("t", *[f"x{i + 1}" for i in range(d)], *[f"y{i + 1}" for i in range(d)],
            *[f"z{i + 1}" for i in range(d)])


def _unit(d: int, name: str, i: int) -> tuple:
    k = [0] * (1 + 3 * d)
    offset = {"t": 0, "x": 1, "y": 1 + d, "z": 1 + 2 * d}[name]
    k[offset + (0 if name == "t" else i)] = 1
    return tuple(k)


def as_matrix(a, d: int) -> tuple:
    """Exact ``d x d`` matrix from a scalar (multiple of identity) or nested sequence."""
    if isinstance(a, (int, float, Fraction)):
        a = _frac(a)
        return tuple(tuple(a if i == j else Fraction(0) for j in range(d)) for i in range(d))
    rows = tuple(tuple(_frac(v) for v in row) for row in a)
    if len(rows) != d or any(len(r) != d for r in rows):
        raise UsageError(f"coefficient matrix must be {d}x{d}")
    if any(rows[i][j] != rows[j][i] for i in range(d) for j in range(d)):
        raise UsageError("coefficient matrix must be symmetric")
    return rows


def _diffusion(u: Polynomial, a) -> Polynomial:
    d = u.d
    out = Polynomial(d)
    for i in range(d):
        for j in range(d):
            if a[i][j] != 0:
                out = out + u.derivative(1 + i).derivative(1 + j) * a[i][j]
    return out


def _drift(u: Polynomial) -> Polynomial:
    d = u.d
    _, xs, ys, _ = Polynomial.variables(d)
    out = Polynomial(d)
    for i in range(d):
        out = out + xs[i] * u.d_y(i) + ys[i] * u.d_z(i)
    return out


def apply_P0(u: Polynomial, a) -> Polynomial:
    """``d_t u - x.grad_y u - y.grad_z u - a^{ij} d_{x_i x_j} u`` for constant ``a``."""
    a = as_matrix(a, u.d)
    return u.d_t() - _drift(u) - _diffusion(u, a)


def generator(g: Polynomial, a) -> Polynomial:
    """``A g = x.grad_y g + y.grad_z g + a^{ij} d_{x_i x_j} g``."""
    a = as_matrix(a, g.d)
    return _drift(g) + _diffusion(g, a)


def _exp_flow(g: Polynomial, a, s0) -> tuple:
    """``sum_n (t - s0)^n / n! A^n g`` and the number of nonzero series terms."""
    d = g.d
    t = Polynomial.var("t", 0, d)
    shift = t - _frac(s0)
    total = Polynomial(d)
    term = g
    n = 0
    shift_pow = Polynomial.constant(1, d)
    fact = 1
    while not term.is_zero():
        total = total + shift_pow * term / fact
        n += 1
        fact *= n
        shift_pow = shift_pow * shift
        term = generator(term, a)
    return total, n


@dataclass(frozen=True)
class PiecewisePolynomial:
    """``u`` equal to ``pieces[k][2]`` on ``[pieces[k][0], pieces[k][1]]``."""

    pieces: tuple
    series_terms: tuple = ()

    @property
    def d(self) -> int:
        return self.pieces[0][2].d

    @property
    def span(self) -> tuple:
        return self.pieces[0][0], self.pieces[-1][1]

    def piece_at(self, t) -> Polynomial:
        for lo, hi, p in self.pieces:
            if lo <= t <= hi:
                return p
        raise UsageError(f"time {t} outside the evolved span {self.span}")

    def map(self, fn) -> "PiecewisePolynomial":
        return PiecewisePolynomial(tuple((lo, hi, fn(p)) for lo, hi, p in self.pieces),
                                   self.series_terms)

    def is_zero(self) -> bool:
        return all(p.is_zero() for _, _, p in self.pieces)


def _exact_path_matrix(m, d: int) -> tuple:
    return tuple(tuple(_frac(v) for v in row) for row in m)


def evolve(g: Polynomial, a, t_start, t_end) -> PiecewisePolynomial:
    """Solve ``P0 u = 0`` forward from ``u(t_start) = g`` on ``[t_start, t_end]``.

    ``a`` is a :class:`CoefficientPath` (breakpoints should be rational) or a
    constant matrix.  Each piece is the terminating series
    ``exp((t - s_k) A_k) u(s_k)``.
    """
    if g.depends_on_t():
        raise UsageError("initial data must not depend on t")
    t_start, t_end = _frac(t_start), _frac(t_end)
    if t_end < t_start:
        raise UsageError("t_end must not precede t_start")
    if isinstance(a, CoefficientPath):
        segs = [(_frac(lo), _frac(hi), _exact_path_matrix(m, g.d))
                for lo, hi, m in a.segments(t_start, t_end)]
        if not segs:
            segs = [(t_start, t_end, _exact_path_matrix(a.at(t_start), g.d))]
    else:
        segs = [(t_start, t_end, as_matrix(a, g.d))]
    pieces, counts = [], []
    current = g
    for lo, hi, m in segs:
        u, n = _exp_flow(current, m, lo)
        pieces.append((lo, hi, u))
        counts.append(n)
        current = u.at_time(hi)
    return PiecewisePolynomial(tuple(pieces), tuple(counts))


def group_dilation_map(X0: PhasePoint, r, d: int) -> list:
    """Images of ``(t, x, y, z)`` under ``X -> X0 o dilate(r, X)`` as polynomials."""
    t, xs, ys, zs = Polynomial.variables(d)
    r = _frac(r)
    t0 = _frac(X0.t)
    x0 = [_frac(v) for v in X0.x]
    y0 = [_frac(v) for v in X0.y]
    z0 = [_frac(v) for v in X0.z]
    rt = t * r ** 2
    images = [rt + t0]
    images += [xs[i] * r + x0[i] for i in range(d)]
    images += [ys[i] * r ** 3 + y0[i] - rt * x0[i] for i in range(d)]
    images += [zs[i] * r ** 5 + z0[i] - rt * y0[i] + rt * rt * x0[i] / 2 for i in range(d)]
    return images


def translate_to_origin(u: Polynomial, X0: PhasePoint) -> Polynomial:
    """``v(X) = u(X0 o X)``, so integrals over ``Q(X0)`` become integrals over ``Q(0)``."""
    return u.substitute(group_dilation_map(X0, 1, u.d))


# -- exact integration over cylinders centred at the origin -----------------

@lru_cache(maxsize=None)
def _interval_moment(e: int, rho: Fraction) -> Fraction:
    if e % 2:
        return Fraction(0)
    return 2 * rho ** (e + 1) / (e + 1)


@lru_cache(maxsize=None)
def _disk_moment(a: int, b: int, rho: Fraction) -> Fraction:
    # int_{|v| < rho} v1^a v2^b dv / pi
    if a % 2 or b % 2:
        return Fraction(0)
    p, q = a // 2, b // 2
    c = Fraction(2 * math.factorial(2 * p) * math.factorial(2 * q),
                 4 ** (p + q) * math.factorial(p) * math.factorial(q) * math.factorial(p + q))
    return c * rho ** (a + b + 2) / (a + b + 2)


def _ball_moment(exps: Sequence[int], rho: Fraction) -> Fraction:
    if len(exps) == 1:
        return _interval_moment(exps[0], rho)
    if len(exps) == 2:
        return _disk_moment(exps[0], exps[1], rho)
    raise UsageError("exact ball moments are implemented for d in {1, 2}")


def cylinder_integral(u, Q: Cylinder, exact: bool = True):
    """``int_Q u`` for ``Q`` centred at the origin.

    Returns a ``Fraction`` for d = 1 and a :class:`PiMultiple` (a rational
    multiple of ``pi^3``) for d = 2.  ``u`` may be a :class:`PiecewisePolynomial`,
    in which case each piece is integrated over its own time span.
    """
    c = Q.center
    if any(v != 0 for v in c.as_tuple()):
        raise UsageError("cylinder_integral needs a cylinder centred at the origin; "
                         "use translate_to_origin first")
    d = Q.d
    if d not in (1, 2):
        raise UsageError("exact cylinder integrals are implemented for d in {1, 2}")
    r, R = _frac(Q.r), _frac(Q.R)
    lo, hi = (_frac(v) for v in Q.time_window())
    if isinstance(u, PiecewisePolynomial):
        pieces = [(max(lo, a), min(hi, b), p) for a, b, p in u.pieces]
        if u.span[0] > lo or u.span[1] < hi:
            raise UsageError(f"piecewise polynomial span {u.span} does not cover the "
                             f"cylinder time window {(lo, hi)}")
        pieces = [(a, b, p) for a, b, p in pieces if a < b]
    else:
        pieces = [(lo, hi, u)]
    total = Fraction(0)
    for a, b, p in pieces:
        if p.d != d:
            raise UsageError("dimension mismatch between polynomial and cylinder")
        for k, v in p.terms.items():
            kt = k[0]
            tint = (b ** (kt + 1) - a ** (kt + 1)) / (kt + 1)
            if tint == 0:
                continue
            mx = _ball_moment(k[1:1 + d], r)
            if mx == 0:
                continue
            my = _ball_moment(k[1 + d:1 + 2 * d], r ** 3)
            if my == 0:
                continue
            mz = _ball_moment(k[1 + 2 * d:], R ** 5)
            total += v * tint * mx * my * mz
    if d == 1:
        return total if exact else float(total)
    out = PiMultiple(total, 3)
    return out if exact else float(out)


def l2_norm_squared(u, Q: Cylinder):
    """Exact ``||u||^2_{L^2(Q)}``."""
    if isinstance(u, PiecewisePolynomial):
        return cylinder_integral(u.map(lambda p: p * p), Q)
    return cylinder_integral(u * u, Q)


def _sum_sq(polys: Iterable[Polynomial]) -> Polynomial:
    polys = list(polys)
    out = Polynomial(polys[0].d)
    for p in polys:
        out = out + p * p
    return out


def _grad_z_sq(p: Polynomial) -> Polynomial:
    return _sum_sq(p.d_z(i) for i in range(p.d))


def _hess_x_sq(p: Polynomial) -> Polynomial:
    return _sum_sq(p.d_x(i).d_x(j) for i in range(p.d) for j in range(p.d))


def _as_piecewise(u) -> PiecewisePolynomial:
    if isinstance(u, PiecewisePolynomial):
        return u
    return PiecewisePolynomial(((Fraction(-10 ** 9), Fraction(10 ** 9), u),))


@dataclass(frozen=True)
class PoincareResult:
    """Exact pieces of ``||u||_{Q2} / (||u||_{Q1} + ||grad_z u||_{Q2} + ||D_x^2 u||_{Q2})``."""

    numerator_sq: Fraction
    small_sq: Fraction
    grad_z_sq: Fraction
    hess_x_sq: Fraction
    ratio: float

    @property
    def denominator(self) -> float:
        return (math.sqrt(self.small_sq) + math.sqrt(self.grad_z_sq)
                + math.sqrt(self.hess_x_sq))

    @property
    def ratio_squared_exact(self) -> Fraction | None:
        """Exact squared ratio when only one denominator term is nonzero."""
        nz = [v for v in (self.small_sq, self.grad_z_sq, self.hess_x_sq) if v != 0]
        if len(nz) == 1:
            return self.numerator_sq / nz[0]
        return None


def _check_solution(u: PiecewisePolynomial, a) -> None:
    for lo, hi, p in u.pieces:
        m = a.at((lo + hi) / 2) if isinstance(a, CoefficientPath) else a
        if not apply_P0(p, as_matrix(m, p.d)).is_zero():
            raise UsageError("poincare_ratio needs a solution of P0 u = 0 on every piece")


def poincare_ratio(u, a=None, small: Cylinder | None = None,
                   large: Cylinder | None = None) -> PoincareResult:
    """Ratio of the homogeneous-solution Poincare inequality on ``Q_1`` inside ``Q_2``.

    ``a`` (constant matrix or :class:`CoefficientPath`) is used to verify that
    ``u`` solves ``P0 u = 0``; pass ``None`` to skip that check.
    """
    pu = _as_piecewise(u)
    d = pu.d
    if a is not None:
        _check_solution(pu, a)
    small = small or Cylinder.at_origin(1, d)
    large = large or Cylinder.at_origin(2, d)
    num = l2_norm_squared(pu, large)
    s1 = l2_norm_squared(pu, small)
    gz = cylinder_integral(pu.map(_grad_z_sq), large)
    hx = cylinder_integral(pu.map(_hess_x_sq), large)
    vals = [float(v) for v in (num, s1, gz, hx)]
    den = math.sqrt(vals[1]) + math.sqrt(vals[2]) + math.sqrt(vals[3])
    if den == 0:
        if vals[0] == 0:
            raise UndefinedRatioError("u vanishes on Q_2: the Poincare ratio is 0/0")
        raise InvariantViolation("Poincare denominator vanishes while ||u||_{Q_2} > 0")
    ratio = math.sqrt(vals[0]) / den
    coerce = (lambda v: v.coeff) if d == 2 else (lambda v: v)
    return PoincareResult(coerce(num), coerce(s1), coerce(gz), coerce(hx), ratio)


def _monomials_up_to(d: int, max_weight: int) -> list:
    """Exponents in (x, y, z) of weighted degree ``<= max_weight``."""
    w = (1,) * d + (3,) * d + (5,) * d
    out = []
    ranges = [range(max_weight // wi + 1) for wi in w]
    for k in itertools.product(*ranges):
        if sum(a * b for a, b in zip(k, w)) <= max_weight:
            out.append((0,) + k)
    return sorted(out, key=lambda k: (sum(a * b for a, b in zip(k[1:], w)), k))


def poincare_corpus(a, d: int = 1, max_weight: int = 10, n_random: int = 200,
                    seed: int = 0, t_start=-4, t_end=0) -> list:
    """``(label, initial data, evolved solution)`` triples.

    All monomial initial data up to the given anisotropic weight, then
    ``n_random`` seeded rational combinations of up to four of them.
    """
    monos = _monomials_up_to(d, max_weight)
    corpus = []
    names = _names(d)
    for k in monos:
        g = Polynomial.monomial(k, 1, d)
        label = "mono:" + ("*".join(f"{n}^{e}" for n, e in zip(names, k) if e) or "1")
        corpus.append((label, g, evolve(g, a, t_start, t_end)))
    rng = np.random.default_rng(seed)
    for i in range(n_random):
        n_terms = int(rng.integers(1, 5))
        idx = rng.choice(len(monos), size=n_terms, replace=False)
        g = Polynomial(d)
        for j in sorted(int(v) for v in idx):
            num = int(rng.integers(-9, 10)) or 1
            den = int(rng.integers(1, 6))
            g = g + Polynomial.monomial(monos[j], Fraction(num, den), d)
        corpus.append((f"rand:{i}", g, evolve(g, a, t_start, t_end)))
    return corpus


# -- kernel characterisation ----------------------------------------------

def kernel_basis(d: int) -> list:
    """``1, x_i, y_i + t x_i, x_i y_j - x_j y_i`` (labels and polynomials)."""
    t, xs, ys, _ = Polynomial.variables(d)
    basis = [("1", Polynomial.constant(1, d))]
    basis += [(f"x{i + 1}", xs[i]) for i in range(d)]
    basis += [(f"y{i + 1}+t*x{i + 1}", ys[i] + t * xs[i]) for i in range(d)]
    basis += [(f"x{i + 1}*y{j + 1}-x{j + 1}*y{i + 1}", xs[i] * ys[j] - xs[j] * ys[i])
              for i in range(d) for j in range(i + 1, d)]
    return basis


def _kernel_functionals(d: int) -> list:
    t, xs, ys, _ = Polynomial.variables(d)
    fs = [("int u", Polynomial.constant(1, d))]
    fs += [(f"int x{i + 1} u", xs[i]) for i in range(d)]
    fs += [(f"int y{i + 1} u", ys[i]) for i in range(d)]
    fs += [(f"int x{i + 1} y{j + 1} u", xs[i] * ys[j]) for i in range(d) for j in range(i + 1, d)]
    return fs


def exact_det(M: list) -> Fraction:
    """Determinant by fraction-exact Gaussian elimination."""
    A = [list(row) for row in M]
    n = len(A)
    det = Fraction(1)
    for c in range(n):
        p = next((r for r in range(c, n) if A[r][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            A[c], A[p] = A[p], A[c]
            det = -det
        det *= A[c][c]
        for r in range(c + 1, n):
            f = A[r][c] / A[c][c]
            if f:
                for k in range(c, n):
                    A[r][k] -= f * A[c][k]
    return det


def kernel_moment_matrix(d: int, r=1) -> tuple:
    """Moments of the kernel family over ``Q_r`` and the determinant.

    Returns ``(M, det, row_labels, col_labels)``.  For d = 1 entries and
    determinant are ``Fraction``; for d = 2 every entry carries one factor of
    ``pi^3`` which is factored out, so ``M`` holds the rational cofactors and
    ``det`` is a :class:`PiMultiple`.
    """
    if d not in (1, 2):
        raise UsageError("kernel_moment_matrix is implemented for d in {1, 2}")
    Q = Cylinder.at_origin(_frac(r), d)
    basis = kernel_basis(d)
    funcs = _kernel_functionals(d)
    M = []
    for _, f in funcs:
        row = []
        for _, b in basis:
            v = cylinder_integral(f * b, Q)
            row.append(v.coeff if isinstance(v, PiMultiple) else v)
        M.append(row)
    det = exact_det(M)
    if d == 2:
        det = PiMultiple(det, 3 * len(M))
    return M, det, [n for n, _ in funcs], [n for n, _ in basis]


# -- interior estimate diagnostics -----------------------------------------

def _derivative_tensor(u: Polynomial, m: int, l: int, k: int) -> list:
    """All distinct mixed partials of orders (m in x, l in y, k in z) with multiplicities."""
    d = u.d
    out = []
    for ix in itertools.combinations_with_replacement(range(d), m):
        for iy in itertools.combinations_with_replacement(range(d), l):
            for iz in itertools.combinations_with_replacement(range(d), k):
                p = u
                for i in ix:
                    p = p.d_x(i)
                for i in iy:
                    p = p.d_y(i)
                for i in iz:
                    p = p.d_z(i)
                mult = _multiplicity(ix) * _multiplicity(iy) * _multiplicity(iz)
                out.append((mult, p))
    return out


def _multiplicity(idx: tuple) -> int:
    n = math.factorial(len(idx))
    for v in set(idx):
        n //= math.factorial(idx.count(v))
    return n


def _cylinder_grid(Q: Cylinder, n: int) -> np.ndarray:
    d = Q.d
    r, R = float(Q.r), float(Q.R)
    lo, hi = (float(v) for v in Q.time_window())
    ts = np.linspace(lo, hi, n)
    axes = [ts]
    for rho in (r, r ** 3, R ** 5):
        axes += [np.linspace(-rho, rho, n)] * d
    mesh = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    keep = np.ones(mesh.shape[0], dtype=bool)
    for g, rho in enumerate((r, r ** 3, R ** 5)):
        block = mesh[:, 1 + g * d:1 + (g + 1) * d]
        keep &= np.sum(block * block, axis=1) <= rho * rho * (1 + 1e-12)
    return mesh[keep]


def interior_ratio(u: Polynomial, order: tuple = (0, 0, 0), R=Fraction(3, 4),
                   grid_points: int = 9, a=None) -> float:
    """``(sup_{Q_1/2} |D u| + sup_{Q_1/2} |d_t D u|) / ||u||_{L^2(Q_R)}``.

    ``D = grad_x^m grad_y^l grad_z^k``; derivatives are exact, the suprema are
    taken over a closed sample grid of ``Q_{1/2}``.
    """
    if not Fraction(1, 2) < _frac(R) < 1:
        raise UsageError("R must lie in (1/2, 1)")
    if a is not None and not apply_P0(u, a).is_zero():
        raise UsageError("interior_ratio needs a solution of P0 u = 0")
    if u.is_zero():
        raise UndefinedRatioError("u vanishes identically")
    d = u.d
    m, l, k = order
    parts = _derivative_tensor(u, m, l, k)
    pts = _cylinder_grid(Cylinder.at_origin(0.5, d), grid_points)
    sq = np.zeros(pts.shape[0])
    sq_t = np.zeros(pts.shape[0])
    for mult, p in parts:
        v = p.evaluate_array(pts)
        vt = p.d_t().evaluate_array(pts)
        sq += mult * v * v
        sq_t += mult * vt * vt
    numerator = float(np.sqrt(sq).max()) + float(np.sqrt(sq_t).max())
    den = math.sqrt(float(l2_norm_squared(u, Cylinder.at_origin(_frac(R), d))))
    return numerator / den
