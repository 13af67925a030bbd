"""Source terms with closed-form spatial Fourier transforms.

A trial source is a finite sum of separable packets::

    f(t, x, y, z) = sum_p c_p  h_p(t)  S_p(x, y, z)

where ``h_p`` is an indicator or polynomial B-spline bump and ``S_p`` is a
product over the ``3d`` coordinates of modulated Gauss-Hermite functions
``He_k(b (v - c)) exp(-b^2 (v - c)^2 / 2) exp(i w (v - c))``.

Fourier convention: ``g^(nu) = int g(v) exp(-i v nu) dv``, so
``||g||^2 = (2 pi)^{-n} ||g^||^2`` in n dimensions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from numpy.polynomial import hermite_e
from scipy.interpolate import BSpline

from .errors import UsageError
from .symbols import FrequencyPoint

__all__ = [
    "TimeProfile",
    "SpatialPacket",
    "TrialFunction",
    "f_hat",
    "f_value",
    "rhs_l2_norm",
    "dilate_trial",
    "MAX_HERMITE_ORDER",
]

MAX_HERMITE_ORDER = 4


def _tuple(v, d=None) -> tuple:
    if np.isscalar(v):
        return (float(v),) * (d or 1)
    return tuple(float(a) for a in v)


@dataclass(frozen=True)
class TimeProfile:
    """Time factor supported on ``[s0, s1]``.

    ``shape="indicator"`` is ``amplitude`` on ``(s0, s1)``; ``shape="bump"`` is
    the cardinal B-spline of degree ``order`` stretched over ``[s0, s1]``
    (``C^{order-1}``, piecewise polynomial between its knots).
    """

    s0: float
    s1: float
    shape: str = "indicator"
    order: int = 3
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.s0 < self.s1:
            raise UsageError("time profile needs s0 < s1")
        if self.shape not in ("indicator", "bump"):
            raise UsageError(f"unknown time profile shape {self.shape!r}")
        if self.shape == "bump" and self.order < 1:
            raise UsageError("bump order must be >= 1")

    def knots(self) -> np.ndarray:
        if self.shape == "indicator":
            return np.array([self.s0, self.s1])
        return np.linspace(self.s0, self.s1, self.order + 2)

    def breakpoints(self) -> tuple:
        return tuple(float(v) for v in self.knots())

    def degree(self) -> int:
        return 0 if self.shape == "indicator" else self.order

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.shape == "indicator":
            return np.where((t > self.s0) & (t < self.s1), self.amplitude, 0.0)
        spline = BSpline.basis_element(self.knots(), extrapolate=False)
        v = spline(t)
        return self.amplitude * np.nan_to_num(v, nan=0.0)

    def dilated(self, r: float) -> "TimeProfile":
        r2 = r * r
        return replace(self, s0=self.s0 / r2, s1=self.s1 / r2)


@dataclass(frozen=True)
class SpatialPacket:
    """Separable modulated Gauss-Hermite function on R^{3d}.

    Each of ``center``, ``inv_width``, ``hermite``, ``modulation`` is a triple
    ``(x-part, y-part, z-part)`` of length-d tuples.
    """

    center: tuple = ((0.0,), (0.0,), (0.0,))
    inv_width: tuple = ((1.0,), (1.0,), (1.0,))
    hermite: tuple = ((0,), (0,), (0,))
    modulation: tuple = ((0.0,), (0.0,), (0.0,))

    def __post_init__(self):
        d = len(_tuple(self.center[0]))
        center = tuple(_tuple(c, d) for c in self.center)
        inv_width = tuple(_tuple(c, d) for c in self.inv_width)
        modulation = tuple(_tuple(c, d) for c in self.modulation)
        hermite = tuple(tuple(int(k) for k in (h if not np.isscalar(h) else (h,) * d))
                        for h in self.hermite)
        groups = (center, inv_width, modulation, hermite)
        if any(len(g) != 3 for g in groups) or any(len(v) != d for g in groups for v in g):
            raise UsageError("packet parameters must be three length-d vectors each")
        if any(b <= 0 for v in inv_width for b in v):
            raise UsageError("packet inverse widths must be positive")
        if any(not 0 <= k <= MAX_HERMITE_ORDER for v in hermite for k in v):
            raise UsageError(f"Hermite orders must lie in [0, {MAX_HERMITE_ORDER}]")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "inv_width", inv_width)
        object.__setattr__(self, "modulation", modulation)
        object.__setattr__(self, "hermite", hermite)

    @property
    def d(self) -> int:
        return len(self.center[0])

    @classmethod
    def gaussian(cls, d: int = 1, width: float = 1.0) -> "SpatialPacket":
        z = (0.0,) * d
        b = (1.0 / width,) * d
        return cls((z, z, z), (b, b, b), ((0,) * d,) * 3, (z, z, z))

    def _axes(self):
        for g in range(3):
            for i in range(self.d):
                yield (g, i, self.center[g][i], self.inv_width[g][i], self.hermite[g][i],
                       self.modulation[g][i])

    def hat(self, w: FrequencyPoint) -> np.ndarray:
        """Closed-form Fourier transform at frequencies ``w`` (any leading shape)."""
        comps = (np.asarray(w.xi, dtype=float), np.asarray(w.eta, dtype=float),
                 np.asarray(w.zeta, dtype=float))
        gauss = 0.0
        phase = 0.0
        poly = 1.0
        order = 0
        scale = 1.0
        for g, i, c, b, k, om in self._axes():
            nu = comps[g][..., i]
            u = (nu - om) / b
            gauss = gauss - 0.5 * u * u
            if c:
                phase = phase - c * nu
            if k:
                poly = poly * u ** k
                order += k
            scale *= math.sqrt(2 * math.pi) / b
        amp = (scale * (-1j) ** order) * (poly * np.exp(gauss))
        if np.ndim(phase) == 0 and phase == 0:
            return amp + 0j
        return amp * (np.cos(phase) + 1j * np.sin(phase))

    def value(self, x, y, z) -> np.ndarray:
        """Physical-space values; ``x, y, z`` have shape ``S + (d,)``."""
        comps = (np.asarray(x, dtype=float), np.asarray(y, dtype=float),
                 np.asarray(z, dtype=float))
        out = 1.0 + 0j
        for g, i, c, b, k, om in self._axes():
            s = comps[g][..., i] - c
            u = b * s
            h = hermite_e.hermeval(u, [0] * k + [1]) if k else 1.0
            out = out * h * np.exp(-0.5 * u * u + 1j * om * s)
        return out

    def spectral_box(self, truncation: float) -> list:
        """``[(lo, hi)]`` per frequency group and component outside which ``|hat|`` is negligible."""
        box = [[None] * self.d for _ in range(3)]
        for g, i, c, b, k, om in self._axes():
            half = b * (truncation + math.sqrt(k))
            box[g][i] = (om - half, om + half)
        return box

    def dilated(self, r: float) -> "SpatialPacket":
        """Parameters of ``S(r x, r^3 y, r^5 z)``."""
        p = (r, r ** 3, r ** 5)
        return SpatialPacket(
            tuple(tuple(c / p[g] for c in self.center[g]) for g in range(3)),
            tuple(tuple(b * p[g] for b in self.inv_width[g]) for g in range(3)),
            self.hermite,
            tuple(tuple(om * p[g] for om in self.modulation[g]) for g in range(3)),
        )


@dataclass(frozen=True)
class TrialFunction:
    """``f = sum_p coeff_p * profile_p(t) * packet_p(x, y, z)``."""

    packets: tuple = field(default_factory=tuple)

    def __post_init__(self):
        packets = tuple((p, s, complex(c)) for p, s, c in self.packets)
        if packets and len({s.d for _, s, _ in packets}) != 1:
            raise UsageError("all packets must share the dimension d")
        object.__setattr__(self, "packets", packets)

    @property
    def d(self) -> int:
        return self.packets[0][1].d if self.packets else 1

    @classmethod
    def single(cls, profile: TimeProfile, packet: SpatialPacket, coeff: complex = 1.0):
        return cls(((profile, packet, coeff),))

    @property
    def time_support(self) -> tuple:
        if not self.packets:
            return (0.0, 0.0)
        return (min(p.s0 for p, _, _ in self.packets), max(p.s1 for p, _, _ in self.packets))

    def time_breakpoints(self) -> tuple:
        pts = set()
        for p, _, _ in self.packets:
            pts.update(p.breakpoints())
        return tuple(sorted(pts))

    def max_time_degree(self) -> int:
        return max((p.degree() for p, _, _ in self.packets), default=0)

    def spectral_box(self, truncation: float) -> tuple:
        """Union of packet boxes: ``(centers, half_widths)`` as 3 x d arrays."""
        d = self.d
        lo = np.full((3, d), np.inf)
        hi = np.full((3, d), -np.inf)
        for _, s, _ in self.packets:
            for g, row in enumerate(s.spectral_box(truncation)):
                for i, (a, b) in enumerate(row):
                    lo[g, i] = min(lo[g, i], a)
                    hi[g, i] = max(hi[g, i], b)
        return (lo + hi) / 2, (hi - lo) / 2

    def scaled(self, factor: complex) -> "TrialFunction":
        return TrialFunction(tuple((p, s, c * factor) for p, s, c in self.packets))

    def __add__(self, other: "TrialFunction") -> "TrialFunction":
        return TrialFunction(self.packets + other.packets)


def f_hat(trial: TrialFunction, t, w: FrequencyPoint) -> np.ndarray:
    """Spatial Fourier transform ``F(t, xi, eta, zeta)``; ``t`` broadcasts against ``w``.

    Packets are only evaluated where their time profile is nonzero.
    """
    t = np.asarray(t, dtype=float)
    shape = np.broadcast_shapes(t.shape, np.shape(w.xi)[:-1])
    out = np.zeros(shape, dtype=complex)
    rowwise = t.ndim >= 1 and t.shape[0] == shape[0] and t.size == t.shape[0] and \
        np.shape(w.xi)[0] == shape[0]
    for prof, packet, c in trial.packets:
        h = prof(t)
        if not np.any(h):
            continue
        if rowwise and not np.all(h):
            rows = np.flatnonzero(h.reshape(-1))
            sub = FrequencyPoint(*(np.broadcast_to(c_, shape + c_.shape[-1:])[rows]
                                   for c_ in (w.xi, w.eta, w.zeta)))
            out[rows] += (c * h.reshape(-1)[rows]).reshape((-1,) + (1,) * (len(shape) - 1)) \
                * packet.hat(sub)
        else:
            out = out + c * h * packet.hat(w)
    return out


def f_value(trial: TrialFunction, t, x, y, z) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = 0.0
    for prof, packet, c in trial.packets:
        out = out + c * prof(t) * packet.value(x, y, z)
    return out


def _time_nodes(breaks: Sequence[float], n: int):
    gn, gw = np.polynomial.legendre.leggauss(n)
    ts, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b > a:
            ts.append(0.5 * (b - a) * gn + 0.5 * (a + b))
            ws.append(0.5 * (b - a) * gw)
    if not ts:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(ts), np.concatenate(ws)


def _axis_inner(pa: SpatialPacket, pb: SpatialPacket, g: int, i: int, truncation: float,
                nodes: int) -> complex:
    """``int g_a conj(g_b) dv`` for one coordinate, via Parseval on a truncated box."""
    box_a = pa.spectral_box(truncation)[g][i]
    box_b = pb.spectral_box(truncation)[g][i]
    lo, hi = max(box_a[0], box_b[0]), min(box_a[1], box_b[1])
    if lo >= hi:
        return 0.0
    gn, gw = np.polynomial.legendre.leggauss(nodes)
    nu = 0.5 * (hi - lo) * gn + 0.5 * (hi + lo)
    wts = 0.5 * (hi - lo) * gw

    def one_axis(p: SpatialPacket):
        c, b, k, om = p.center[g][i], p.inv_width[g][i], p.hermite[g][i], p.modulation[g][i]
        u = (nu - om) / b
        return math.sqrt(2 * math.pi) / b * (-1j * u) ** k * np.exp(-0.5 * u * u - 1j * c * nu)

    return complex(np.sum(wts * one_axis(pa) * np.conj(one_axis(pb)))) / (2 * math.pi)


def rhs_l2_norm(trial: TrialFunction, lam: float = 0.0, quad=None, T: float | None = None) -> float:
    """``||f||_{L^2}`` over ``(-inf, T) x R^{3d}`` by Parseval.

    The norm does not depend on ``lam``; it is accepted because this is the
    right-hand side ``||P0 u + lam u||`` of the main estimate.  Spatial inner
    products factor over coordinates; each 1-D factor is a Gauss-Legendre
    Parseval integral, and time integrals are exact Gauss-Legendre rules on
    the piecewise-polynomial profiles.
    """
    from .solver import QuadratureSpec

    quad = quad or QuadratureSpec()
    if not trial.packets:
        return 0.0
    P = trial.packets
    n = len(P)
    gram = np.zeros((n, n), dtype=complex)
    for a in range(n):
        for b in range(a, n):
            v = complex(P[a][2] * np.conj(P[b][2]))
            for g in range(3):
                for i in range(trial.d):
                    v *= _axis_inner(P[a][1], P[b][1], g, i, quad.truncation, quad.parseval_nodes)
            gram[a, b] = v
            gram[b, a] = np.conj(v)
    breaks = list(trial.time_breakpoints())
    if T is not None:
        breaks = [b for b in breaks if b < T] + ([T] if breaks and breaks[0] < T else [])
    n_t = trial.max_time_degree() + 2
    ts, ws = _time_nodes(breaks, n_t)
    if ts.size == 0:
        return 0.0
    prof = np.stack([p(ts) for p, _, _ in P])
    time_gram = (prof * ws) @ prof.T
    total = float(np.real(np.sum(gram * time_gram)))
    return math.sqrt(max(total, 0.0))


def dilate_trial(trial: TrialFunction, r) -> TrialFunction:
    """Source ``X -> f(r^2 t, r x, r^3 y, r^5 z)`` (no extra amplitude factor)."""
    r = float(getattr(r, "r", r))
    if r <= 0:
        raise UsageError("dilation parameter must be positive")
    return TrialFunction(tuple((p.dilated(r), s.dilated(r), c) for p, s, c in trial.packets))
