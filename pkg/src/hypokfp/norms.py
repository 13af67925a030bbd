"""Parseval seminorm engine for the global L^2 estimate and the constant search.

Every left-hand-side quantity of the estimate is a weighted L^2 norm of the
Fourier-side solution ``U``::

    lam ||u||            <-> lam   ||U||
    lam^1/2 ||D_x u||    <-> lam^1/2 || |xi| U ||
    ||D_x^2 u||          <-> || |xi|^2 U ||
    ||(-Lap_y)^1/3 u||   <-> || |eta|^{2/3} U ||
    ||(-Lap_z)^1/5 u||   <-> || |zeta|^{2/5} U ||
    ||D_x (-Lap_y)^1/6 u|| <-> || |xi| |eta|^{1/3} U ||
    ||(d_t - x.D_y - y.D_z) u|| <-> || F - (xi^T a xi + lam) U ||

The integrals over ``(t, xi, eta, zeta)`` use tensor Gauss-Legendre rules on
boxes derived from the source parameters only, in frequency coordinates
sheared to the middle of the elapsed time window.  Because every box, node
and breakpoint is built from quantities that transform covariantly under the
anisotropic dilation, the discrete seminorms inherit the exact scaling law of
the continuous ones.
"""
from __future__ import annotations

import hashlib
import json
import math
from functools import lru_cache
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Sequence

import numpy as np

from .errors import UndefinedRatioError, UsageError
from .solver import QuadratureSpec, SpectralSolution
from .symbols import CoefficientPath, FrequencyPoint, characteristic, dissipation_coefficients
from .trial import SpatialPacket, TimeProfile, TrialFunction, dilate_trial, f_hat, rhs_l2_norm

__all__ = [
    "SeminormVector",
    "seminorms",
    "seminorms_multi",
    "estimate_ratio",
    "interpolation_gap",
    "scale_invariance_check",
    "scale_invariance_multi",
    "TrialFamily",
    "TrialRecord",
    "EstimateReport",
    "constant_search",
    "map_jobs",
    "LHS_FIELDS",
    "gaussian_moment_reference",
]

LHS_FIELDS = ("lambda_u", "sqrtlambda_grad_x", "grad_x2", "frac_y13", "frac_z15",
              "mixed_xy16", "transport")


@dataclass(frozen=True)
class SeminormVector:
    lambda_u: float = 0.0
    sqrtlambda_grad_x: float = 0.0
    grad_x2: float = 0.0
    frac_y13: float = 0.0
    frac_z15: float = 0.0
    mixed_xy16: float = 0.0
    transport: float = 0.0
    rhs: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = float(getattr(self, f.name))
            object.__setattr__(self, f.name, v)
            if not (math.isfinite(v) and v >= 0):
                raise UsageError(f"seminorm {f.name} must be finite and >= 0, got {v}")

    def lhs(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in LHS_FIELDS])

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)])

    def as_dict(self) -> dict:
        return asdict(self)


def estimate_ratio(v: SeminormVector) -> float:
    """Sum of the seven left-hand-side terms over the right-hand side."""
    total = float(np.sum(v.lhs()))
    if v.rhs == 0:
        raise UndefinedRatioError("right-hand side ||f|| vanishes; the estimate ratio is undefined")
    return total / v.rhs


def interpolation_gap(v: SeminormVector) -> float:
    """``mixed_xy16 - (grad_x2 + frac_y13) / 2``; never positive beyond rounding."""
    return v.mixed_xy16 - 0.5 * (v.grad_x2 + v.frac_y13)


@lru_cache(maxsize=None)
def _gl(n: int):
    return np.polynomial.legendre.leggauss(n)


def _pieces(lo: float, hi: float, breaks: Sequence[float]) -> list:
    cuts = [lo] + [b for b in breaks if lo < b < hi] + [hi]
    return [(a, b) for a, b in zip(cuts[:-1], cuts[1:]) if b > a]


def _nodes_on(pieces: list, n: int, n_min: int = 4):
    """Gauss-Legendre nodes on consecutive pieces, budget ``n`` shared by length.

    Each piece gets ``max(n_min, ceil(n * length / total))`` nodes, which
    depends only on length ratios and so is unchanged by time dilation.
    """
    if not pieces:
        return np.zeros(0), np.zeros(0)
    total = pieces[-1][1] - pieces[0][0]
    ts, ws = [], []
    for a, b in pieces:
        m = max(min(n_min, n), math.ceil(n * (b - a) / total - 1e-9))
        gn, gw = _gl(m)
        ts.append(0.5 * (b - a) * gn + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * gw)
    return np.concatenate(ts), np.concatenate(ws)


@lru_cache(maxsize=None)
def _unit_rule(m: int):
    gn, gw = _gl(m)
    return 0.5 * (gn + 1), 0.5 * gw


def _segments(intervals: list, n: int) -> list:
    """Composite layout over the union of ``intervals``: ``[(a, b, nodes)]``.

    Every segment between consecutive interval endpoints gets ``n`` nodes per
    width of the narrowest interval covering it (at least 4); gaps covered by
    no interval are skipped.  Node counts depend only on length ratios.
    """
    cuts = sorted({e for iv in intervals for e in iv})
    segs = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        cover = [hi - lo for lo, hi in intervals if lo <= a and hi >= b]
        if b <= a or not cover:
            continue
        segs.append((a, b, max(4, math.ceil(n * (b - a) / min(cover) - 1e-9))))
    return segs


def _composite(shift, segs: list, split_zero: bool):
    """Nodes and weights of ``segs`` translated by each entry of ``shift``.

    With ``split_zero`` a segment containing 0 is split there, its nodes
    shared by length, and each half uses ``s = L u^2`` towards 0.  This keeps
    the fractional weights ``|eta|^{2/3}``, ``|zeta|^{2/5}`` off the interior
    of any Gauss-Legendre panel.
    """
    shift = np.atleast_1d(np.asarray(shift, dtype=float))
    total = sum(m for _, _, m in segs)
    nodes = np.empty(shift.shape + (total,))
    weights = np.empty(shift.shape + (total,))
    col = 0
    for a, b, m in segs:
        u, wu = _unit_rule(m)
        lo = a + shift
        length = b - a
        nodes[..., col:col + m] = lo[..., None] + length * u
        weights[..., col:col + m] = length * wu
        if split_zero:
            for idx in zip(*np.nonzero((lo < 0) & (lo + length > 0))):
                left = -lo[idx]
                k = min(max(int(round(m * left / length)), 2), m - 2)
                xs, ws = [], []
                for part, mm, sign in ((left, k, -1.0), (length - left, m - k, 1.0)):
                    uu, ww = _unit_rule(mm)
                    xs.append(sign * part * uu * uu)
                    ws.append(2 * part * uu * ww)
                nodes[idx + (slice(col, col + m),)] = np.concatenate(xs)
                weights[idx + (slice(col, col + m),)] = np.concatenate(ws)
        col += m
    return nodes, weights


def _packet_intervals(trial: TrialFunction, quad: QuadratureSpec, d: int) -> list:
    """Per component: list over packets of (xi, eta, zeta) ``(lo, hi)`` source intervals."""
    if quad.radii is not None:
        return [[tuple((-r, r) for r in quad.radii)] for _ in range(d)]
    out = [[] for _ in range(d)]
    for _, packet, _ in trial.packets:
        box = packet.spectral_box(quad.truncation)
        for i in range(d):
            out[i].append(tuple(box[g][i] for g in range(3)))
    return out


def _frequency_grid(intervals: list, h: float, quad: QuadratureSpec, d: int):
    """Nodes ``w = (xi, eta, zeta)`` covering the sheared source boxes, with weights.

    In the sheared coordinates ``v = char(t, t - h, w)`` every packet box is
    a plain product, widened in ``eta`` by ``h`` times the packet's ``zeta``
    reach and in ``xi`` by the matching first- and second-order terms; the
    unwidened core keeps its own full node density.
    Written back in ``w`` the ``eta`` rule is translated by ``h zeta`` and the
    ``xi`` rule by ``h eta - h^2 zeta / 2``.  Each component gets axes
    ``(zeta, eta, xi)``; components are combined as an outer product.
    """
    nx, ne, nz = quad.freq_nodes
    comps = [[], [], []]
    weight = None
    for i in range(d):
        zi, ei, xi_ = [], [], []
        for bx, be, bz in intervals[i]:
            rz = max(abs(bz[0]), abs(bz[1]))
            re_ = max(abs(be[0]), abs(be[1]))
            ext_e = h * rz
            ext_x = h * re_ + 0.5 * h * h * rz
            zi.append(bz)
            ei += [be, (be[0] - ext_e, be[1] + ext_e)]
            xi_ += [bx, (bx[0] - ext_x, bx[1] + ext_x)]
        z, wz = _composite(0.0, _segments(zi, nz), True)
        z, wz = z[0], wz[0]
        e, we = _composite(h * z, _segments(ei, ne), True)
        x, wx = _composite(h * e - 0.5 * h * h * z[:, None], _segments(xi_, nx), False)
        full = x.shape
        parts = (x, np.broadcast_to(e[:, :, None], full), np.broadcast_to(z[:, None, None], full))
        wi = wz[:, None, None] * we[:, :, None] * wx
        lead = (1,) * (3 * i)
        trail = (1,) * (3 * (d - i - 1))
        for g in range(3):
            comps[g].append(parts[g].reshape(lead + full + trail))
        wi = wi.reshape(lead + full + trail)
        weight = wi if weight is None else weight * wi
    shape = weight.shape
    comps = [np.stack([np.broadcast_to(c, shape) for c in comps[g]], axis=-1) for g in range(3)]
    return comps, weight


def seminorms_multi(trial: TrialFunction, a: CoefficientPath, lambdas: Sequence[float],
                    quad: QuadratureSpec | None = None, T: float = 0.0) -> list:
    """Seminorm vectors of the solutions for every ``lam`` in ``lambdas`` (one shared pass)."""
    quad = quad or QuadratureSpec()
    lambdas = [float(v) for v in lambdas]
    if any(v < 0 for v in lambdas):
        raise UsageError("lambda must be >= 0")
    nl = len(lambdas)
    sums = np.zeros((nl, 7))
    rhs = rhs_l2_norm(trial, quad=quad, T=T)
    if not trial.packets:
        return [SeminormVector() for _ in lambdas]
    d = trial.d
    if a.d != d:
        raise UsageError("coefficient path and source dimensions differ")
    t_lo = trial.time_support[0]
    if T <= t_lo:
        return [SeminormVector(rhs=rhs) for _ in lambdas]
    intervals = _packet_intervals(trial, quad, d)
    breaks = sorted(set(float(b) for b in a.interior_breakpoints) | set(trial.time_breakpoints()))
    outer_t, outer_w = _nodes_on(_pieces(t_lo, T, breaks), quad.time_nodes)
    norm = (2 * math.pi) ** (-3 * d)
    lam_arr = np.array(lambdas)
    bounds = a.bounds()
    mats = [np.array(m, dtype=float) for _, _, m in bounds]
    for t, wt in zip(outer_t, outer_w):
        h = 0.5 * (t - t_lo)
        (wx, we, wz), fw = _frequency_grid(intervals, h, quad, d)
        w = FrequencyPoint(wx, we, wz)
        inner_t, inner_w = _nodes_on(_pieces(t_lo, t, breaks), quad.duhamel_nodes)
        damp = np.zeros((inner_t.size,) + fw.shape)
        for (lo, hi, _), m in zip(bounds, mats):
            coeffs = None
            for j, tp in enumerate(inner_t):
                sa, sb = max(tp, lo) - t, min(t, hi) - t
                if not sa < sb:
                    continue
                if coeffs is None:
                    coeffs = dissipation_coefficients(m, w)
                pa, pb = sa, sb
                acc = damp[j]
                for k in range(5):
                    acc += coeffs[k] * ((pb - pa) / (k + 1))
                    pa, pb = pa * sa, pb * sb
        tpx = inner_t.reshape((-1,) + (1,) * fw.ndim)
        moved = characteristic(t, tpx, w)
        G = np.exp(-damp) * f_hat(trial, tpx, moved)
        F_now = f_hat(trial, t, w)
        xi2 = np.sum(w.xi * w.xi, axis=-1)
        eta23 = np.cbrt(np.sum(w.eta * w.eta, axis=-1))
        zeta45 = np.sum(w.zeta * w.zeta, axis=-1) ** 0.4
        qa = np.einsum("...i,ij,...j->...", w.xi, np.array(a.matrix_at(t)), w.xi)
        weight = wt * norm * fw
        for li, lam in enumerate(lam_arr):
            decay = inner_w * np.exp(-lam * (t - inner_t))
            U = np.einsum("j,j...->...", decay, G)
            U2 = (U.real * U.real + U.imag * U.imag) * weight
            R = F_now - (qa + lam) * U
            sums[li, 0] += np.sum(U2)
            sums[li, 1] += np.sum(xi2 * U2)
            sums[li, 2] += np.sum(xi2 * xi2 * U2)
            sums[li, 3] += np.sum(eta23 * eta23 * U2)
            sums[li, 4] += np.sum(zeta45 * U2)
            sums[li, 5] += np.sum(xi2 * eta23 * U2)
            sums[li, 6] += np.sum((R.real * R.real + R.imag * R.imag) * weight)
    out = []
    for li, lam in enumerate(lambdas):
        s = np.sqrt(np.maximum(sums[li], 0.0))
        out.append(SeminormVector(lam * s[0], math.sqrt(lam) * s[1], s[2], s[3], s[4], s[5],
                                  s[6], rhs))
    return out


def seminorms(sol: SpectralSolution, quad: QuadratureSpec | None = None,
              T: float = 0.0) -> SeminormVector:
    """All seven left-hand-side seminorms and ``||f||`` for one solution."""
    quad = quad or sol.time_quadrature
    return seminorms_multi(sol.source, sol.coefficients, [sol.lam], quad, T)[0]


def gaussian_moment_reference(lam: float, s0: float = -1.0, s1: float = 0.0, a0: float = 1.0,
                              T: float = 0.0, nodes: int = 40) -> tuple:
    """``(lam ||u||, lam^1/2 ||D_x u||, ||D_x^2 u||)`` for the unit Gaussian benchmark.

    Independent of the seminorm engine: d = 1, constant ``a = a0``, source
    ``1_{(s0, s1)}(t) exp(-(x^2 + y^2 + z^2) / 2)``.  For fixed ``t, t', t''``
    the product ``U(t; t') conj(U(t; t''))`` integrates over frequency in
    closed form (a Gaussian with matrix ``A(t, t') + A(t, t'')``), leaving a
    smooth triple time integral done by Gauss-Legendre.
    """
    if not s0 < s1:
        raise UsageError("need s0 < s1")
    gn, gw = np.polynomial.legendre.leggauss(nodes)

    def A(t, tp):
        s = tp - t
        C = np.array([[1.0, s, s * s / 2], [0.0, 1.0, s], [0.0, 0.0, 1.0]])
        D = np.empty((3, 3))
        f = (1.0, 1.0, 0.5)
        for i in range(3):
            for j in range(3):
                p = i + j
                D[i, j] = f[i] * f[j] * (-(s ** (p + 1))) / (p + 1)
        return 2 * a0 * D + C.T @ C

    def rule(lo, hi):
        return 0.5 * (hi - lo) * gn + 0.5 * (hi + lo), 0.5 * (hi - lo) * gw

    outer = [(s0, min(s1, T))] + ([(s1, T)] if s1 < T else [])
    tot = np.zeros(3)
    for lo, hi in outer:
        if hi <= lo:
            continue
        for t, wt in zip(*rule(lo, hi)):
            tps, wps = rule(s0, min(t, s1))
            mats = [A(t, tp) for tp in tps]
            for i, (t1, w1) in enumerate(zip(tps, wps)):
                for j, (t2, w2) in enumerate(zip(tps, wps)):
                    M = mats[i] + mats[j]
                    inv00 = np.linalg.inv(M)[0, 0]
                    base = (wt * w1 * w2 * math.exp(-lam * (2 * t - t1 - t2))
                            * (2 * math.pi) ** 1.5 / math.sqrt(np.linalg.det(M)))
                    tot += base * np.array([1.0, inv00, 3 * inv00 * inv00])
    return lam * math.sqrt(tot[0]), math.sqrt(lam * tot[1]), math.sqrt(tot[2])


def _scaled_problem(trial: TrialFunction, a: CoefficientPath, lambdas, r: float):
    # u -> u(delta_r X) solves the problem with a(r^2 .), r^2 lam and source r^2 f(delta_r X)
    return (dilate_trial(trial, r).scaled(r * r), a.rescaled_time(r), [r * r * v for v in lambdas])


def scale_invariance_multi(trial: TrialFunction, a: CoefficientPath, lambdas: Sequence[float],
                           r: float, quad: QuadratureSpec | None = None, T: float = 0.0,
                           base: list | None = None) -> list:
    """Per-lambda ``(max entry deviation, ratio deviation)`` under dilation by ``r``.

    Entry deviations are relative to the common factor ``r^2 r^{-(2 + 9d)/2}``.
    Entries that vanish in the unscaled problem are compared absolutely.
    """
    quad = quad or QuadratureSpec()
    d = trial.d
    factor = r * r * r ** (-(2 + 9 * d) / 2)
    base = base or seminorms_multi(trial, a, lambdas, quad, T)
    st, sa, sl = _scaled_problem(trial, a, lambdas, r)
    scaled = seminorms_multi(st, sa, sl, quad, T * r ** -2)
    out = []
    for v0, v1 in zip(base, scaled):
        x0, x1 = v0.as_array(), v1.as_array()
        scale = max(float(np.max(x0)), 1e-300)
        dev = 0.0
        for e0, e1 in zip(x0, x1):
            if e0 > 1e-12 * scale:
                dev = max(dev, abs(e1 / e0 - factor) / factor)
            else:
                dev = max(dev, abs(e1 / factor - e0) / scale)
        if v0.rhs > 0 and v1.rhs > 0:
            rdev = abs(estimate_ratio(v1) - estimate_ratio(v0))
        else:
            rdev = 0.0
        out.append((dev, rdev))
    return out


def scale_invariance_check(trial: TrialFunction, a: CoefficientPath, lam: float, r: float,
                           quad: QuadratureSpec | None = None, T: float = 0.0) -> float:
    """Largest relative deviation of any entry (or of the ratio) from the scaling law."""
    dev, rdev = scale_invariance_multi(trial, a, [lam], r, quad, T)[0]
    return max(dev, rdev)


# -- constant search --------------------------------------------------------

@dataclass(frozen=True)
class TrialFamily:
    """Randomised family of trial sources, parameterised by the unit cube.

    The first three coordinates set log inverse widths shared by all packets
    (per variable group); each packet then uses ``PARAMS_PER_PACKET``
    coordinates: start time, duration, profile kind, three centres, three
    modulations (in units of the width) and three Hermite orders.
    """

    d: int = 1
    n_packets: int = 2
    start: tuple = (-1.5, -0.25)
    duration: tuple = (0.2, 1.0)
    log_inv_width: tuple = (-0.7, 0.7)
    center: float = 1.0
    modulation: float = 2.0
    max_hermite: int = 2
    bump_fraction: float = 0.5
    fixed: TrialFunction | None = None

    PARAMS_PER_PACKET = 12

    def __post_init__(self):
        if self.d != 1 and self.fixed is None:
            raise UsageError("the randomised trial family is implemented for d = 1")
        if self.n_packets < 1:
            raise UsageError("n_packets must be >= 1")
        if not 0 <= self.max_hermite <= 4:
            raise UsageError("max_hermite must lie in [0, 4]")

    @property
    def n_params(self) -> int:
        return 0 if self.fixed is not None else 3 + self.n_packets * self.PARAMS_PER_PACKET

    def build(self, p: Sequence[float]) -> TrialFunction:
        if self.fixed is not None:
            return self.fixed
        p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
        if p.size != self.n_params:
            raise UsageError(f"expected {self.n_params} parameters, got {p.size}")

        def lerp(lo_hi, u):
            return lo_hi[0] + (lo_hi[1] - lo_hi[0]) * u

        widths = tuple(math.exp(lerp(self.log_inv_width, u)) for u in p[:3])
        packets = []
        for k in range(self.n_packets):
            q = p[3 + k * self.PARAMS_PER_PACKET:3 + (k + 1) * self.PARAMS_PER_PACKET]
            s0 = lerp(self.start, q[0])
            s1 = s0 + lerp(self.duration, q[1])
            shape = "bump" if q[2] < self.bump_fraction else "indicator"
            prof = TimeProfile(s0, s1, shape, order=3)
            centers = tuple(((2 * u - 1) * self.center,) for u in q[3:6])
            mods = tuple(((2 * u - 1) * self.modulation * b,) for u, b in zip(q[6:9], widths))
            herm = tuple((min(int(u * (self.max_hermite + 1)), self.max_hermite),) for u in q[9:12])
            phase = 2 * math.pi * (k / self.n_packets)
            packets.append((prof, SpatialPacket(centers, tuple((b,) for b in widths), herm, mods),
                            complex(math.cos(phase), math.sin(phase))))
        return TrialFunction(tuple(packets))


@dataclass
class TrialRecord:
    index: int
    origin: str
    params: list
    lam: float
    vector: SeminormVector
    ratio: float
    scale_deviation: dict = field(default_factory=dict)
    interpolation_gap: float = 0.0


@dataclass
class EstimateReport:
    experiment: str
    seed: int
    config_hash: str
    lambdas: list
    records: list = field(default_factory=list)

    @property
    def n_trials(self) -> int:
        return len({r.index for r in self.records})

    @property
    def max_ratio(self) -> float:
        return max((r.ratio for r in self.records), default=0.0)

    def per_term_max(self) -> dict:
        out = {}
        for k in LHS_FIELDS:
            vals = [getattr(r.vector, k) / r.vector.rhs for r in self.records if r.vector.rhs > 0]
            out[k] = max(vals, default=0.0)
        return out

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "lambdas": list(self.lambdas),
            "n_trials": self.n_trials,
            "max_ratio": self.max_ratio,
            "per_term_max_ratio": self.per_term_max(),
            "records": [
                {"index": r.index, "origin": r.origin, "params": list(r.params), "lam": r.lam,
                 "seminorms": r.vector.as_dict(), "ratio": r.ratio,
                 "scale_deviation": r.scale_deviation,
                 "interpolation_gap": r.interpolation_gap}
                for r in self.records
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EstimateReport":
        rep = cls(data["experiment"], int(data["seed"]), data["config_hash"], list(data["lambdas"]))
        for r in data["records"]:
            rep.records.append(TrialRecord(int(r["index"]), r["origin"], list(r["params"]),
                                           float(r["lam"]), SeminormVector(**r["seminorms"]),
                                           float(r["ratio"]), dict(r["scale_deviation"]),
                                           float(r["interpolation_gap"])))
        return rep


def _draw(seed: int, index: int, n: int) -> np.ndarray:
    return np.random.default_rng([seed, index]).random(n)


def _trial_job(job):
    """Worker: seminorms for every lambda plus optional dilation checks."""
    trial, a, lambdas, quad, T, scales = job
    base = seminorms_multi(trial, a, lambdas, quad, T)
    devs = [{} for _ in lambdas]
    for r in scales:
        for li, (dev, rdev) in enumerate(scale_invariance_multi(trial, a, lambdas, r, quad, T,
                                                                base=base)):
            devs[li][repr(float(r))] = {"entries": dev, "ratio": rdev}
    return base, devs


def map_jobs(fn, jobs: list, workers: int = 1) -> list:
    """Order-preserving map, in-process or over a process pool."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


BLOCK = 4


def constant_search(family: TrialFamily, a: CoefficientPath, lambdas: Sequence[float],
                    budget: int, seed: int = 0, quad: QuadratureSpec | None = None,
                    T: float = 0.0, scales: Sequence[float] = (), jobs: int = 1,
                    warmup_blocks: int = 2, evaluate: Callable | None = None,
                    experiment: str = "estimate-constant", config_hash: str = "") -> EstimateReport:
    """Seeded random search with coordinate refinement of the best trial so far.

    Candidates come in blocks of ``BLOCK``.  After ``warmup_blocks`` purely
    random blocks, the first slot of each block perturbs one coordinate of
    the best parameters found in earlier blocks; the other slots are random
    draws, draw ``i`` using the generator seeded by ``(seed, i)``.  A block's
    candidates depend only on earlier blocks, so they can be evaluated in
    parallel, the stream does not depend on ``budget`` or ``jobs``, and the
    reported maximum is nondecreasing in ``budget``.

    ``scales`` adds a dilation check per trial; ``evaluate`` replaces the
    seminorm engine (it receives a trial, returns one vector per lambda).
    """
    if budget < 1:
        raise UsageError("budget must be >= 1")
    quad = quad or QuadratureSpec()
    lambdas = [float(v) for v in lambdas]
    report = EstimateReport(experiment, seed, config_hash, lambdas)
    n = family.n_params
    best_p, best_val = None, -math.inf
    coord, direction, step, misses = 0, 1.0, 0.25, 0
    done = 0
    block = 0
    while done < budget:
        cands = []
        for slot in range(BLOCK):
            i = block * BLOCK + slot
            if slot == 0 and n > 0 and best_p is not None and block >= warmup_blocks:
                p = best_p.copy()
                p[coord] = min(1.0, max(0.0, p[coord] + direction * step))
                cands.append((i, p, f"refine:c{coord}{'+' if direction > 0 else '-'}{step:g}"))
            else:
                cands.append((i, _draw(seed, i, n), "random"))
        cands = cands[:budget - done]
        if evaluate is not None:
            results = [(evaluate(family.build(p)), [{} for _ in lambdas]) for _, p, _ in cands]
        else:
            results = map_jobs(_trial_job, [(family.build(p), a, lambdas, quad, T, tuple(scales))
                                            for _, p, _ in cands], jobs)
        prev_best = best_val
        refined = None
        for (i, p, origin), (vectors, devs) in zip(cands, results):
            ratios = []
            for lam, v, dv in zip(lambdas, vectors, devs):
                ratio = estimate_ratio(v)
                ratios.append(ratio)
                report.records.append(TrialRecord(i, origin, [float(x) for x in p], lam, v, ratio,
                                                  dv, interpolation_gap(v)))
            val = max(ratios)
            if origin != "random":
                refined = val
            if val > best_val:
                best_p, best_val = p, val
        if refined is not None and n > 0:
            if refined > prev_best:
                misses = 0
            else:
                misses += 1
                if direction > 0:
                    direction = -1.0
                else:
                    direction = 1.0
                    coord = (coord + 1) % n
                    if coord == 0 and misses >= 2 * n:
                        step *= 0.5
                        misses = 0
        done += len(cands)
        block += 1
    return report
