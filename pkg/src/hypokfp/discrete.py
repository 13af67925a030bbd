"""Gridded operators for d = 1: cylinder maximal and sharp functions, L^p norms,
and the singular-integral fractional Laplacian.

A :class:`GridFunction` holds samples at the points ``start + i * spacing`` of
a 4-D lattice in ``(t, x, y, z)``; each sample stands for the cell of volume
``prod(spacing)`` around it.  Outside the sampled box the function takes the
constant value ``fill`` (0 for compactly supported data).

Cylinder averages run over every lattice cell whose centre lies in the open
cylinder ``Q_{r, cr}(X0)``, including cells outside the box, and divide by
the number of such cells.  Cell counts come from integer index bounds, so for
dyadic boxes and radii the membership test is exact in floating point.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import quad as _quad
from scipy.special import gamma

from .errors import ToleranceError, UsageError

__all__ = [
    "GridFunction",
    "maximal",
    "sharp",
    "cylinder_average",
    "lp_norm",
    "dyadic_radii",
    "empirical_hl_fs",
    "frac_laplacian_pointwise",
    "frac_laplacian_fourier",
    "frac_laplacian_constant",
    "standard_corpus",
]

AXES = ("t", "x", "y", "z")


@dataclass(frozen=True)
class GridFunction:
    start: tuple
    spacing: tuple
    samples: np.ndarray
    fill: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 4:
            raise UsageError("grid samples must be a 4-D array over (t, x, y, z)")
        start = tuple(float(v) for v in self.start)
        spacing = tuple(float(v) for v in self.spacing)
        if len(start) != 4 or len(spacing) != 4:
            raise UsageError("start and spacing need four entries (t, x, y, z)")
        if min(spacing) <= 0:
            raise UsageError("grid spacing must be positive")
        if not np.all(np.isfinite(samples)):
            raise UsageError("grid samples must be finite")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "fill", float(self.fill))

    @property
    def shape(self) -> tuple:
        return self.samples.shape

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def box(self) -> tuple:
        return tuple((s - h / 2, s + (n - 0.5) * h)
                     for s, h, n in zip(self.start, self.spacing, self.shape))

    def axes(self) -> list:
        return [s + h * np.arange(n) for s, h, n in zip(self.start, self.spacing, self.shape)]

    def points(self) -> np.ndarray:
        """All sample coordinates, shape ``shape + (4,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def with_samples(self, samples) -> "GridFunction":
        return GridFunction(self.start, self.spacing, samples, self.fill)

    @classmethod
    def on_box(cls, fn: Callable, box: Sequence, shape: Sequence[int],
               fill: float = 0.0) -> "GridFunction":
        """Sample ``fn(t, x, y, z)`` at the cell centres of ``box`` split into ``shape`` cells."""
        if len(box) != 4 or len(shape) != 4:
            raise UsageError("box and shape need four entries")
        spacing = tuple((hi - lo) / n for (lo, hi), n in zip(box, shape))
        start = tuple(lo + h / 2 for (lo, _), h in zip(box, spacing))
        axes = [s + h * np.arange(n) for s, h, n in zip(start, spacing, shape)]
        T, X, Y, Z = np.meshgrid(*axes, indexing="ij")
        vals = np.broadcast_to(np.asarray(fn(T, X, Y, Z), dtype=float), T.shape)
        return cls(start, spacing, np.array(vals), fill)

    # -- import / export ---------------------------------------------------
    def header(self, fmt: str) -> dict:
        return {"axes": list(AXES), "start": list(self.start), "spacing": list(self.spacing),
                "shape": list(self.shape), "fill": self.fill, "dtype": "<f8",
                "layout": "row-major", "format": fmt}

    def save(self, path, fmt: str = "binary") -> tuple:
        """Write ``<path>.json`` plus ``<path>.bin`` (little-endian float64) or ``<path>.csv``."""
        path = Path(path)
        if fmt not in ("binary", "csv"):
            raise UsageError("grid format must be 'binary' or 'csv'")
        head = path.with_suffix(".json")
        data = path.with_suffix(".bin" if fmt == "binary" else ".csv")
        head.write_text(json.dumps(self.header(fmt), indent=2) + "\n")
        flat = np.ascontiguousarray(self.samples, dtype="<f8").reshape(-1)
        if fmt == "binary":
            data.write_bytes(flat.tobytes())
        else:
            data.write_text("".join(repr(float(v)) + "\n" for v in flat))
        return head, data

    @classmethod
    def load(cls, path) -> "GridFunction":
        path = Path(path)
        head = json.loads(path.with_suffix(".json").read_text())
        if head.get("axes") != list(AXES) or head.get("layout") != "row-major":
            raise UsageError("unsupported grid header")
        shape = tuple(int(n) for n in head["shape"])
        if head["format"] == "binary":
            flat = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype="<f8")
        elif head["format"] == "csv":
            flat = np.loadtxt(path.with_suffix(".csv"), dtype=float, ndmin=1)
        else:
            raise UsageError(f"unknown grid format {head['format']!r}")
        if flat.size != math.prod(shape):
            raise UsageError("grid data size does not match the header shape")
        return cls(head["start"], head["spacing"], flat.reshape(shape).astype(float),
                   head.get("fill", 0.0))


# -- cylinder box sums --------------------------------------------------------

def _sat(values: np.ndarray) -> np.ndarray:
    """Per-time-slice 3-D summed-area table with a zero border."""
    s = np.zeros((values.shape[0],) + tuple(n + 1 for n in values.shape[1:]))
    s[:, 1:, 1:, 1:] = values.cumsum(1).cumsum(2).cumsum(3)
    return s


def _open_range(center, half):
    """Integer indices ``i`` with ``|i - center| < half``: returns ``(lo, hi)`` inclusive."""
    return np.floor(center - half) + 1, np.ceil(center + half) - 1


def _targets(f: GridFunction, points) -> tuple:
    """Continuous index coordinates and physical coordinates of the evaluation points."""
    if points is None:
        idx = np.meshgrid(*[np.arange(n, dtype=float) for n in f.shape], indexing="ij")
        coords = [s + h * i for s, h, i in zip(f.start, f.spacing, idx)]
        return idx, coords, f.shape
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != 4:
        raise UsageError("evaluation points must have shape (..., 4)")
    coords = [pts[..., k] for k in range(4)]
    idx = [(c - s) / h for c, s, h in zip(coords, f.start, f.spacing)]
    return idx, coords, pts.shape[:-1]


class _CylinderSums:
    """Box sums of several fields over the lattice cells of ``Q_{r, cR}(X0)``."""

    def __init__(self, f: GridFunction, fields: list, points):
        self.f = f
        self.tables = [_sat(v) for v in fields]
        self.idx, self.coords, self.shape = _targets(f, points)

    def __call__(self, r: float, c: float = 1.0):
        f = self.f
        nt, nx, ny, nz = f.shape
        dt, dx, dy, dz = f.spacing
        it, ix, iy, iz = self.idx
        t0, x0, y0, z0 = self.coords
        # time cells strictly inside (t0 - r^2, t0)
        t_lo, t_hi = np.floor(it - r * r / dt) + 1, np.ceil(it) - 1
        x_lo, x_hi = _open_range(ix, r / dx)
        nxc = x_hi - x_lo + 1
        xa = np.clip(x_lo, 0, nx).astype(np.int64)
        xb = np.clip(x_hi + 1, 0, nx).astype(np.int64)
        xb = np.maximum(xb, xa)
        count = np.zeros(self.shape)
        sums = [np.zeros(self.shape) for _ in self.tables]
        k_max = int(np.max(t_hi - t_lo)) + 1 if np.size(t_hi) else 0
        for k in range(max(k_max, 0)):
            ti = t_hi - k
            live = ti >= t_lo
            if not np.any(live):
                break
            s = (ti - it) * dt
            yc = (y0 - s * x0 - f.start[2]) / dy
            zc = (z0 - s * y0 + 0.5 * s * s * x0 - f.start[3]) / dz
            y_lo, y_hi = _open_range(yc, r ** 3 / dy)
            z_lo, z_hi = _open_range(zc, (c * r) ** 5 / dz)
            count += np.where(live, nxc * (y_hi - y_lo + 1) * (z_hi - z_lo + 1), 0.0)
            inside = live & (ti >= 0) & (ti < nt)
            if not np.any(inside):
                continue
            tt = np.where(inside, ti, 0).astype(np.int64)
            ya = np.clip(y_lo, 0, ny).astype(np.int64)
            yb = np.maximum(np.clip(y_hi + 1, 0, ny).astype(np.int64), ya)
            za = np.clip(z_lo, 0, nz).astype(np.int64)
            zb = np.maximum(np.clip(z_hi + 1, 0, nz).astype(np.int64), za)
            for S, acc in zip(self.tables, sums):
                box = (S[tt, xb, yb, zb] - S[tt, xa, yb, zb] - S[tt, xb, ya, zb]
                       - S[tt, xb, yb, za] + S[tt, xa, ya, zb] + S[tt, xa, yb, za]
                       + S[tt, xb, ya, za] - S[tt, xa, ya, za])
                acc += np.where(inside, box, 0.0)
        return count, sums


def _cell_counts(f: GridFunction, points, r: float, c: float):
    """``(lattice count, in-box count)`` for every evaluation point."""
    sums = _CylinderSums(f, [np.ones(f.shape)], points)
    count, (inside,) = sums(r, c)
    return count, inside


def cylinder_average(f: GridFunction, r: float, c: float = 1.0, points=None,
                     absolute: bool = True) -> np.ndarray:
    """Lattice average of ``|f|`` (or ``f``) over ``Q_{r, cr}(X0)`` for each point."""
    vals = np.abs(f.samples) if absolute else f.samples
    fill = abs(f.fill) if absolute else f.fill
    sums = _CylinderSums(f, [vals, np.ones(f.shape)], points)
    count, (total, inside) = sums(r, c)
    total = total + (count - inside) * fill
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(count > 0, total / np.where(count > 0, count, 1), 0.0)


def _check_radii(radii) -> list:
    radii = [float(r) for r in radii]
    if not radii or min(radii) <= 0:
        raise UsageError("radii must be a nonempty set of positive numbers")
    return radii


def _wrap(f: GridFunction, points, values):
    return f.with_samples(values) if points is None else values


def maximal(f: GridFunction, c: float = 1.0, radii: Sequence[float] = (1.0,), points=None):
    """``max_r`` of the lattice average of ``|f|`` over ``Q_{r, cr}(X0)``.

    With ``points=None`` the result is a :class:`GridFunction` on the same
    lattice; otherwise an array over the given ``(..., 4)`` points.
    """
    if c < 1:
        raise UsageError("maximal function needs c >= 1")
    best = None
    for r in _check_radii(radii):
        avg = cylinder_average(f, r, c, points)
        best = avg if best is None else np.maximum(best, avg)
    return _wrap(f, points, best)


def sharp(f: GridFunction, radii: Sequence[float] = (1.0,), points=None,
          max_levels: int = 16, brute_force_limit: int = 4096):
    """``max_r`` of the lattice mean oscillation over ``Q_r(X0)``.

    For data with at most ``max_levels`` distinct values the oscillation is
    assembled exactly from per-level cell counts; otherwise each cylinder is
    enumerated directly, which is only allowed on small grids.
    """
    radii = _check_radii(radii)
    levels = np.unique(f.samples)
    if levels.size <= max_levels:
        fields = [(f.samples == v).astype(float) for v in levels]
        sums = _CylinderSums(f, fields + [np.ones(f.shape)], points)
        best = None
        for r in radii:
            count, parts = sums(r, 1.0)
            inside = parts[-1]
            outside = count - inside
            safe = np.where(count > 0, count, 1)
            mean = (sum(v * n for v, n in zip(levels, parts[:-1])) + outside * f.fill) / safe
            dev = sum(np.abs(v - mean) * n for v, n in zip(levels, parts[:-1]))
            dev = (dev + outside * np.abs(f.fill - mean)) / safe
            dev = np.where(count > 0, dev, 0.0)
            best = dev if best is None else np.maximum(best, dev)
        return _wrap(f, points, best)
    n_points = math.prod(f.shape) if points is None else int(np.prod(np.shape(points)[:-1]))
    if n_points * f.samples.size > brute_force_limit * 4096:
        raise UsageError("sharp function of many-valued data is limited to small grids")
    return _wrap(f, points, _sharp_direct(f, radii, points))


def _sharp_direct(f: GridFunction, radii, points) -> np.ndarray:
    idx, coords, shape = _targets(f, points)
    T, X, Y, Z = np.meshgrid(*f.axes(), indexing="ij")
    dt, dx, dy, dz = f.spacing
    flat = [np.ravel(a) for a in coords]
    out = np.zeros(int(np.prod(shape)))
    for p in range(out.size):
        t0, x0, y0, z0 = (a[p] for a in flat)
        for r in radii:
            s = T - t0
            m = ((s < 0) & (s > -r * r) & (np.abs(X - x0) < r)
                 & (np.abs(Y - (y0 - s * x0)) < r ** 3)
                 & (np.abs(Z - (z0 - s * y0 + 0.5 * s * s * x0)) < r ** 5))
            count, _ = _cell_counts(f, np.array([[t0, x0, y0, z0]]), r, 1.0)
            n = float(count[0])
            if n == 0:
                continue
            inside = f.samples[m]
            outside = n - inside.size
            mean = (inside.sum() + outside * f.fill) / n
            dev = (np.abs(inside - mean).sum() + outside * abs(f.fill - mean)) / n
            out[p] = max(out[p], dev)
    return out.reshape(shape)


def lp_norm(f, p: float) -> float:
    """Riemann-sum ``L^p`` norm over the sampled box."""
    if not 1 < p < math.inf:
        raise UsageError("p must lie in (1, inf)")
    if isinstance(f, GridFunction):
        vals, vol = f.samples, f.cell_volume
    else:
        raise UsageError("lp_norm takes a GridFunction")
    return float(np.sum(np.abs(vals) ** p) * vol) ** (1.0 / p)


def dyadic_radii(f: GridFunction, min_cells: int = 2, r_max: float | None = None) -> list:
    """Powers of two ``r`` resolved by ``f``'s lattice and not exceeding the box.

    Resolved means the cylinder spans at least ``min_cells`` spacings along
    every axis (``r^2`` in t, ``r`` in x, ``r^3`` in y, ``r^5`` in z); by
    default ``r^2`` may not exceed the time extent of the box.
    """
    dt, dx, dy, dz = f.spacing
    lo = max(math.sqrt(min_cells * dt), min_cells * dx / 2, (min_cells * dy / 2) ** (1 / 3),
             (min_cells * dz / 2) ** 0.2)
    if r_max is None:
        r_max = math.sqrt(f.shape[0] * dt)
    k = math.ceil(math.log2(lo) - 1e-12)
    out = []
    while 2.0 ** k <= r_max * (1 + 1e-12):
        out.append(2.0 ** k)
        k += 1
    return out


def empirical_hl_fs(corpus: Mapping[str, GridFunction], p_grid: Sequence[float] = (2.0,),
                    c: float = 1.0, radii: Sequence[float] | None = None) -> dict:
    """Empirical ``||Mf||_p / ||f||_p`` and ``||f||_p / ||f#||_p`` over a corpus.

    Rows whose denominator vanishes are flagged and left out of the maxima.
    """
    if not corpus:
        raise UsageError("corpus must be nonempty")
    rows = []
    for name, f in corpus.items():
        rr = radii if radii is not None else dyadic_radii(f)
        mf = maximal(f, c, rr)
        fs = sharp(f, rr)
        for p in p_grid:
            nf, nm, ns = lp_norm(f, p), lp_norm(mf, p), lp_norm(fs, p)
            row = {"name": name, "p": float(p), "norm_f": nf, "norm_maximal": nm, "norm_sharp": ns,
                   "hl_ratio": None, "fs_ratio": None, "flags": []}
            if nf > 0:
                row["hl_ratio"] = nm / nf
            else:
                row["flags"].append("f vanishes")
            if ns > 0:
                row["fs_ratio"] = nf / ns
            else:
                row["flags"].append("sharp function vanishes")
            for k in ("hl_ratio", "fs_ratio"):
                if row[k] is not None and not math.isfinite(row[k]):
                    raise ToleranceError(f"{k} for {name} is not finite")
            rows.append(row)
    hl = [r["hl_ratio"] for r in rows if r["hl_ratio"] is not None]
    fs = [r["fs_ratio"] for r in rows if r["fs_ratio"] is not None]
    return {"rows": rows, "max_hl_ratio": max(hl, default=None),
            "max_fs_ratio": max(fs, default=None)}


def standard_corpus(n: int = 16, box=((-4.0, 0.0), (-4.0, 4.0), (-4.0, 4.0), (-4.0, 4.0))) -> dict:
    """Constant, indicator of ``Q_1(X1)``, a signed two-cylinder function and
    ``sign(x)`` times an indicator, sampled on ``n^4`` cells of ``box``."""
    shape = (n, n, n, n)

    def cyl(t0, x0, y0, z0, r=1.0):
        def ind(t, x, y, z):
            s = t - t0
            return ((s < 0) & (s > -r * r) & (np.abs(x - x0) < r)
                    & (np.abs(y - (y0 - s * x0)) < r ** 3)
                    & (np.abs(z - (z0 - s * y0 + 0.5 * s * s * x0)) < r ** 5)).astype(float)
        return ind

    q1 = cyl(-1.0, 0.0, 0.0, 0.0)
    qa, qb = cyl(-2.0, -1.5, 0.0, 0.0), cyl(-0.5, 1.5, 0.0, 0.0)
    return {
        "constant": GridFunction.on_box(lambda t, x, y, z: np.ones_like(t), box, shape, fill=1.0),
        "indicator_q1": GridFunction.on_box(q1, box, shape),
        "signed_pair": GridFunction.on_box(lambda *a: qa(*a) - qb(*a), box, shape),
        "sign_x_indicator": GridFunction.on_box(
            lambda t, x, y, z: np.sign(x) * (np.abs(x) < 2) * (t > -3) * (np.abs(y) < 2)
            * (np.abs(z) < 2), box, shape),
    }


# -- fractional Laplacian in one variable -----------------------------------------

def frac_laplacian_constant(s: float) -> float:
    """``c_s`` making ``c_s int (u(z) - u(z - h)) / |h|^{1+2s} dh`` the multiplier ``|zeta|^{2s}``."""
    if not 0 < s < 1:
        raise UsageError("s must lie in (0, 1)")
    return 4 ** s * gamma(0.5 + s) / (math.sqrt(math.pi) * abs(gamma(-s)))


def frac_laplacian_pointwise(f: Callable, s: float, z0: float, support: float = 10.0,
                             rel_tol: float = 1e-10, limit: int = 200) -> float:
    """``(-d^2/dz^2)^s f (z0)`` by the symmetric difference integral.

    ``f`` should be bounded and Lipschitz.  The integral
    ``int_0^inf (2 f(z0) - f(z0 + h) - f(z0 - h)) h^{-1-2s} dh`` is split at
    ``H = support + |z0|``, where the head carries the singularity and the
    tail the slow algebraic decay; both pieces are adaptive.
    """
    if not 0 < s < 0.5:
        raise UsageError("s must lie in (0, 1/2)")
    c = frac_laplacian_constant(s)
    f0 = float(f(z0))
    H = support + abs(z0)

    def g(h):
        return (2 * f0 - float(f(z0 + h)) - float(f(z0 - h))) * h ** (-1 - 2 * s)

    head, err = _quad(g, 0.0, H, epsrel=rel_tol, epsabs=0.0, limit=limit)
    if not math.isfinite(head) or err > max(1e-6 * abs(head), 1e-10):
        raise ToleranceError(f"fractional Laplacian quadrature did not converge (err {err:.2e})")
    tail, terr = _quad(g, H, math.inf, epsrel=rel_tol, epsabs=0.0, limit=limit)
    if not math.isfinite(tail) or terr > max(1e-6 * abs(tail), 1e-10):
        raise ToleranceError(f"fractional Laplacian tail did not converge (err {terr:.2e})")
    return c * (head + tail)


def frac_laplacian_fourier(f_hat: Callable, s: float, z0: float, cutoff: float = 60.0) -> float:
    """Inverse transform of ``|zeta|^{2s} f_hat(zeta)`` at ``z0`` for real, even ``f``."""
    val, _ = _quad(lambda k: k ** (2 * s) * float(f_hat(k)) * math.cos(k * z0), 0.0, cutoff,
                   epsrel=1e-12, epsabs=0.0, limit=400)
    return val / math.pi
