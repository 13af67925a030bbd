"""Experiment configuration: an INI file with one section per suite.

Every key has a default, so an empty (or absent) file is a valid config.
Unknown sections or keys, malformed values and out-of-range settings all
raise :class:`~hypokfp.errors.UsageError` before any suite runs.

Grammar (values are comma-separated lists where plural)::

    [general]
    d = 1
    delta = 1/2
    seed = 0
    tolerance =                 # optional global override of check tolerances

    [coefficients]
    breakpoints = -3/5, -3/10, 1/10
    pieces = 1; 8/5              # ';' between pieces, ' / ' between matrix rows
                                 # (d = 2 example: 1 0 / 0 1; 3/2 1/4 / 1/4 3/2)

    [quadrature]                 # accurate engine settings
    freq_nodes = 40, 32, 24
    time_nodes = 8
    duhamel_nodes = 12
    truncation = 6
    rel_tol = 1e-10

    [estimate-constant]
    family = random              # or "fixed": packets come from [packet.*]
    ...

    [packet.NAME]                # one per packet of a fixed trial
    time = -1, 0
    shape = indicator            # or bump
    order = 3
    center = 0; 0; 0             # x; y; z groups, d numbers each
    inv_width = 1; 1; 1
    hermite = 0; 0; 0
    modulation = 0; 0; 0
    coefficient = 1              # Python complex literal, e.g. 0.5+0.5j

Numbers are read exactly (``Fraction``) where the suites need exact input;
``1/2`` and ``0.5`` are both accepted.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import UsageError
from .solver import QuadratureSpec
from .symbols import CoefficientPath
from .trial import SpatialPacket, TimeProfile, TrialFunction

__all__ = ["SUITES", "DEFAULTS", "ExperimentConfig", "load_config", "parse_config"]

SUITES = ("check-geometry", "solve", "estimate-constant", "poincare", "kernel-check",
          "multiplier", "maximal-sharp")

DEFAULTS = {
    "general": {"d": "1", "delta": "1/2", "seed": "0", "tolerance": ""},
    "coefficients": {"breakpoints": "-3/5, -3/10, 1/10", "pieces": "1; 8/5"},
    "quadrature": {"freq_nodes": "40, 32, 24", "time_nodes": "8", "duhamel_nodes": "12",
                   "truncation": "6", "rel_tol": "1e-10", "max_subdivisions": "200",
                   "parseval_nodes": "160"},
    "check-geometry": {"samples": "1000", "dims": "1, 2, 3", "polynomials": "20",
                       "radii": "1/2, 2, 3", "tolerance": "1e-12",
                       "conjugation_tolerance": "1e-10"},
    "solve": {"lambda": "1", "t": "-1/4", "point": "1, 1/2, 1/2",
              "steps": "0.02, 0.01, 0.005, 0.0025", "ode_xi": "0.5, 1, 2",
              "ode_times": "-0.45, -0.1, 0.3", "tolerance": "1e-8",
              "closed_form_tolerance": "1e-10", "residual_tolerance": "1e-5"},
    "estimate-constant": {"lambdas": "0, 0.1, 1, 10", "budget": "100", "scales": "1/2, 2, 4",
                          "family": "random", "n_packets": "2", "max_hermite": "2",
                          "freq_nodes": "16, 12, 10", "time_nodes": "4", "duhamel_nodes": "6",
                          "T": "0", "tolerance": "1e-5", "interpolation_slack": "1e-8",
                          "reference_tolerance": "1e-4"},
    "poincare": {"max_weight": "10", "n_random": "200", "t_start": "-4"},
    "kernel-check": {"dims": "1, 2"},
    "multiplier": {"lo": "1e-6", "hi": "1e6", "per_decade": "100", "exponent": "3",
                   "claimed_exponent": "2", "k": "1/2, 2, 4, 10", "flag_k": "4",
                   "flag_threshold": "0.1", "tolerance": "1e-12", "sup_tolerance": "1e-9"},
    "maximal-sharp": {"n": "16", "refine": "32", "p": "2, 4", "c": "1", "frac_s": "0.2, 0.3",
                      "frac_points": "0, 0.7, 2", "stability": "0.1",
                      "frac_tolerance": "1e-3"},
}

PACKET_DEFAULTS = {"time": "-1, 0", "shape": "indicator", "order": "3", "center": "",
                   "inv_width": "", "hermite": "", "modulation": "", "coefficient": "1"}


def _frac(text: str, key: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"{key}: cannot read {text!r} as a number") from None


def _list(text: str, key: str, conv=None) -> list:
    conv = conv or (lambda s: _frac(s, key))
    parts = [p.strip() for p in text.replace(";", ",").split(",") if p.strip()]
    return [conv(p) for p in parts]


def _int(text: str, key: str) -> int:
    v = _frac(text, key)
    if v.denominator != 1:
        raise UsageError(f"{key}: expected an integer, got {text!r}")
    return int(v)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration; ``sections`` keeps the merged raw strings."""

    sections: dict
    d: int
    delta: Fraction
    seed: int
    tolerance: float | None
    coefficients: CoefficientPath
    quadrature: QuadratureSpec
    packets: tuple = field(default=())

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.sections, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def raw(self, section: str, key: str) -> str:
        return self.sections[section][key]

    def number(self, section: str, key: str) -> Fraction:
        return _frac(self.raw(section, key), f"[{section}] {key}")

    def real(self, section: str, key: str) -> float:
        return float(self.number(section, key))

    def integer(self, section: str, key: str) -> int:
        return _int(self.raw(section, key), f"[{section}] {key}")

    def numbers(self, section: str, key: str) -> list:
        return _list(self.raw(section, key), f"[{section}] {key}")

    def reals(self, section: str, key: str) -> list:
        return [float(v) for v in self.numbers(section, key)]

    def integers(self, section: str, key: str) -> list:
        return [_int(str(v), f"[{section}] {key}") for v in self.numbers(section, key)]

    def tol(self, section: str, key: str = "tolerance") -> float:
        """Suite tolerance, unless the global ``tolerance`` overrides it."""
        return self.tolerance if self.tolerance is not None else self.real(section, key)

    def with_overrides(self, seed: int | None = None, tolerance: float | None = None):
        sections = {k: dict(v) for k, v in self.sections.items()}
        if seed is not None:
            sections["general"]["seed"] = str(seed)
        if tolerance is not None:
            sections["general"]["tolerance"] = repr(float(tolerance))
        return build_config(sections)


def _coefficients(sec: dict, d: int, delta: Fraction) -> CoefficientPath:
    bps = _list(sec["breakpoints"], "[coefficients] breakpoints")
    pieces = []
    for k, chunk in enumerate(p for p in sec["pieces"].split(";") if p.strip()):
        rows = [r.split() for r in chunk.replace(",", " ").split(" / ")]
        key = f"[coefficients] piece {k}"
        if d == 1:
            if len(rows) != 1 or len(rows[0]) != 1:
                raise UsageError(f"{key}: expected a single number for d = 1")
            pieces.append(_frac(rows[0][0], key))
        else:
            if len(rows) != d or any(len(r) != d for r in rows):
                raise UsageError(f"{key}: expected {d} rows of {d} numbers separated by ' / '")
            pieces.append(tuple(tuple(_frac(v, key) for v in r) for r in rows))
    return CoefficientPath(tuple(bps), tuple(pieces), float(delta), d)


def _quadrature(sec: dict) -> QuadratureSpec:
    def g(k):
        return f"[quadrature] {k}"

    return QuadratureSpec(
        freq_nodes=tuple(_int(str(v), g("freq_nodes")) for v in _list(sec["freq_nodes"], g("freq_nodes"))),
        time_nodes=_int(sec["time_nodes"], g("time_nodes")),
        duhamel_nodes=_int(sec["duhamel_nodes"], g("duhamel_nodes")),
        truncation=float(_frac(sec["truncation"], g("truncation"))),
        rel_tol=float(_frac(sec["rel_tol"], g("rel_tol"))),
        max_subdivisions=_int(sec["max_subdivisions"], g("max_subdivisions")),
        parseval_nodes=_int(sec["parseval_nodes"], g("parseval_nodes")),
    )


def _groups(text: str, d: int, key: str) -> tuple:
    groups = [g for g in text.split(";")] if ";" in text else None
    if groups is None:
        vals = _list(text, key)
        if d != 1 or len(vals) != 3:
            raise UsageError(f"{key}: expected three ';'-separated groups of {d} numbers")
        return tuple((float(v),) for v in vals)
    if len(groups) != 3:
        raise UsageError(f"{key}: expected three ';'-separated groups")
    out = []
    for g in groups:
        vals = [float(_frac(v, key)) for v in g.replace(",", " ").split()]
        if len(vals) != d:
            raise UsageError(f"{key}: each group needs {d} numbers")
        out.append(tuple(vals))
    return tuple(out)


def _packet(name: str, sec: dict, d: int) -> tuple:
    key = f"[packet.{name}]"
    time = _list(sec["time"], f"{key} time")
    if len(time) != 2:
        raise UsageError(f"{key} time: expected two numbers")
    try:
        coeff = complex(sec["coefficient"].replace(" ", ""))
    except ValueError:
        raise UsageError(f"{key} coefficient: cannot read {sec['coefficient']!r}") from None
    zeros = "; ".join([" ".join(["0"] * d)] * 3)
    ones = "; ".join([" ".join(["1"] * d)] * 3)
    herm = _groups(sec["hermite"] or zeros, d, f"{key} hermite")
    if any(h != int(h) or h < 0 for g in herm for h in g):
        raise UsageError(f"{key} hermite: orders must be non-negative integers")
    try:
        prof = TimeProfile(float(time[0]), float(time[1]), sec["shape"].strip(),
                           order=_int(sec["order"], f"{key} order"))
        packet = SpatialPacket(_groups(sec["center"] or zeros, d, f"{key} center"),
                               _groups(sec["inv_width"] or ones, d, f"{key} inv_width"),
                               tuple(tuple(int(h) for h in g) for g in herm),
                               _groups(sec["modulation"] or zeros, d, f"{key} modulation"))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{key}: {exc}") from None
    return prof, packet, coeff


def build_config(sections: dict) -> ExperimentConfig:
    """Validate merged raw sections and build the typed config."""
    g = sections["general"]
    d = _int(g["d"], "[general] d")
    if d < 1:
        raise UsageError("[general] d must be >= 1")
    delta = _frac(g["delta"], "[general] delta")
    if not 0 < delta < 1:
        raise UsageError("[general] delta must lie in (0, 1)")
    seed = _int(g["seed"], "[general] seed")
    if not 0 <= seed < 2 ** 64:
        raise UsageError("[general] seed must be an unsigned 64-bit integer")
    tolerance = None
    if g["tolerance"].strip():
        tolerance = float(_frac(g["tolerance"], "[general] tolerance"))
        if not (tolerance > 0 and math.isfinite(tolerance)):
            raise UsageError("[general] tolerance must be positive")
    coeffs = _coefficients(sections["coefficients"], d, delta)
    quad = _quadrature(sections["quadrature"])
    packets = tuple(_packet(name[len("packet."):], sec, d)
                    for name, sec in sections.items() if name.startswith("packet."))
    cfg = ExperimentConfig(sections, d, delta, seed, tolerance, coeffs, quad, packets)
    _validate_suites(cfg)
    return cfg


def _validate_suites(cfg: ExperimentConfig) -> None:
    """Parse every suite setting once so that errors surface before any output."""
    for section, keys in DEFAULTS.items():
        if section in ("general", "coefficients", "quadrature"):
            continue
        for key in keys:
            raw = cfg.raw(section, key)
            if key == "family":
                if raw.strip() not in ("random", "fixed"):
                    raise UsageError("[estimate-constant] family must be 'random' or 'fixed'")
                continue
            vals = cfg.numbers(section, key)
            if not vals:
                raise UsageError(f"[{section}] {key} must not be empty")
    ec = "estimate-constant"
    if cfg.integer(ec, "budget") < 1:
        raise UsageError(f"[{ec}] budget must be >= 1")
    if any(v < 0 for v in cfg.numbers(ec, "lambdas")):
        raise UsageError(f"[{ec}] lambdas must be >= 0")
    if any(v <= 0 for v in cfg.numbers(ec, "scales")):
        raise UsageError(f"[{ec}] scales must be positive")
    if cfg.raw(ec, "family").strip() == "fixed":
        if not cfg.packets:
            raise UsageError(f"[{ec}] family = fixed needs at least one [packet.NAME] section")
    elif cfg.d != 1:
        raise UsageError(f"[{ec}] the random trial family needs d = 1; use family = fixed")
    search_quadrature(cfg)
    for n in cfg.integers("maximal-sharp", "n") + cfg.integers("maximal-sharp", "refine"):
        if n != 0 and n < 4:
            raise UsageError("[maximal-sharp] grid sizes must be >= 4 (refine = 0 disables)")
    if cfg.integer("poincare", "max_weight") < 0 or cfg.integer("poincare", "n_random") < 0:
        raise UsageError("[poincare] max_weight and n_random must be >= 0")
    if cfg.number("poincare", "t_start") > -4:
        raise UsageError("[poincare] t_start must be <= -4 so the evolution covers Q_2")
    if any(v < 1 for v in cfg.integers("kernel-check", "dims")):
        raise UsageError("[kernel-check] dims must be >= 1")
    if any(v < 1 for v in cfg.integers("check-geometry", "dims")):
        raise UsageError("[check-geometry] dims must be >= 1")
    if cfg.integer("check-geometry", "samples") < 1:
        raise UsageError("[check-geometry] samples must be >= 1")
    if len(cfg.numbers("solve", "point")) != 3:
        raise UsageError("[solve] point needs three numbers (xi, eta, zeta)")
    if cfg.real("solve", "lambda") < 0:
        raise UsageError("[solve] lambda must be >= 0")
    m = "multiplier"
    if not 0 < cfg.real(m, "lo") < cfg.real(m, "hi"):
        raise UsageError(f"[{m}] need 0 < lo < hi")


def search_quadrature(cfg: ExperimentConfig) -> QuadratureSpec:
    """The (lighter) quadrature used by the constant search."""
    ec = "estimate-constant"
    base = cfg.quadrature
    return QuadratureSpec(tuple(cfg.integers(ec, "freq_nodes")), cfg.integer(ec, "time_nodes"),
                          cfg.integer(ec, "duhamel_nodes"), base.truncation, base.radii,
                          base.rel_tol, base.max_subdivisions, base.parseval_nodes)


def fixed_trial(cfg: ExperimentConfig) -> TrialFunction:
    return TrialFunction(tuple(cfg.packets))


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                       comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise UsageError(f"malformed config: {exc}") from None
    sections = {k: dict(v) for k, v in DEFAULTS.items()}
    for name in parser.sections():
        if name.startswith("packet."):
            base = dict(PACKET_DEFAULTS)
        elif name in DEFAULTS:
            base = sections[name]
        else:
            raise UsageError(f"unknown config section [{name}]")
        for key, value in parser.items(name):
            if key not in base:
                raise UsageError(f"unknown key {key!r} in [{name}]")
            base[key] = value.strip()
        sections[name] = base
    return build_config(sections)


def load_config(path=None) -> ExperimentConfig:
    if path is None:
        return parse_config("")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file {str(p)!r} does not exist")
    return parse_config(p.read_text())
