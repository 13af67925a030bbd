"""Suite reports: checks, summary values and a flat table, as JSON and CSV.

Floats are written in shortest round-trip form (``repr``) and ``Fraction``
values as ``"p/q"`` strings, so identical inputs give byte-identical files
and JSON reports parse back losslessly.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

SCHEMA_VERSION = "hypokfp-report-v1"


def report_schema_version() -> str:
    return SCHEMA_VERSION


@dataclass
class Check:
    label: str
    passed: bool
    value: object = None
    bound: object = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {"label": self.label, "passed": bool(self.passed), "value": _plain(self.value),
                "bound": _plain(self.bound), "detail": self.detail}


@dataclass
class SuiteReport:
    suite: str
    config_hash: str
    seed: int
    checks: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, label: str, passed: bool, value=None, bound=None, detail: str = "") -> bool:
        self.checks.append(Check(label, bool(passed), value, bound, detail))
        return bool(passed)

    def add_row(self, **values) -> None:
        for k in values:
            if k not in self.columns:
                self.columns.append(k)
        self.rows.append(values)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "suite": self.suite,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "status": "pass" if self.passed else "fail",
            "checks": [c.to_dict() for c in self.checks],
            "summary": _plain(self.summary),
            "columns": list(self.columns),
            "rows": [[_plain(r.get(c)) for c in self.columns] for r in self.rows],
            "timing": _plain(self.timing),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_cell(r.get(c)) for c in self.columns])
        return buf.getvalue()

    def write(self, out_dir) -> tuple:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        jp, cp = out / f"{self.suite}.json", out / f"{self.suite}.csv"
        jp.write_text(self.to_json())
        cp.write_text(self.to_csv())
        return jp, cp

    @classmethod
    def from_dict(cls, data: dict) -> "SuiteReport":
        if data.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {data.get('schema')!r}")
        rep = cls(data["suite"], data["config_hash"], int(data["seed"]))
        rep.checks = [Check(c["label"], c["passed"], c["value"], c["bound"], c["detail"])
                      for c in data["checks"]]
        rep.summary = data["summary"]
        rep.columns = list(data["columns"])
        rep.rows = [dict(zip(rep.columns, r)) for r in data["rows"]]
        rep.timing = data.get("timing", {})
        return rep

    @classmethod
    def from_json(cls, text: str) -> "SuiteReport":
        return cls.from_dict(json.loads(text))


def _plain(v):
    """JSON-ready copy: Fractions become ``"p/q"`` strings, numpy scalars Python numbers."""
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if hasattr(v, "item") and not isinstance(v, (str, bytes)):
        return v.item()
    return v


def _cell(v) -> str:
    v = _plain(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ";".join(_cell(x) for x in v)
    return str(v)
