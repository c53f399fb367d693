"""Residual reports and record serialization."""

from dataclasses import dataclass, field
import csv
import io
import json
import math

import numpy as np


@dataclass
class Check:
    name: str
    claim: str
    residual: float
    tol: float
    # "<=": residual must not exceed tol; ">=": residual is a lower-bound quantity
    sense: str = "<="

    @property
    def passed(self):
        if not math.isfinite(self.residual):
            return False
        return self.residual <= self.tol if self.sense == "<=" else self.residual >= self.tol

    def record(self):
        return {
            "check": self.name,
            "claim": self.claim,
            "residual": self.residual,
            "tol": self.tol,
            "sense": self.sense,
            "pass": self.passed,
        }


@dataclass
class ResidualReport:
    meta: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    def add(self, name, claim, residual, tol, sense="<="):
        self.checks.append(Check(name, claim, float(residual), float(tol), sense))
        return self.checks[-1]

    def extend(self, other):
        self.checks.extend(other.checks)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def override_tol(self, tol):
        for c in self.checks:
            if c.sense == "<=":
                c.tol = float(tol)

    def records(self):
        return [{**self.meta, **c.record()} for c in self.checks]

    def summary(self):
        lines = [f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.residual:.3e} {c.sense} {c.tol:.1e}" for c in self.checks]
        n_ok = sum(c.passed for c in self.checks)
        lines.append(f"{n_ok}/{len(self.checks)} checks passed")
        return "\n".join(lines)


def _plain(v):
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    return v


def to_jsonl(records):
    return "".join(json.dumps(_plain(r), sort_keys=False) + "\n" for r in records)


def _flatten(rec):
    out = {}
    for k, v in _plain(rec).items():
        if isinstance(v, list):
            flat = np.ravel(np.asarray(v, dtype=object))
            for i, x in enumerate(flat):
                out[f"{k}_{i}"] = x
        elif isinstance(v, dict):
            for kk, x in v.items():
                out[f"{k}.{kk}"] = x
        else:
            out[k] = v
    return out


def to_csv(records):
    rows = [_flatten(r) for r in records]
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()
