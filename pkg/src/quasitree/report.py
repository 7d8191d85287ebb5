"""Check results and the machine-readable report they roll up into."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

PASS = "pass"
FAIL = "fail"
FLAG = "flag"
INFO = "info"


def _clean(value):
    """Make numpy scalars, tuples and non-finite floats JSON friendly."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


@dataclass
class Check:
    """One verified property.

    ``status`` is one of pass/fail/flag/info.  Flags record a measured slack
    beyond its advisory bound and never make a run fail.
    """

    tag: str
    status: str
    checked: int = 0
    violations: int = 0
    measured: dict = field(default_factory=dict)
    example: Any = None
    note: str = ""

    @property
    def failed(self):
        return self.status == FAIL

    def to_dict(self):
        out = {
            "tag": self.tag,
            "status": self.status,
            "checked": int(self.checked),
            "violations": int(self.violations),
            "measured": _clean(self.measured),
        }
        if self.example is not None:
            out["example"] = _clean(self.example)
        if self.note:
            out["note"] = self.note
        return out

    def line(self):
        extra = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"[{self.status.upper():4}] {self.tag}: {self.violations}/{self.checked}" + (
            f" ({extra})" if extra else ""
        )


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def status_from(violations, flagged=False):
    if violations:
        return FAIL
    return FLAG if flagged else PASS


class Report:
    """Ordered collection of checks for one suite run."""

    def __init__(self, suite, provenance=None):
        self.suite = suite
        self.provenance = dict(provenance or {})
        self.checks: list[Check] = []
        self.data: dict = {}

    def add(self, check):
        self.checks.append(check)
        return check

    def extend(self, checks):
        for c in checks:
            self.add(c)

    @property
    def failed(self):
        return any(c.failed for c in self.checks)

    def to_dict(self):
        return {
            "suite": self.suite,
            "provenance": _clean(self.provenance),
            "checks": [c.to_dict() for c in self.checks],
            "data": _clean(self.data),
            "failed": self.failed,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def lines(self):
        return [c.line() for c in self.checks]
