"""Structured pass/fail records for identity checks."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": _jsonable(float(value.real)), "im": _jsonable(float(value.imag))}
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return float(f"{v:.12g}")
    return value


@dataclass
class Report:
    """Outcome of a single numerical identity check.

    ``residuals`` and ``constants`` hold the measured numbers, ``params`` the
    inputs and tolerances, ``grid`` the discretisation that produced them.
    """

    check: str
    passed: bool
    residuals: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    operator_spec: Any = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "check": self.check,
            "operator_spec": self.operator_spec,
            "params": self.params,
            "residuals": self.residuals,
            "constants": self.constants,
            "grid": self.grid,
            "pass": bool(self.passed),
        }
        if self.notes:
            out["notes"] = list(self.notes)
        return _jsonable(out)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)

    def __bool__(self) -> bool:
        return bool(self.passed)
