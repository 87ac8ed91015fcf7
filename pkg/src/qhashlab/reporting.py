"""Canonical JSON/CSV serialization and atomic report files.

Canonical JSON: sorted keys, compact separators, floats in shortest
round-trip form (``repr``), complex numbers as ``[re, im]``, fractions as
``"p/q"`` strings and NaN/inf as ``null``.  Equal inputs give equal bytes.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import tempfile
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from .states import CqState, JointDistribution


def to_jsonable(obj):
    """Recursively convert numpy / dataclass / Fraction values into JSON-native types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, (complex, np.complexfloating)):
        return [_float(obj.real), _float(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        return _float(obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(obj.to_dict() if hasattr(obj, "to_dict") else dataclasses.asdict(obj))
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _float(x) -> float | None:
    x = float(x)
    if not math.isfinite(x):
        return None
    # normalize -0.0 so equal values give equal bytes
    return x + 0.0


def dumps_canonical(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"),
                      ensure_ascii=True, allow_nan=False)


def atomic_write_text(path, text: str) -> Path:
    """Write via a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, obj) -> Path:
    return atomic_write_text(path, dumps_canonical(obj) + "\n")


def format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v + 0.0) if math.isfinite(v) else ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def csv_text(rows: Iterable[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, rows: Iterable[dict], columns: Sequence[str]) -> Path:
    return atomic_write_text(path, csv_text(rows, columns))


# -- state schemas ------------------------------------------------------------

class JointDistributionModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    table: list[list[float]]
    x_labels: list[str] = []
    y_labels: list[str] = []

    def build(self) -> JointDistribution:
        return JointDistribution(np.array(self.table, dtype=float),
                                 tuple(self.x_labels), tuple(self.y_labels))


class CqStateModel(BaseModel):
    """Blocks as nested lists of ``[re, im]`` pairs."""

    model_config = ConfigDict(extra="forbid")

    blocks: list[list[list[tuple[float, float]]]]
    labels: list[str] = []

    @field_validator("blocks")
    @classmethod
    def _square(cls, v):
        for b in v:
            if any(len(row) != len(b) for row in b):
                raise ValueError("every block must be square")
        return v

    def build(self) -> CqState:
        a = np.array(self.blocks, dtype=float)
        return CqState(a[..., 0] + 1j * a[..., 1], tuple(self.labels))


def joint_to_dict(j: JointDistribution) -> dict:
    return {"table": j.table, "x_labels": list(j.x_labels), "y_labels": list(j.y_labels)}


def cq_to_dict(rho: CqState) -> dict:
    return {"blocks": np.asarray(rho.blocks), "labels": list(rho.labels)}


def load_joint(path) -> JointDistribution:
    return JointDistributionModel.model_validate_json(Path(path).read_text()).build()


def load_cq(path) -> CqState:
    return CqStateModel.model_validate_json(Path(path).read_text()).build()


def schemas() -> dict:
    """JSON Schemas for the state file formats."""
    return {"JointDistribution": JointDistributionModel.model_json_schema(),
            "CqState": CqStateModel.model_json_schema()}
