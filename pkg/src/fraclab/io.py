"""Canonical CSV and JSON output.

Floats are written as %.12e everywhere, JSON keys are sorted and
non-finite numbers become the strings "NaN", "Infinity", "-Infinity", so
reading a file back and writing it again reproduces it byte for byte.
"""

from __future__ import annotations

import json
import math
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError

FLOAT_FMT = "%.12e"
PROFILE_HEADER = ("r", "u", "fraclap_u", "u_prime")
CONVERGENCE_HEADER = ("iteration", "F", "residual")


def _float(x: float) -> str:
    if math.isnan(x):
        return '"NaN"'
    if math.isinf(x):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    return FLOAT_FMT % x


def _encode(obj: Any, indent: int) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_encode(obj[k], indent + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [pad + _encode(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj: Any) -> str:
    return _encode(obj, 0) + "\n"


def write_json(path: str, obj: Any) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(obj))


def read_json(path: str) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_csv(path: str, header: Sequence[str], columns: Sequence[np.ndarray],
              int_columns: Sequence[int] = ()) -> None:
    cols = [np.asarray(c) for c in columns]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError("CSV columns differ in length")
    lines = [",".join(header)]
    for i in range(n):
        cells = [str(int(c[i])) if j in int_columns else FLOAT_FMT % float(c[i])
                 for j, c in enumerate(cols)]
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_profile_csv(path: str, r, u, fraclap_u, u_prime) -> None:
    write_csv(path, PROFILE_HEADER, [r, u, fraclap_u, u_prime])


def write_convergence_csv(path: str, history) -> None:
    h = np.array(history, dtype=float).reshape(-1, 3)
    write_csv(path, CONVERGENCE_HEADER, [h[:, 0], h[:, 1], h[:, 2]], int_columns=(0,))


def read_profile_csv(path: str):
    """(r, u) from a profile CSV with at least the columns r and u."""
    try:
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read profile {path}: {exc}") from exc
    if header[:2] != ["r", "u"]:
        raise ConfigError(f"{path}: header must start with 'r,u', got {','.join(header)}")
    if data.shape[1] != len(header):
        raise ConfigError(f"{path}: {data.shape[1]} columns but {len(header)} header fields")
    return data[:, 0], data[:, 1]
