"""Run configurations: JSON parsing, presets and validation.

A configuration is one JSON object.  Unknown keys anywhere are errors, and
a preset is expanded into a complete configuration before the file's own
values are merged on top of it.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, fields
from typing import Any, Dict, Optional

from .errors import ConfigError, FracLabError
from .model import (Ball, OperatorParams, ProblemParams, RadialGrid, WholeSpace,
                    make_log_grid, make_params, make_uniform_grid)
from .variational import SolverConfig

PRESETS: Dict[str, Dict[str, Any]] = {
    "SupercriticalExistence": {
        "params": {"N": 3, "s": 0.5, "p": 3.0, "q": 6.0, "domain": "WholeSpace"},
        "grid": {"r_min": 0.01, "r_cut": 100.0, "M": 1024, "grading": "LogGraded"},
    },
    "CriticalNonexistence": {
        "params": {"N": 3, "s": 0.5, "p": 2.0, "q": 6.0, "domain": "WholeSpace"},
        "grid": {"r_min": 0.01, "r_cut": 100.0, "M": 1024, "grading": "LogGraded"},
    },
    "BallCritical": {
        "params": {"N": 3, "s": 0.5, "p": 2.0, "q": 6.0,
                   "domain": {"type": "Ball", "radius": 1.0}},
        "grid": {"r_min": None, "r_cut": 1.0, "M": 256, "grading": "Uniform"},
    },
    "OperatorCrossCheck": {
        "params": {"N": 1, "s": 0.5, "p": None, "q": None, "domain": "WholeSpace"},
        "grid": {"r_min": 0.01, "r_cut": 40.0, "M": 1024, "grading": "LogGraded"},
    },
}

CROSSCHECK_DEFAULTS = {
    "spectral_M": 4096,
    "spectral_L": 20.0,
    "extension_M": 256,
    "extension_r_min": 0.02,
    "extension_r_cut": 30.0,
    "bubble_N": 3,
    "bubble_r_cut": 100.0,
    "bubble_extension_r_min": 0.04,
    "window": 5.0,
    "threshold": 3e-2,
    "ratio_max": 0.7,
}

DEFAULTS: Dict[str, Any] = {
    "preset": None,
    "params": {"N": 3, "s": 0.5, "p": 3.0, "q": 6.0, "domain": "WholeSpace"},
    "grid": {"r_min": 0.01, "r_cut": 100.0, "M": 1024, "grading": "LogGraded"},
    "solver": {f.name: f.default for f in fields(SolverConfig)},
    "diagnostics": {"fit_window": None},
    "crosscheck": dict(CROSSCHECK_DEFAULTS),
    "output_dir": "out",
}


def _merge(base: dict, over: dict, path: str) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        where = f"{path}.{k}" if path else k
        if k not in base:
            raise ConfigError(f"unknown key '{where}'")
        if isinstance(base[k], dict) and k != "domain":
            if not isinstance(v, dict):
                raise ConfigError(f"'{where}' must be an object")
            out[k] = _merge(base[k], v, where)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass(frozen=True)
class RunConfig:
    raw: Dict[str, Any]            # fully expanded, echoed into reports

    @property
    def preset(self) -> Optional[str]:
        return self.raw["preset"]

    @property
    def output_dir(self) -> str:
        return self.raw["output_dir"]

    def problem(self) -> ProblemParams:
        p = self.raw["params"]
        try:
            return make_params(p["N"], p["s"], p["p"], p["q"], _domain(p["domain"]))
        except (TypeError, FracLabError) as exc:
            raise ConfigError(f"params: {exc}") from exc

    def operator(self) -> OperatorParams:
        p = self.raw["params"]
        try:
            return OperatorParams(p["N"], p["s"])
        except (TypeError, FracLabError) as exc:
            raise ConfigError(f"params: {exc}") from exc

    def grid(self) -> RadialGrid:
        g = self.raw["grid"]
        N = self.raw["params"]["N"]
        try:
            if g["grading"] == "Uniform":
                return make_uniform_grid(float(g["r_cut"]), int(g["M"]), int(N))
            if g["grading"] == "LogGraded":
                return make_log_grid(float(g["r_min"]), float(g["r_cut"]), int(g["M"]), int(N))
        except (TypeError, FracLabError) as exc:
            raise ConfigError(f"grid: {exc}") from exc
        raise ConfigError(f"grid.grading must be 'Uniform' or 'LogGraded', got {g['grading']!r}")

    def solver(self) -> SolverConfig:
        try:
            return SolverConfig(**self.raw["solver"])
        except (TypeError, FracLabError) as exc:
            raise ConfigError(f"solver: {exc}") from exc

    def fit_window(self):
        w = self.raw["diagnostics"]["fit_window"]
        if w is None:
            return None
        if not (isinstance(w, list) and len(w) == 2):
            raise ConfigError("diagnostics.fit_window must be [r_lo, r_hi] or null")
        return float(w[0]), float(w[1])

    def crosscheck(self) -> Dict[str, Any]:
        return dict(self.raw["crosscheck"])


def _domain(d):
    if d == "WholeSpace":
        return WholeSpace()
    if isinstance(d, dict) and d.get("type") == "Ball" and set(d) == {"type", "radius"}:
        return Ball(float(d["radius"]))
    raise ConfigError(f"params.domain must be 'WholeSpace' or "
                      f"{{\"type\": \"Ball\", \"radius\": R}}, got {d!r}")


def expand(doc: Dict[str, Any]) -> RunConfig:
    """Defaults, then the preset, then the document's own values."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    preset = doc.get("preset")
    base = copy.deepcopy(DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {preset!r}; "
                              f"expected one of {sorted(PRESETS)}")
        base = _merge(base, PRESETS[preset], "")
    cfg = RunConfig(_merge(base, doc, ""))
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    raw = cfg.raw
    if not isinstance(raw["output_dir"], str) or not raw["output_dir"]:
        raise ConfigError("output_dir must be a non-empty path string")
    if raw["preset"] == "OperatorCrossCheck":
        cfg.operator()
        return
    params = cfg.problem()
    grid = cfg.grid()
    cfg.solver()
    cfg.fit_window()
    if params.is_ball and abs(grid.r_cut - params.domain.radius) > 1e-12 * grid.r_cut:
        raise ConfigError(f"grid.r_cut ({grid.r_cut}) must equal the ball radius "
                          f"({params.domain.radius})")


def load(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return expand(doc)
