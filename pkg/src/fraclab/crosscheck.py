"""Three-way comparison of the operator implementations.

The singular-integral quadrature, the Fourier multiplier (N <= 2) and the
extension trace are evaluated on the Gaussian and on the Bubble at a base
resolution and at doubled resolution.  Discrepancies are relative L² norms
over the extension nodes in [0, window].
"""

from __future__ import annotations

import math
from typing import Dict

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import gamma as Gamma
from scipy.special import hyp1f1

from .cs_extension import extend, extension_energy, neumann_trace
from .model import (OperatorParams, RadialProfile, constants_for, make_log_grid,
                    sample)
from .radial_fraclap import fraclap_at, gagliardo_energy
from .spectral_oracle import fraclap_spectral, restrict_to_radial, sample_field

LEVELS = 2


def gaussian(r):
    return np.exp(-np.asarray(r, float) ** 2 / 2)


def gaussian_fraclap(N: int, s: float, r) -> np.ndarray:
    """(-Δ)^s e^{-|x|²/2} = 2^s Γ(N/2+s)/Γ(N/2) ₁F₁(N/2+s; N/2; -r²/2)."""
    r = np.asarray(r, float)
    return 2 ** s * Gamma(N / 2 + s) / Gamma(N / 2) * hyp1f1(N / 2 + s, N / 2, -r * r / 2)


def bubble(N: int, s: float):
    return lambda r: (1 + np.asarray(r, float) ** 2) ** (-(N - 2 * s) / 2)


def bubble_fraclap(N: int, s: float, r) -> np.ndarray:
    """(-Δ)^s (1+r²)^{-(N-2s)/2} = 2^{2s} Γ((N+2s)/2)/Γ((N-2s)/2) (1+r²)^{-(N+2s)/2}."""
    r = np.asarray(r, float)
    c = 2 ** (2 * s) * Gamma((N + 2 * s) / 2) / Gamma((N - 2 * s) / 2)
    return c * (1 + r * r) ** (-(N + 2 * s) / 2)


def _rel(a, b, w) -> float:
    return float(math.sqrt(w @ (a - b) ** 2) / (math.sqrt(w @ b ** 2) + 1e-300))


def _spectral_at(f, N: int, s: float, L: float, M: int, r) -> np.ndarray:
    prof = restrict_to_radial(fraclap_spectral(sample_field(f, L, M, N), s))
    x, v = prof.grid.nodes, prof.values
    return CubicSpline(x, v, bc_type=((1, 0.0), "not-a-knot"))(r)


def _case(name, op: OperatorParams, f, exact, tail, radial_grid, ext_grid, cc, spectral):
    s = op.s
    C = constants_for(op.N, s)
    levels = []
    for k in range(LEVELS):
        scale = 2 ** k
        g = radial_grid(scale)
        u = sample(g, f, tail)
        ge = ext_grid(scale)
        ue = sample(ge, f, tail)
        M_e = cc["extension_M"] * scale
        w = extend(ue, op, 4 * ge.r_cut, M_e)
        sel = ge.nodes <= cc["window"]
        P = ge.nodes[sel]
        wq = np.array(ge.weights)[sel]
        vals = {"radial": fraclap_at(u, op, P),
                "extension": neumann_trace(w, C).values[sel]}
        if spectral:
            vals["spectral"] = _spectral_at(f, op.N, s, cc["spectral_L"],
                                            cc["spectral_M"] * scale, P)
        ex = exact(P)
        names = sorted(vals)
        disc = {f"{a}_{b}": _rel(vals[a], vals[b], wq)
                for i, a in enumerate(names) for b in names[i + 1:]}
        E_ext = extension_energy(w, C)
        E_gag = gagliardo_energy(u, op)
        levels.append({
            "radial_M": len(g), "extension_M": M_e,
            "spectral_M": cc["spectral_M"] * scale if spectral else None,
            "discrepancy": disc,
            "exact_error": {k2: _rel(v, ex, wq) for k2, v in vals.items()},
            "extension_energy": E_ext, "gagliardo_energy": E_gag,
            "isometry": abs(E_ext - E_gag) / abs(E_gag),
        })
    ratios = {k2: levels[1]["discrepancy"][k2] / max(levels[0]["discrepancy"][k2], 1e-300)
              for k2 in levels[0]["discrepancy"]}
    return {"name": name, "N": op.N, "s": s, "levels": levels, "ratios": ratios}


def run_crosscheck(op: OperatorParams, grid_cfg: dict, cc: dict) -> Dict:
    N, s = op.N, op.s
    spectral = N <= 2
    cases = []

    def g_radial(scale):
        return make_log_grid(grid_cfg["r_min"] / scale, grid_cfg["r_cut"],
                             grid_cfg["M"] * scale, N)

    def g_ext(scale):
        return make_log_grid(cc["extension_r_min"] / scale, cc["extension_r_cut"],
                             cc["extension_M"] * scale, N)

    cases.append(_case("gaussian", op, gaussian, lambda r: gaussian_fraclap(N, s, r),
                       None, g_radial, g_ext, cc, spectral))

    Nb = int(cc["bubble_N"])
    if Nb > 2 * s:
        opb = OperatorParams(Nb, s)
        R = cc["bubble_r_cut"]

        def gb_radial(scale):
            return make_log_grid(grid_cfg["r_min"] / scale, R, grid_cfg["M"] * scale, Nb)

        def gb_ext(scale):
            return make_log_grid(cc["bubble_extension_r_min"] / scale, R,
                                 cc["extension_M"] * scale, Nb)

        cases.append(_case("bubble", opb, bubble(Nb, s), lambda r: bubble_fraclap(Nb, s, r),
                           Nb - 2 * s, gb_radial, gb_ext, cc, Nb <= 2))

    failures = []
    for c in cases:
        base = c["levels"][0]
        for k, d in base["discrepancy"].items():
            if not d < cc["threshold"]:
                failures.append(f"{c['name']}: {k} discrepancy {d:.3e} >= {cc['threshold']:g}")
        for k, q in c["ratios"].items():
            if not q < cc["ratio_max"]:
                failures.append(f"{c['name']}: {k} refinement ratio {q:.3f} >= {cc['ratio_max']:g}")
        for lv in c["levels"]:
            if not lv["isometry"] < cc["threshold"]:
                failures.append(f"{c['name']}: isometry defect {lv['isometry']:.3e} at "
                                f"M={lv['extension_M']}")
    return {"cases": cases, "threshold": cc["threshold"], "ratio_max": cc["ratio_max"],
            "window": cc["window"], "passed": not failures, "failures": failures}
