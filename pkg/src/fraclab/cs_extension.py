"""Weighted-harmonic extension of radial profiles to the half-space.

w(r, y) solves div(y^{1-2s} ∇w) = 0 in the radial variables
(r^{N-1} weight) with w(r, 0) = u(r).  The trace -k_{2s} lim y^{1-2s} w_y
recovers (-Δ)^s u and k_{2s} ∬ y^{1-2s} |∇w|² equals the Ḣ^s energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve
from scipy.special import gamma as Gamma

from .errors import FitIllConditioned, ParameterError, SolverStagnation
from .model import (PowerLaw, RadialGrid, RadialProfile, constants_for,
                    sphere_area)
from .radial_fraclap import lp_mass

SOLVE_RTOL = 1e-10
FIT_LAYERS = 4
FIT_COND_MAX = 1e8


def y_grading(s: float) -> float:
    """Exponent κ of y_j = y_max (j/M_y)^κ.

    At least 1/(2s), so that y^{2s} is uniform in j, and at least 3 so the
    first layers sit deep inside the boundary layer for s near 1/2 too.
    """
    return max(1.0 / (2 * s), 3.0)


@dataclass(frozen=True, eq=False)
class ExtensionField:
    r_grid: RadialGrid
    y_nodes: np.ndarray
    values: np.ndarray          # shape (M_r, M_y + 1); column 0 is the datum
    s: float
    cond_r: np.ndarray          # conductances of r-edges, shape (M_r - 1, M_y + 1)
    cond_y: np.ndarray          # conductances of y-edges, shape (M_r, M_y)
    residual: float = 0.0

    @property
    def N(self) -> int:
        return self.r_grid.N


def poisson_constant(N: int, s: float) -> float:
    """p_{N,s} with P(x, y) = p y^{2s} (|x|² + y²)^{-(N+2s)/2} of unit mass."""
    return Gamma((N + 2 * s) / 2) / (math.pi ** (N / 2) * Gamma(s))


def _half_cells(x: np.ndarray, lo: float, hi: float):
    mid = 0.5 * (x[1:] + x[:-1])
    return np.r_[lo, mid], np.r_[mid, hi]


def _conductances(r: np.ndarray, y: np.ndarray, N: int, s: float):
    a = 1.0 - 2 * s
    ylo, yhi = _half_cells(y, 0.0, y[-1])
    # ∫ y^a over each y-cell and 1/∫ y^{-a} between neighbours, both exact
    Ycell = (yhi ** (a + 1) - ylo ** (a + 1)) / (a + 1)
    Yinv = (2 * s) / (y[1:] ** (2 * s) - y[:-1] ** (2 * s))
    rlo, rhi = _half_cells(r, r[0], r[-1])
    Rcell = (rhi ** N - rlo ** N) / N
    rface = 0.5 * (r[1:] + r[:-1])
    Rinv = rface ** (N - 1) / np.diff(r)
    cond_r = Rinv[:, None] * Ycell[None, :]
    cond_y = Rcell[:, None] * Yinv[None, :]
    return cond_r, cond_y


def _far_field(u: RadialProfile, N: int, s: float, r, y) -> np.ndarray:
    """Extension model on the artificial boundary.

    PowerLaw tails use A |(r, y)|^{-γ} (exact for γ = N - 2s, the
    fundamental solution); Zero tails use mass times the Poisson kernel.
    """
    r, y = np.broadcast_arrays(np.asarray(r, float), np.asarray(y, float))
    tail = u.tail
    if isinstance(tail, PowerLaw):
        return tail.amplitude * (r * r + y * y) ** (-tail.exponent / 2)
    m = u.grid.integrate(u.values)
    return m * poisson_constant(N, s) * y ** (2 * s) * (r * r + y * y) ** (-(N + 2 * s) / 2)


def extend(u: RadialProfile, params, y_max: float, M_y: int) -> ExtensionField:
    """Finite-volume solve on [0, r_cut] x [0, y_max] with nodes at the radial
    grid and at y_j = y_max (j/M_y)^κ.

    Dirichlet data: u at y = 0, the far-field model at r = r_cut and at
    y = y_max; the symmetry condition at r = 0 is the natural one.
    """
    grid = u.grid
    N, s = params.N, params.s
    if grid.N != N:
        raise ParameterError("grid dimension does not match params")
    if not grid.has_origin:
        raise ParameterError("extension needs a radial grid containing r = 0")
    if M_y < 64:
        raise ParameterError(f"M_y must be at least 64, got {M_y}")
    if y_max < 4 * grid.r_cut:
        raise ParameterError(f"y_max must be at least 4 r_cut = {4 * grid.r_cut}")
    r = grid.nodes
    y = y_max * (np.arange(M_y + 1) / M_y) ** y_grading(s)
    Mr, Ny = len(r), M_y + 1
    cond_r, cond_y = _conductances(r, y, N, s)

    idx = np.arange(Mr * Ny).reshape(Mr, Ny)
    rows, cols, vals = [], [], []
    for (a, b, c) in ((idx[:-1, :], idx[1:, :], cond_r), (idx[:, :-1], idx[:, 1:], cond_y)):
        a, b, c = a.ravel(), b.ravel(), c.ravel()
        rows += [a, b, a, b]
        cols += [a, b, b, a]
        vals += [c, c, -c, -c]
    K = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(Mr * Ny, Mr * Ny))

    W = np.zeros((Mr, Ny))
    W[:, 0] = u.values
    W[-1, 1:] = _far_field(u, N, s, r[-1], y[1:])
    W[:-1, -1] = _far_field(u, N, s, r[:-1], y[-1])
    bnd = np.zeros((Mr, Ny), bool)
    bnd[:, 0] = bnd[-1, :] = bnd[:, -1] = True
    I = idx[~bnd]
    B = idx[bnd]
    wB = W[bnd]
    K_II = K[I][:, I].tocsc()
    rhs = -(K[I][:, B] @ wB)
    if np.any(rhs):
        wI = spsolve(K_II, rhs)
        res = np.linalg.norm(K_II @ wI - rhs) / np.linalg.norm(rhs)
    else:
        wI, res = np.zeros(len(I)), 0.0
    if not np.all(np.isfinite(wI)) or res > SOLVE_RTOL:
        raise SolverStagnation(f"extension solve residual {res:.3e} above {SOLVE_RTOL:g}")
    W[~bnd] = wI
    return ExtensionField(grid, y, W, s, cond_r, cond_y, float(res))


def neumann_trace(w: ExtensionField, constants, layers: int = FIT_LAYERS) -> RadialProfile:
    """-k_{2s} · 2s · a(r) from the fit w ≈ w0 + a y^{2s} on the first layers."""
    Y = w.y_nodes[:layers] ** (2 * w.s)
    A = np.column_stack([np.ones(layers), Y])
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > FIT_COND_MAX:
        raise FitIllConditioned(f"trace regression condition number {cond:.3e}")
    coef, *_ = np.linalg.lstsq(A, w.values[:, :layers].T, rcond=None)
    a = coef[1]
    return RadialProfile(w.r_grid, -constants.k_2s * 2 * w.s * a, None)


def extension_energy(w: ExtensionField, constants) -> float:
    """k_{2s} ∬ y^{1-2s} |∇w|² over the truncated half-strip, as the discrete
    edge form of the scheme (the solved field is its exact minimiser)."""
    dr = np.diff(w.values, axis=0)
    dy = np.diff(w.values, axis=1)
    form = float(np.sum(w.cond_r * dr * dr) + np.sum(w.cond_y * dy * dy))
    return constants.k_2s * sphere_area(w.N) * form


def with_values(w: ExtensionField, values: np.ndarray) -> ExtensionField:
    """Same mesh, other nodal values (used for perturbation checks)."""
    return ExtensionField(w.r_grid, w.y_nodes, np.asarray(values, float), w.s,
                          w.cond_r, w.cond_y, w.residual)


def critical_norm_sq(u: RadialProfile, N: int, s: float) -> float:
    """(∫ |u|^{2*})^{2/2*}, the left side of the trace inequality."""
    two_star = 2 * N / (N - 2 * s)
    return lp_mass(u, two_star) ** (2 / two_star)
