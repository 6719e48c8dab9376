"""Singular-integral evaluation of (-Δ)^s on radial profiles.

For a target radius r the operator is reduced to

    (-Δ)^s u(r) = -c_{N,s} |S^{N-1}| ∫_0^∞ ρ^{-1-2s} (A(r, ρ) - u(r)) dρ

with A(r, ρ) the mean of u over the sphere of radius ρ centred at r e_1.
This is the second-difference form integrated over directions, since the
pair x ± y lands on the same sphere.  The ρ-integral uses Gauss-Legendre
panels in log ρ, a Taylor head below the smallest panel and closed-form
far-field pieces from the profile's tail model.

All quadrature points are fixed by the grid, so the discrete operator is a
matrix acting on nodal values.  Matrices are built on the grid rescaled to
r_cut = 1 and cached; a physical grid only contributes a factor r_cut^{-2s}.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.special import roots_jacobi

from ._spline import SplineMap, endpoint_derivative_row
from .errors import (DivergentSeminorm, ParameterError, QuadratureDiverged,
                     TailRequired)
from .model import (PowerLaw, ProblemParams, RadialGrid, RadialProfile,
                    ZeroTail, constants_for, eval_profile, sphere_area,
                    spliced_tail)

RHO_GL = 8          # Gauss-Legendre nodes per log-ρ panel
PANEL_RATIO = 2.0   # ρ_{k+1}/ρ_k of the geometric panel breaks
FAR_FACTOR = 1e3    # far cut P = FAR_FACTOR (r_cut + r) for power tails
OUTER_PANELS = 10   # outer shells [2^k, 2^{k+1}] r_cut used for R^N integrals
CHUNK = 48


@dataclass(frozen=True)
class OperatorOutput:
    profile: RadialProfile
    quadrature_error_estimate: float


# ---------------------------------------------------------------------------
# tail bookkeeping
# ---------------------------------------------------------------------------

def tail_spec(u: RadialProfile) -> tuple:
    """('zero',) or ('power', γ); raises TailRequired for an unset tail
    with a non-negligible value at r_cut."""
    tail = u.tail
    if tail is None:
        scale = float(np.max(np.abs(u.values))) if len(u.values) else 0.0
        if abs(u.values[-1]) > 1e-12 * max(scale, 1e-300):
            raise TailRequired("profile has no tail model but is nonzero at r_cut")
        return ("zero",)
    if isinstance(tail, ZeroTail):
        return ("zero",)
    return ("power", float(tail.exponent))


def _right_bc(grid_nodes: np.ndarray, spec: tuple) -> np.ndarray:
    if spec[0] == "power":
        row = np.zeros(len(grid_nodes))
        row[-1] = -spec[1] / grid_nodes[-1]
        return row
    return endpoint_derivative_row(grid_nodes, at_start=False)


_SPLINES: "OrderedDict[tuple, SplineMap]" = OrderedDict()
_MATRICES: "OrderedDict[tuple, np.ndarray]" = OrderedDict()


def _cache_get(cache, key, build, size):
    if key in cache:
        cache.move_to_end(key)
        return cache[key]
    val = build()
    cache[key] = val
    while len(cache) > size:
        cache.popitem(last=False)
    return val


def unit_grid(grid: RadialGrid) -> RadialGrid:
    return grid if grid.r_cut == 1.0 else grid.scaled(1.0 / grid.r_cut)


def spline_for(grid: RadialGrid, spec: tuple) -> SplineMap:
    """Cubic spline map on the unit-rescaled grid with the tail's end slope."""
    g = unit_grid(grid)

    def build():
        left = np.zeros(len(g)) if g.has_origin else endpoint_derivative_row(g.nodes, True)
        return SplineMap(g.nodes, left, _right_bc(g.nodes, spec))
    return _cache_get(_SPLINES, (grid.key, spec), build, 16)


# ---------------------------------------------------------------------------
# quadrature rules
# ---------------------------------------------------------------------------

_GL = {n: np.polynomial.legendre.leggauss(n) for n in (2, 4, 8, 16)}


def _gl(n):
    if n not in _GL:
        _GL[n] = np.polynomial.legendre.leggauss(n)
    return _GL[n]


def _jacobi(n: int, N: int):
    a = (N - 3) / 2
    t, w = roots_jacobi(n, a, a)
    return t, w / w.sum()


def head_fraction(s: float) -> float:
    """ρ_min / h.  Kernel weights grow like ρ_min^{-2s}, so the Taylor head
    is pushed outwards as s → 1 to keep cancellation in L @ u near eps."""
    return 10.0 ** (-2.0 + 2.8 * max(s - 0.5, 0.0))


def _rho_rule(r: float, h: float, spec: tuple, n_rho: int, s: float,
              delta_min: Optional[float] = None):
    """Log-panel Gauss-Legendre nodes and weights on [ρ_min, P] (unit grid).

    With ``delta_min`` the panels are also graded geometrically towards
    ρ = r, down to gaps of delta_min, so that spheres passing close to the
    origin resolve the profile's core.
    """
    rho_min = head_fraction(s) * h
    P = r + 1.0 if spec[0] == "zero" else FAR_FACTOR * (1.0 + r)
    n_geo = int(math.ceil(math.log(P / rho_min) / math.log(PANEL_RATIO)))
    breaks = rho_min * PANEL_RATIO ** np.arange(n_geo + 1)
    extra = [0.5 * r, r, abs(1.0 - r), 1.0 + r]
    if delta_min is not None and r > 2 * delta_min:
        n_d = int(math.ceil(math.log(0.5 * r / delta_min) / math.log(PANEL_RATIO)))
        d = 0.5 * r * PANEL_RATIO ** (-np.arange(n_d + 1.0))
        extra = np.r_[extra, r - d, r + d]
    breaks = np.concatenate([breaks[breaks < P], [P], extra])
    breaks = np.unique(breaks[(breaks >= rho_min) & (breaks <= P)])
    lb = np.log(breaks)
    keep = np.r_[True, np.diff(lb) > 1e-9]
    lb = lb[keep]
    g, gw = _gl(n_rho)
    a, b = lb[:-1], lb[1:]
    x = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * g[None, :]
    w = 0.5 * (b - a)[:, None] * gw[None, :]
    rho = np.exp(x).ravel()
    return rho, (w.ravel() * rho), rho_min, P


def outer_rule(n: int = RHO_GL, panels: int = OUTER_PANELS):
    """Radii beyond r_cut = 1 and weights for ∫_1^{2^panels} f(r) dr."""
    g, gw = _gl(n)
    k = np.arange(panels)
    a, b = 2.0 ** k, 2.0 ** (k + 1)
    r = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * g[None, :]
    w = 0.5 * (b - a)[:, None] * gw[None, :]
    return r.ravel(), w.ravel()


# ---------------------------------------------------------------------------
# matrix assembly
# ---------------------------------------------------------------------------

def _core_scale(g: RadialGrid, N: int) -> Optional[float]:
    # only the exact 1-D and 3-D spherical means resolve ρ ≈ r
    return float(g.nodes[1] - g.nodes[0]) if N in (1, 3) else None


class _Acc:
    """Sparse accumulation of weighted point functionals for a target chunk."""

    def __init__(self, nt):
        self.nt = nt
        self.ti, self.R, self.w = [], [], []

    def add(self, ti, R, w):
        self.ti.append(np.full(len(R), ti) if np.ndim(ti) == 0 else ti)
        self.R.append(np.asarray(R, float))
        self.w.append(np.asarray(w, float))

    def arrays(self):
        if not self.R:
            return np.zeros(0, int), np.zeros(0), np.zeros(0)
        return np.concatenate(self.ti), np.concatenate(self.R), np.concatenate(self.w)


def _aggregate(ti, w, D, nt):
    npts = len(w)
    G = sparse.csr_matrix((w, (ti, np.arange(npts))), shape=(nt, npts))
    return (G @ D).toarray()


def _assemble(grid: RadialGrid, s: float, spec: tuple, targets: np.ndarray,
              n_ang: int, n_rho: int) -> np.ndarray:
    """Matrix of (-Δ)^s on the unit grid: rows = targets, columns = nodes."""
    N = grid.N
    g = unit_grid(grid)
    sm = spline_for(grid, spec)
    M = len(g)
    gamma = spec[1] if spec[0] == "power" else None
    (t1, k1, C1), (t2, k2, C2) = sm.antiderivatives
    pref = -constants_for(N, s).c_Ns * sphere_area(N)
    tj, wj = _jacobi(n_ang, N) if N >= 2 else (None, None)
    hs = g.spacing_at(targets)
    dmin = _core_scale(g, N)
    out = np.zeros((len(targets), M))

    U1 = None
    if N == 3:
        one = np.array([1.0])
        U1 = (sm.anti_design(one, 1) @ C1 - sm.anti_design(one, 2) @ C2)[0]

    for c0 in range(0, len(targets), CHUNK):
        tg = targets[c0:c0 + CHUNK]
        nt = len(tg)
        uacc, Uacc = _Acc(nt), _Acc(nt)
        diag = np.zeros(nt)
        head = np.zeros(nt)
        tailcol = np.zeros(nt)
        for i, r in enumerate(tg):
            rho, wr, rho_min, P = _rho_rule(r, hs[c0 + i], spec, n_rho, s, dmin)
            k = wr * rho ** (-1.0 - 2 * s)
            diag[i] -= k.sum()
            head[i] = rho_min ** (2 - 2 * s) / ((2 - 2 * s) * 2 * N)
            diag[i] -= P ** (-2 * s) / (2 * s)
            if gamma is not None:
                tailcol[i] += P ** (-gamma - 2 * s) / (gamma + 2 * s)
            if r == 0.0:
                uacc.add(i, rho, k)
            elif N == 1:
                uacc.add(i, r + rho, 0.5 * k)
                uacc.add(i, np.abs(r - rho), 0.5 * k)
            else:
                near = rho < 0.5 * r if N == 3 else np.ones(len(rho), bool)
                rn, kn = rho[near], k[near]
                if len(rn):
                    R = np.sqrt(np.maximum(r * r + rn[:, None] ** 2
                                           + 2 * r * rn[:, None] * tj[None, :], 0.0))
                    uacc.add(i, R.ravel(), (kn[:, None] * wj[None, :]).ravel())
                if N == 3:
                    rf, kf = rho[~near], k[~near]
                    fac = kf / (2 * r * rf)
                    Uacc.add(i, r + rf, fac)
                    Uacc.add(i, np.abs(r - rf), -fac)

        block = np.zeros((nt, M))
        # point values of u
        ti, R, w = uacc.arrays()
        inside = R <= 1.0
        if inside.any():
            D = sm.design(R[inside])
            block += _aggregate(ti[inside], w[inside], D, nt) @ sm.C
        if gamma is not None and (~inside).any():
            np.add.at(tailcol, ti[~inside], w[~inside] * R[~inside] ** (-gamma))
        # U(R) = ∫_0^R u(t) t dt = R I1(R) - I2(R)
        ti, R, w = Uacc.arrays()
        if len(R):
            inside = R <= 1.0
            if inside.any():
                D1 = sm.anti_design(R[inside], 1)
                D2 = sm.anti_design(R[inside], 2)
                block += _aggregate(ti[inside], w[inside] * R[inside], D1, nt) @ C1
                block -= _aggregate(ti[inside], w[inside], D2, nt) @ C2
            out_ = ~inside
            if out_.any():
                wsum = np.zeros(nt)
                np.add.at(wsum, ti[out_], w[out_])
                block += wsum[:, None] * U1[None, :]
                if gamma is not None:
                    Ro = R[out_]
                    if abs(gamma - 2.0) < 1e-12:
                        J = np.log(Ro)
                    else:
                        J = (Ro ** (2 - gamma) - 1.0) / (2 - gamma)
                    np.add.at(tailcol, ti[out_], w[out_] * J)
        # u(r) and Laplacian head at the targets themselves
        tin = tg <= 1.0
        if tin.any():
            block[tin] += diag[tin, None] * (sm.design(tg[tin]) @ sm.C)
            rr = tg[tin]
            lap = sm.dense(rr, 2)
            pos = rr > 0
            lap[pos] += ((N - 1) / rr[pos])[:, None] * sm.dense(rr[pos], 1)
            lap[~pos] *= N
            block[tin] += head[tin, None] * lap
        if (~tin).any() and gamma is not None:
            ro = tg[~tin]
            tailcol[~tin] += diag[~tin] * ro ** (-gamma)
            tailcol[~tin] += head[~tin] * gamma * (gamma + 2 - N) * ro ** (-gamma - 2)
        block[:, -1] += tailcol
        out[c0:c0 + nt] = pref * block
    return out


def operator_matrix(grid: RadialGrid, s: float, spec: tuple,
                    targets: Optional[np.ndarray] = None,
                    angular_nodes: int = 16, rho_nodes: int = RHO_GL) -> np.ndarray:
    """Dense matrix L with (L u)_i = (-Δ)^s u at targets[i] (default: nodes).

    Only grids containing the origin are supported, because the spherical
    means reach every radius below r + ρ.
    """
    if not grid.has_origin:
        raise ParameterError("the singular-integral operator needs a grid containing r = 0")
    if angular_nodes < 8 and grid.N >= 2:
        raise ParameterError(f"angular_nodes must be at least 8, got {angular_nodes}")
    rc = grid.r_cut
    tnorm = grid.nodes / rc if targets is None else np.asarray(targets, float) / rc
    key = (grid.key, float(s), spec, angular_nodes, rho_nodes,
           None if targets is None else tnorm.tobytes())
    L = _cache_get(_MATRICES, key,
                   lambda: _assemble(grid, s, spec, tnorm, angular_nodes, rho_nodes), 12)
    return L * rc ** (-2 * s)


def fraclap_radial(u: RadialProfile, params: ProblemParams,
                   angular_nodes: int = 16, error_estimate: bool = True) -> OperatorOutput:
    """(-Δ)^s u at the nodes of u's grid.

    The error estimate is the max-norm gap to a rerun with half the angular
    and half the radial Gauss points.
    """
    _check_N(u, params)
    spec = tail_spec(u)
    L = operator_matrix(u.grid, params.s, spec, angular_nodes=angular_nodes)
    vals = L @ u.values
    if not np.all(np.isfinite(vals)):
        raise QuadratureDiverged("non-finite operator values")
    err = 0.0
    if error_estimate:
        Lc = operator_matrix(u.grid, params.s, spec, angular_nodes=max(angular_nodes // 2, 8),
                             rho_nodes=RHO_GL // 2)
        err = float(np.max(np.abs(Lc @ u.values - vals)))
        scale = float(np.max(np.abs(vals))) + float(np.max(np.abs(u.values))) + 1e-300
        if err > 0.5 * scale:
            raise QuadratureDiverged(
                f"near-origin ρ quadrature unstable: coarse/fine gap {err:.3e}")
    return OperatorOutput(RadialProfile(u.grid, vals, None), err)


def fraclap_at(u: RadialProfile, params: ProblemParams, r,
               angular_nodes: int = 16) -> np.ndarray:
    """(-Δ)^s u at arbitrary radii (inside or beyond r_cut)."""
    _check_N(u, params)
    r = np.atleast_1d(np.asarray(r, float))
    L = operator_matrix(u.grid, params.s, tail_spec(u), targets=r,
                        angular_nodes=angular_nodes)
    return L @ u.values


def _check_N(u: RadialProfile, params: ProblemParams):
    if u.grid.N != params.N:
        raise ParameterError(f"grid dimension {u.grid.N} differs from params N={params.N}")


# ---------------------------------------------------------------------------
# whole-space integrals
# ---------------------------------------------------------------------------

def _power_remainder(r_last: float, r_prev: float, f_last: float, f_prev: float,
                     N: int) -> float:
    """∫_{r_last}^∞ f r^{N-1} dr for f continued as the power law through
    two samples; zero if the samples do not define a decaying law."""
    if f_last == 0.0:
        return 0.0
    if f_prev == 0.0 or np.sign(f_last) != np.sign(f_prev):
        return 0.0
    kappa = math.log(f_last / f_prev) / math.log(r_last / r_prev)
    if kappa + N >= -1e-12:
        return 0.0
    return f_last * r_last ** N / (-(kappa + N))


def whole_space_integral(grid: RadialGrid, inner: np.ndarray, r_out: np.ndarray,
                         outer: np.ndarray) -> float:
    """∫_{R^N} f from nodal values, samples at outer radii (from outer_rule,
    physical units) and a power-law remainder."""
    N = grid.N
    _, w = outer_rule()
    w = w * grid.r_cut
    total = grid.integrate(inner)
    total += sphere_area(N) * float(np.sum(w * r_out ** (N - 1) * outer))
    total += sphere_area(N) * _power_remainder(r_out[-1], r_out[-2], outer[-1], outer[-2], N)
    return total


def outer_radii(grid: RadialGrid) -> np.ndarray:
    return outer_rule()[0] * grid.r_cut


def duality_pairing(u: RadialProfile, params: ProblemParams,
                    angular_nodes: int = 16) -> float:
    """∫_{R^N} u (-Δ)^s u dx, including the region beyond r_cut."""
    Lu = fraclap_radial(u, params, angular_nodes, error_estimate=False).profile.values
    spec = tail_spec(u)
    if spec[0] == "zero":
        return u.grid.integrate(u.values * Lu)
    ro = outer_radii(u.grid)
    Lo = fraclap_at(u, params, ro, angular_nodes)
    uo = u.values[-1] * (u.grid.r_cut / ro) ** spec[1]
    return whole_space_integral(u.grid, u.values * Lu, ro, uo * Lo)


def lp_mass(u: RadialProfile, m: float) -> float:
    """∫_{R^N} |u|^m dx including the analytic tail contribution."""
    grid = u.grid
    total = grid.integrate(np.abs(u.values) ** m)
    tail = u.tail
    if isinstance(tail, PowerLaw) and tail.amplitude != 0.0:
        e = m * tail.exponent - grid.N
        if e <= 0:
            return math.inf
        total += sphere_area(grid.N) * abs(tail.amplitude) ** m * grid.r_cut ** (-e) / e
    return total


# ---------------------------------------------------------------------------
# Gagliardo energy
# ---------------------------------------------------------------------------

class _Evaluator:
    """u, U = ∫_0^R u t dt and Φ = ∫_0^R u² t dt for one value vector on the
    unit grid, continued by the tail model."""

    def __init__(self, grid: RadialGrid, values: np.ndarray, spec: tuple):
        from scipy.interpolate import BSpline
        self.sm = sm = spline_for(grid, spec)
        self.gamma = spec[1] if spec[0] == "power" else None
        self.ul = float(values[-1])
        self.f = BSpline(sm.t, sm.C @ values, 3)
        (t1, k1, C1), (t2, k2, C2) = sm.antiderivatives
        self.I1 = BSpline(t1, C1 @ values, k1)
        self.I2 = BSpline(t2, C2 @ values, k2)
        self.nodes = sm.nodes
        g, gw = _gl(4)
        a, b = self.nodes[:-1], self.nodes[1:]
        x = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * g
        seg = (0.5 * (b - a)[:, None] * gw * x * self.f(x) ** 2).sum(axis=1)
        self.cum = np.r_[0.0, np.cumsum(seg)]
        self.U1 = float(self.I1(1.0) - self.I2(1.0))
        self.P1 = float(self.cum[-1])

    def u(self, R):
        R = np.asarray(R, float)
        out = np.zeros_like(R)
        ins = R <= 1.0
        out[ins] = self.f(R[ins])
        if self.gamma is not None:
            out[~ins] = self.ul * R[~ins] ** (-self.gamma)
        return out

    def du(self, R):
        R = np.asarray(R, float)
        out = np.zeros_like(R)
        ins = R <= 1.0
        out[ins] = self.f(R[ins], 1)
        if self.gamma is not None:
            out[~ins] = -self.gamma * self.ul * R[~ins] ** (-self.gamma - 1)
        return out

    @staticmethod
    def _tail_int(R, e):
        # ∫_1^R t^{1-e} dt
        if abs(e - 2.0) < 1e-12:
            return np.log(R)
        return (R ** (2 - e) - 1.0) / (2 - e)

    def U(self, R):
        R = np.asarray(R, float)
        out = np.empty_like(R)
        ins = R <= 1.0
        Ri = R[ins]
        out[ins] = Ri * self.I1(Ri) - self.I2(Ri)
        out[~ins] = self.U1
        if self.gamma is not None:
            out[~ins] += self.ul * self._tail_int(R[~ins], self.gamma)
        return out

    def Phi(self, R):
        R = np.asarray(R, float)
        out = np.empty_like(R)
        ins = R <= 1.0
        Ri = R[ins]
        j = np.clip(np.searchsorted(self.nodes, Ri, side="right") - 1, 0, len(self.nodes) - 2)
        a = self.nodes[j]
        g, gw = _gl(4)
        x = 0.5 * (a + Ri)[:, None] + 0.5 * (Ri - a)[:, None] * g
        part = (0.5 * (Ri - a)[:, None] * gw * x * self.f(x) ** 2).sum(axis=1)
        out[ins] = self.cum[j] + part
        out[~ins] = self.P1
        if self.gamma is not None:
            out[~ins] += self.ul ** 2 * self._tail_int(R[~ins], 2 * self.gamma)
        return out


def _energy_density(ev: _Evaluator, grid: RadialGrid, s: float, spec: tuple,
                    targets: np.ndarray, n_ang: int) -> np.ndarray:
    """g(r) = ∫_0^∞ ρ^{-1-2s} mean_{|y|=ρ} (u(x+y) - u(x))² dρ on the unit grid."""
    N = grid.N
    gamma = spec[1] if spec[0] == "power" else None
    hs = unit_grid(grid).spacing_at(targets)
    dmin = _core_scale(unit_grid(grid), N)
    ur = ev.u(targets)
    dur = ev.du(targets)
    tj, wj = _jacobi(n_ang, N) if N >= 2 else (None, None)
    out = np.empty(len(targets))
    for i, r in enumerate(targets):
        rho, wr, rho_min, P = _rho_rule(r, hs[i], spec, RHO_GL, s, dmin)
        k = wr * rho ** (-1.0 - 2 * s)
        u0 = ur[i]
        if r == 0.0:
            B = (ev.u(rho) - u0) ** 2
        elif N == 1:
            B = 0.5 * ((ev.u(r + rho) - u0) ** 2 + (ev.u(np.abs(r - rho)) - u0) ** 2)
        else:
            B = np.empty(len(rho))
            near = rho < 0.5 * r if N == 3 else np.ones(len(rho), bool)
            rn = rho[near]
            if len(rn):
                R = np.sqrt(np.maximum(r * r + rn[:, None] ** 2
                                       + 2 * r * rn[:, None] * tj[None, :], 0.0))
                B[near] = ((ev.u(R.ravel()).reshape(R.shape) - u0) ** 2) @ wj
            if N == 3:
                rf = rho[~near]
                Rp, Rm = r + rf, np.abs(r - rf)
                den = 2 * r * rf
                A1 = (ev.U(Rp) - ev.U(Rm)) / den
                A2 = (ev.Phi(Rp) - ev.Phi(Rm)) / den
                B[~near] = np.maximum(A2 - 2 * u0 * A1 + u0 * u0, 0.0)
        val = float(k @ B)
        val += dur[i] ** 2 / N * rho_min ** (2 - 2 * s) / (2 - 2 * s)
        val += u0 * u0 * P ** (-2 * s) / (2 * s)
        if gamma is not None:
            At = ev.ul
            val += (-2 * u0 * At * P ** (-gamma - 2 * s) / (gamma + 2 * s)
                    + At * At * P ** (-2 * gamma - 2 * s) / (2 * gamma + 2 * s))
        out[i] = val
    return out


def gagliardo_energy(u: RadialProfile, params: ProblemParams,
                     angular_nodes: int = 16) -> float:
    """(c_{N,s}/2) ∬ |u(x) - u(y)|² |x - y|^{-N-2s} dx dy over R^N × R^N.

    Computed directly from the squared differences (no use of the operator
    matrix), so it serves as an independent check of the duality
    ∫ u (-Δ)^s u = ‖u‖².
    """
    _check_N(u, params)
    grid, N, s = u.grid, params.N, params.s
    if not grid.has_origin:
        raise ParameterError("gagliardo_energy needs a grid containing r = 0")
    spec = tail_spec(u)
    if spec[0] == "power" and u.values[-1] != 0.0 and spec[1] <= (N - 2 * s) / 2:
        raise DivergentSeminorm(
            f"tail exponent {spec[1]} <= (N-2s)/2 = {(N - 2 * s) / 2}: seminorm diverges")
    if not np.any(u.values):
        return 0.0
    ev = _Evaluator(grid, u.values, spec)
    g_in = _energy_density(ev, grid, s, spec, unit_grid(grid).nodes, angular_nodes)
    r_out, _ = outer_rule()
    g_out = _energy_density(ev, grid, s, spec, r_out, angular_nodes)
    g = unit_grid(grid)
    total = whole_space_integral(g, g_in, r_out, g_out)
    c = constants_for(N, s).c_Ns
    return 0.5 * c * sphere_area(N) * total * grid.r_cut ** (N - 2 * s)


# ---------------------------------------------------------------------------
# dilation
# ---------------------------------------------------------------------------

def dilate(u: RadialProfile, lam: float) -> RadialProfile:
    """x ↦ u(λx) resampled on the same grid.

    For λ ≥ 1 the tail amplitude is A λ^{-γ} exactly.  For λ < 1 part of
    the old interior moves beyond r_cut and the tail is re-spliced to the
    new last value.
    """
    if not lam > 0:
        raise ParameterError(f"dilation factor must be positive, got {lam}")
    if lam == 1.0:
        return u
    vals = eval_profile(u, lam * u.grid.nodes)
    tail = u.tail
    if isinstance(tail, PowerLaw):
        if lam >= 1.0:
            tail = PowerLaw(tail.amplitude * lam ** (-tail.exponent), tail.exponent)
        else:
            tail = spliced_tail(u.grid, vals, tail.exponent)
    return RadialProfile(u.grid, vals, tail)
