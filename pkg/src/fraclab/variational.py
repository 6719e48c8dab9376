"""Constrained minimisation producing solutions of (-Δ)^s u = u^p - u^q.

Whole space: minimise F(v) = ½‖v‖²_{Ḣ^s} + ∫|v|^{q+1}/(q+1) on ∫|v|^{p+1} = 1,
read off the multiplier λ from (-Δ)^s v + v^q = λ v^p and rescale v to a
solution.  Ball: the same with v ≡ 0 outside the ball; then v itself solves
(-Δ)^s v = λ v^p - v^q and scale_to_cstar normalises λ away.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError
from scipy.optimize import brentq

from .errors import ParameterError, ZeroMass
from .model import (Ball, PowerLaw, ProblemParams, RadialGrid, RadialProfile,
                    ZERO_TAIL, ZeroTail, eval_profile, make_log_grid,
                    make_uniform_grid, sphere_area)
from .radial_fraclap import (gagliardo_energy, lp_mass, operator_matrix,
                             outer_radii, outer_rule, tail_spec)

ZERO_MASS = 1e-300
TIGHTNESS_MAX = 1e-4
NEWTON_SWITCH = 1e-4
NEWTON_ATTEMPT = 1.0
CHECKPOINT_EVERY = 10
REFACTOR_EVERY = 50
NONEXIST_TAU = 1e-3
NONEXIST_DELTA = 1e-6


@dataclass(frozen=True)
class SolverConfig:
    step: float = 1.0
    step_backtrack: float = 0.5
    tol_residual: float = 1e-6
    max_iters: int = 20000
    rearrange_every: int = 10
    seed_profile: Union[str, RadialProfile] = "Bubble"
    armijo: float = 1e-4
    stagnation_window: int = 100
    stagnation_rtol: float = 1e-14
    newton_polish: bool = True

    def __post_init__(self):
        if not self.step > 0:
            raise ParameterError("step must be positive")
        if not 0 < self.step_backtrack < 1:
            raise ParameterError("step_backtrack must lie in (0, 1)")
        if self.max_iters < 1:
            raise ParameterError("max_iters must be at least 1")
        if self.rearrange_every < 1:
            raise ParameterError("rearrange_every must be at least 1")
        if isinstance(self.seed_profile, str) and self.seed_profile not in ("Bubble", "Gaussian"):
            raise ParameterError(f"unknown seed profile {self.seed_profile!r}")


@dataclass
class MinimizerResult:
    v: RadialProfile
    lam: float
    F_value: float
    u_solution: RadialProfile
    iterations: int
    converged: bool
    residual: float = math.nan            # quadrature norm of the λ-equation residual of v
    flags: List[str] = field(default_factory=list)
    history: List[Tuple[int, float, float]] = field(default_factory=list)
    nonexistence_flag: bool = False
    tightness: float = 0.0
    best_candidate: Optional[dict] = None


# ---------------------------------------------------------------------------
# discrete problem
# ---------------------------------------------------------------------------

class DiscreteProblem:
    """Nodal discretisation of F, the constraint and the Euler-Lagrange map.

    Nodal values are v = P z.  On a ball the last node is pinned to 0.  For
    N >= 2 the origin carries no quadrature weight, so it is not an unknown:
    v(0) is the even (a + b r²) extrapolation from the next two nodes, which
    keeps the discrete energy positive definite.
    """

    def __init__(self, grid: RadialGrid, params: ProblemParams):
        self.grid = grid
        self.params = params
        N, s = params.N, params.s
        self.ball = params.is_ball
        self.spec = ("zero",) if self.ball else ("power", N - 2 * s)
        M = len(grid)
        self.w = np.array(grid.weights)
        self.L = operator_matrix(grid, s, self.spec)
        WL = self.w[:, None] * self.L
        if not self.ball:
            gam = self.spec[1]
            ro = outer_radii(grid)
            _, wo = outer_rule()
            wo = wo * grid.r_cut * sphere_area(N) * ro ** (N - 1)
            Lo = operator_matrix(grid, s, self.spec, targets=ro)
            WL[-1] += (wo * (grid.r_cut / ro) ** gam) @ Lo
        self.Q = 0.5 * (WL + WL.T)
        self.free = np.ones(M, bool)
        if self.ball:
            self.free[-1] = False
        if N >= 2:
            self.free[0] = False
        cols = np.where(self.free)[0]
        P = np.zeros((M, len(cols)))
        P[cols, np.arange(len(cols))] = 1.0
        if N >= 2:
            r1, r2 = grid.nodes[1], grid.nodes[2]
            P[0, 0] = r2 ** 2 / (r2 ** 2 - r1 ** 2)
            P[0, 1] = -r1 ** 2 / (r2 ** 2 - r1 ** 2)
        self.P = P
        self.Qz = P.T @ self.Q @ P

    # tail contribution ∫_{r>r_cut} |v|^m = |v_last|^m * tail_factor(m)
    def tail_factor(self, m: float) -> float:
        if self.ball:
            return 0.0
        N, gam, rc = self.grid.N, self.spec[1], self.grid.r_cut
        e = m * gam - N
        return sphere_area(N) * rc ** N / e if e > 0 else math.inf

    def mass(self, v, m) -> float:
        a = np.abs(v)
        return float(self.w @ a ** m + self.tail_factor(m) * a[-1] ** m)

    def mass_grad(self, v, m) -> np.ndarray:
        g = m * self.w * np.abs(v) ** (m - 1) * np.sign(v)
        g[-1] += self.tail_factor(m) * m * abs(v[-1]) ** (m - 1) * np.sign(v[-1])
        return g

    def energy(self, v) -> float:
        return float(v @ self.Q @ v)

    def F(self, v) -> float:
        q = self.params.q
        return 0.5 * self.energy(v) + self.mass(v, q + 1) / (q + 1)

    def grad(self, v) -> np.ndarray:
        q = self.params.q
        return self.Q @ v + self.mass_grad(v, q + 1) / (q + 1)

    def lam_hat(self, v) -> float:
        """‖v‖² + ∫v^{q+1} divided by ∫v^{p+1} (= 1 on the manifold)."""
        p, q = self.params.p, self.params.q
        return (self.energy(v) + self.mass(v, q + 1)) / self.mass(v, p + 1)

    def residual_vec(self, v, lam) -> np.ndarray:
        p, q = self.params.p, self.params.q
        a = np.abs(v)
        return self.L @ v + a ** (q - 1) * v - lam * a ** (p - 1) * v

    def qnorm(self, r) -> float:
        f = self.free
        return float(math.sqrt(max(self.w[f] @ (r[f] ** 2), 0.0)))

    def residual(self, v, lam=None) -> float:
        lam = self.lam_hat(v) if lam is None else lam
        return self.qnorm(self.residual_vec(v, lam))

    def expand(self, z) -> np.ndarray:
        return self.P @ z

    def project(self, v) -> np.ndarray:
        v = self.P @ v[self.free]
        m = self.mass(v, self.params.p + 1)
        if not m > ZERO_MASS:
            raise ZeroMass(f"constraint integral {m:.3e} is zero")
        return v / m ** (1.0 / (self.params.p + 1))

    def profile(self, v) -> RadialProfile:
        if self.ball:
            return RadialProfile(self.grid, v, ZERO_TAIL)
        gam = self.spec[1]
        return RadialProfile(self.grid, v, PowerLaw(float(v[-1]) * self.grid.r_cut ** gam, gam))


# ---------------------------------------------------------------------------
# public building blocks
# ---------------------------------------------------------------------------

def functional_F(v: RadialProfile, params: ProblemParams) -> float:
    """½ gagliardo_energy(v) + ∫|v|^{q+1}/(q+1), by the independent quadrature."""
    if not np.any(v.values):
        return 0.0
    E = gagliardo_energy(v, params)
    return 0.5 * E + lp_mass(v, params.q + 1) / (params.q + 1)


def _measure(grid: RadialGrid) -> np.ndarray:
    w = np.array(grid.weights)
    if np.any(w < 0):
        raise ParameterError("rearrangement needs nonnegative quadrature weights")
    return w


def rearrange_decreasing(v: RadialProfile, moments: Optional[Tuple[float, float]] = None
                         ) -> RadialProfile:
    """Symmetric decreasing rearrangement w.r.t. ω_N r^{N-1} dr.

    Node values are treated as a step function on cells of measure equal to
    the quadrature weights.  The sorted step function is averaged back onto
    the same cells in radial order, which preserves ∫v and leaves
    nonincreasing inputs unchanged.  With ``moments=(m1, m2)`` the result is
    further mapped by t ↦ a t^b so that ∫v^{m1} and ∫v^{m2} are preserved
    exactly.
    """
    vals = np.asarray(v.values, float)
    if np.any(vals < 0):
        raise ParameterError("rearrangement expects a nonnegative profile")
    mu = _measure(v.grid)
    if np.all(np.diff(vals) <= 0):
        return v
    order = np.argsort(-vals, kind="stable")
    sv, smu = vals[order], mu[order]
    cs = np.r_[0.0, np.cumsum(smu)]
    cell = np.r_[0.0, np.cumsum(mu)]
    # ∫_0^x of the sorted step function, then differences over target cells
    prim = np.r_[0.0, np.cumsum(sv * smu)]
    P = np.interp(cell, cs, prim)
    new = np.zeros_like(vals)
    pos = mu > 0
    new[pos] = np.diff(P)[pos] / mu[pos]
    # zero-measure cells (origin for N >= 2): take the sorted value there
    idx = np.where(~pos)[0]
    for i in idx:
        j = np.searchsorted(cs, cell[i], side="right") - 1
        new[i] = sv[min(max(j, 0), len(sv) - 1)]
    new = np.maximum.accumulate(new[::-1])[::-1]
    tail = v.tail
    out = v.with_values(new)
    if moments is not None:
        out = _match_moments(out, v, moments)
    return out


def _match_moments(out: RadialProfile, ref: RadialProfile, moments) -> RadialProfile:
    m1, m2 = moments
    I1, I2 = lp_mass(ref, m1), lp_mass(out, m1)
    J1, J2 = lp_mass(ref, m2), lp_mass(out, m2)
    if not (I1 > 0 and I2 > 0):
        return out
    vals = out.values

    def masses(b):
        o = out.with_values(vals ** b)
        return lp_mass(o, m1), lp_mass(o, m2)

    def g(b):
        A, B = masses(b)
        return math.log(B) / m2 - math.log(A) / m1 - (math.log(J1) / m2 - math.log(I1) / m1)

    try:
        b = brentq(g, 0.5, 2.0, xtol=1e-15)
    except ValueError:
        return out
    A, _ = masses(b)
    a = (I1 / A) ** (1.0 / m1)
    return out.with_values(a * vals ** b)


def project_manifold(v: RadialProfile, p: float) -> RadialProfile:
    m = lp_mass(v, p + 1)
    if not m > ZERO_MASS:
        raise ZeroMass(f"constraint integral {m:.3e} is zero")
    return v.with_values(v.values / m ** (1.0 / (p + 1)))


def scaling_exponents(lam: float, p: float, q: float, s: float) -> Tuple[float, float]:
    """(α, β) with u(x) = α v(βx) solving the unconstrained equation."""
    alpha = lam ** (-1.0 / (q - p))
    beta = lam ** (-(q - 1) / (2 * s * (q - p)))
    return alpha, beta


def rescale_to_solution(v: RadialProfile, lam: float, params: ProblemParams) -> RadialProfile:
    """u(x) = α v(βx), represented exactly on the grid dilated by 1/β."""
    if not lam > 0:
        raise ParameterError(f"multiplier must be positive, got {lam}")
    if lam == 1.0:
        return v
    alpha, beta = scaling_exponents(lam, params.p, params.q, params.s)
    grid = v.grid.scaled(1.0 / beta)
    tail = v.tail
    if isinstance(tail, PowerLaw):
        tail = PowerLaw(alpha * tail.amplitude * beta ** (-tail.exponent), tail.exponent)
    return RadialProfile(grid, alpha * v.values, tail)


def scale_to_cstar(u: RadialProfile, lam: float, params: ProblemParams):
    """U = λ^{1/(p-1)} u and c* = λ^{-(q-1)/(p-1)}."""
    if not lam > 0:
        raise ParameterError(f"multiplier must be positive, got {lam}")
    p, q = params.p, params.q
    U = u.with_values(lam ** (1.0 / (p - 1)) * u.values)
    return U, lam ** (-(q - 1) / (p - 1))


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------

def default_grid(params: ProblemParams, M: Optional[int] = None) -> RadialGrid:
    if params.is_ball:
        return make_uniform_grid(params.domain.radius, M or 256, params.N)
    return make_log_grid(1e-2, 100.0, M or 1024, params.N)


def _seed(prob: DiscreteProblem, config: SolverConfig) -> np.ndarray:
    r = prob.grid.nodes
    N, s = prob.params.N, prob.params.s
    seed = config.seed_profile
    if isinstance(seed, RadialProfile):
        v = np.maximum(eval_profile(seed, r), 0.0)
    elif seed == "Gaussian":
        v = np.exp(-r ** 2 / 2)
    else:
        v = (1 + r ** 2) ** (-(N - 2 * s) / 2)
    if prob.ball:
        R = prob.grid.r_cut
        v = np.maximum(v - v[-1], 0.0) if seed != "Gaussian" else v * (1 - (r / R) ** 2)
    return prob.project(v)


def _newton(prob: DiscreteProblem, v, lam, iters=40, tol=1e-13):
    """Solve the collocation system L v + v^q - λ v^p = 0 at the unknown
    nodes together with ∫v^{p+1} = 1, for (z, λ) with v = P z."""
    p, q = prob.params.p, prob.params.q
    f, P = prob.free, prob.P
    n = P.shape[1]
    LPf = (prob.L @ P)[f]

    def system(x):
        vv = P @ np.maximum(x[:n], 0.0)
        R = np.r_[prob.residual_vec(vv, x[n])[f], prob.mass(vv, p + 1) - 1.0]
        return vv, R

    x = np.r_[v[f], lam]
    vv, R = system(x)
    best = (prob.residual(vv, x[n]), vv, float(x[n]))
    for _ in range(iters):
        a = vv[f]
        J = np.zeros((n + 1, n + 1))
        J[:n, :n] = LPf
        J[np.arange(n), np.arange(n)] += q * a ** (q - 1) - x[n] * p * a ** (p - 1)
        J[:n, n] = -a ** p
        J[n, :n] = P.T @ prob.mass_grad(vv, p + 1)
        try:
            dx = np.linalg.solve(J, R)
        except np.linalg.LinAlgError:
            break
        t, r0 = 1.0, np.linalg.norm(R)
        while True:
            xn = x - t * dx
            vn, Rn = system(xn)
            if np.linalg.norm(Rn) < r0 or t < 1e-4:
                break
            t *= 0.5
        x, vv, R = xn, vn, Rn
        res = prob.residual(vv, x[n])
        if res < best[0]:
            best = (res, vv, float(x[n]))
        if np.linalg.norm(R) < tol * max(1.0, np.linalg.norm(x)):
            break
    return best[1], best[2]


def _u_units(prob: DiscreteProblem, v, lam):
    """(PDE residual, ∫u^{q+1}) of the rescaled candidate u = α v(β·)."""
    P = prob.params
    if prob.ball or not lam > 0:
        return prob.residual(v, lam), prob.mass(v, P.q + 1)
    alpha, beta = scaling_exponents(lam, P.p, P.q, P.s)
    res = alpha * beta ** (2 * P.s) * beta ** (-P.N / 2) * prob.residual(v, lam)
    mq = alpha ** (P.q + 1) * beta ** (-P.N) * prob.mass(v, P.q + 1)
    return res, mq


def tightness(prob: DiscreteProblem, v) -> float:
    """Fraction of ∫v^{p+1} beyond r_cut/2 (mass drifting to the truncation)."""
    m = prob.params.p + 1
    outer = prob.grid.nodes > 0.5 * prob.grid.r_cut
    a = np.abs(v) ** m
    tot = prob.mass(v, m)
    far = float(prob.w[outer] @ a[outer] + prob.tail_factor(m) * a[-1])
    return far / tot if tot > 0 else 0.0


def _descend(prob: DiscreteProblem, config: SolverConfig, v):
    """Sobolev-preconditioned projected descent on the constraint manifold."""
    p, q = prob.params.p, prob.params.q
    f, P = prob.free, prob.P
    history, checkpoints, flags = [], [], []
    Fv = prob.F(v)
    chol = None
    stall = 0
    it = 0
    switch = max(config.tol_residual, NEWTON_SWITCH if config.newton_polish else 0.0)
    for it in range(1, config.max_iters + 1):
        lam = prob.lam_hat(v)
        res = prob.residual(v, lam)
        history.append((it - 1, Fv, res))
        if (it - 1) % CHECKPOINT_EVERY == 0:
            checkpoints.append(_u_units(prob, v, lam))
        if res < switch:
            break
        if chol is None or it % REFACTOR_EVERY == 0:
            H = prob.Qz + np.diag(prob.w[f] * q * np.abs(v[f]) ** (q - 1))
            H[np.diag_indices_from(H)] += 1e-10 * float(np.max(np.diag(H)))
            chol = cho_factor(H)
        g = P.T @ prob.grad(v)
        c = P.T @ prob.mass_grad(v, p + 1)
        Hg = cho_solve(chol, g)
        Hc = cho_solve(chol, c)
        d = Hg - (c @ Hg) / (c @ Hc) * Hc
        slope = g @ d
        if not slope > 0:
            d, slope = g, g @ g
        t = config.step
        accepted = False
        z = v[f]
        while t > 1e-12:
            try:
                vn = prob.project(P @ np.maximum(z - t * d, 0.0))
            except ZeroMass:
                t *= config.step_backtrack
                continue
            Fn = prob.F(vn)
            if Fn <= Fv - config.armijo * t * slope:
                accepted = True
                break
            t *= config.step_backtrack
        if not accepted:
            flags.append("LineSearchFailed")
            break
        if it % config.rearrange_every == 0:
            try:
                rv = rearrange_decreasing(prob.profile(vn), moments=(p + 1, q + 1)).values
                rv = prob.project(rv)
                Fr = prob.F(rv)
                if Fr <= Fn:
                    vn, Fn = rv, Fr
            except (ParameterError, ZeroMass):
                pass
        rel = (Fv - Fn) / max(abs(Fv), 1e-300)
        stall = stall + 1 if rel < config.stagnation_rtol else 0
        v, Fv = vn, Fn
        if stall >= config.stagnation_window:
            flags.append("Stagnation")
            break
    else:
        flags.append("MaxIters")
    lam = prob.lam_hat(v)
    history.append((it, Fv, prob.residual(v, lam)))
    checkpoints.append(_u_units(prob, v, lam))
    return v, it, history, checkpoints, flags


def minimize(params: ProblemParams, config: SolverConfig = SolverConfig(),
             grid: Optional[RadialGrid] = None) -> MinimizerResult:
    grid = grid or default_grid(params)
    if grid.N != params.N:
        raise ParameterError("grid dimension does not match params")
    prob = DiscreteProblem(grid, params)
    v0 = _seed(prob, config)
    v, iters, history, checkpoints, flags = _descend(prob, config, v0)
    lam = prob.lam_hat(v)
    # polish only a tight descent limit: at the critical exponent the descent
    # loses mass to infinity and a collocation root there is a grid artefact
    tight_ok = prob.ball or tightness(prob, v) <= TIGHTNESS_MAX
    if config.newton_polish and tight_ok and prob.residual(v, lam) < NEWTON_ATTEMPT:
        vn, ln = _newton(prob, v, lam)
        if prob.residual(vn, ln) < prob.residual(v, lam) and np.all(vn[prob.free] > 0):
            v, lam = vn, ln
            flags.append("NewtonPolished")
            checkpoints.append(_u_units(prob, v, lam))
            history.append((iters + 1, prob.F(v), prob.residual(v, lam)))
    res = prob.residual(v, lam)
    tight = tightness(prob, v)
    monotone = bool(np.all(np.diff(v) <= 1e-12 * np.max(v)))
    if not lam > 0:
        flags.append("NegativeMultiplier")
    if tight > TIGHTNESS_MAX and not prob.ball:
        flags.append("MassEscape")
    converged = (res < config.tol_residual and lam > 0 and monotone
                 and (prob.ball or tight <= TIGHTNESS_MAX)
                 and bool(np.all(v[prob.free] > 0)))
    if not converged:
        flags.append("NotConverged")
    vprof = prob.profile(v)
    if prob.ball:
        u_sol = vprof
    else:
        u_sol = rescale_to_solution(vprof, lam, params) if lam > 0 else vprof
    witnessed = [(r, m) for r, m in checkpoints if r < NONEXIST_TAU and m > NONEXIST_DELTA]
    best = min(checkpoints, key=lambda c: c[0])
    return MinimizerResult(
        v=vprof, lam=float(lam), F_value=prob.F(v), u_solution=u_sol,
        iterations=iters, converged=bool(converged), residual=res, flags=flags,
        history=history, nonexistence_flag=not witnessed, tightness=tight,
        best_candidate={"pde_residual": best[0], "mass_q1": best[1],
                        "n_checkpoints": len(checkpoints), "n_witnesses": len(witnessed)})


def minimize_K(params: ProblemParams, config: SolverConfig = SolverConfig(),
               grid: Optional[RadialGrid] = None) -> MinimizerResult:
    """Whole-space minimiser of F on ∫|v|^{p+1} = 1 and the rescaled solution."""
    if params.is_ball:
        raise ParameterError("minimize_K is for the whole space; use minimize_S_ball")
    return minimize(params, config, grid)


def minimize_S_ball(params: ProblemParams, config: SolverConfig = SolverConfig(),
                    grid: Optional[RadialGrid] = None) -> MinimizerResult:
    """Ball minimiser with u ≡ 0 outside B(R_dom); positive part kept each step."""
    if not params.is_ball:
        raise ParameterError("minimize_S_ball needs a Ball domain")
    return minimize(params, config, grid)
