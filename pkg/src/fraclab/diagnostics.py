"""Identity residuals, decay fits and Kelvin checks on a radial profile.

Everything here takes a profile (typically a computed solution of
(-Δ)^s u = u^p - u^q) and returns numbers; nothing is asserted.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.stats import linregress

from .errors import (FitIllConditioned, FracLabError, NonpositiveValues,
                     ParameterError)
from .model import (PowerLaw, ProblemParams, RadialGrid, RadialProfile, ZeroTail,
                    make_log_grid, sobolev_constant, sphere_area, spliced_tail)
from .radial_fraclap import (fraclap_at, fraclap_radial, gagliardo_energy,
                             outer_radii, whole_space_integral)
from .variational import NONEXIST_DELTA, NONEXIST_TAU

NONPOWER_RATIO = 0.2
KELVIN_WINDOW = (0.5, 2.0)
FIT_WINDOW = (0.3, 0.8)     # fractions of r_cut


@dataclass
class DiagnosticsReport:
    pde_residual: float = math.nan
    pohozaev_residual: float = math.nan
    pohozaev_relative: float = math.nan
    energy_identity_residual: float = math.nan
    tail_exponent_fit: float = math.nan
    tail_exponent_stderr: float = math.nan
    grad_tail_exponent_fit: float = math.nan
    grad_tail_exponent_stderr: float = math.nan
    kelvin_covariance_error: float = math.nan
    monotone: bool = False
    linf: float = math.nan
    lemma_radest_constant: float = math.nan
    critical_flag: str = ""
    nonexistence_flag: bool = False
    fit_window: Tuple[float, float] = (math.nan, math.nan)
    flags: list = field(default_factory=list)
    errors: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fit_window"] = list(self.fit_window)
        return d


# ---------------------------------------------------------------------------
# integrals over R^N
# ---------------------------------------------------------------------------

def _integral(u: RadialProfile, g: Callable[[np.ndarray], np.ndarray]) -> float:
    """∫_{R^N} g(u(x)) dx; beyond r_cut the tail model is sampled on the
    outer shells so that any g is handled by one linear rule."""
    inner = np.asarray(g(u.values), float)
    if not isinstance(u.tail, PowerLaw):
        return u.grid.integrate(inner)
    ro = outer_radii(u.grid)
    return whole_space_integral(u.grid, inner, ro, np.asarray(g(u.tail(ro)), float))


def _pos(x):
    return np.maximum(x, 0.0)


def _A(m: float, N: int, s: float) -> float:
    return (N - 2 * s) / 2 - N / (m + 1)


def pohozaev_residual(u: RadialProfile, params: ProblemParams) -> Tuple[float, float]:
    """A(p)∫u^{p+1} - A(q)∫u^{q+1} with A(m) = (N-2s)/2 - N/(m+1).

    Returns (|R|, |R| / (|A(q)|∫u^{q+1} + 1e-300)).
    """
    N, s, p, q = params.N, params.s, params.p, params.q
    mp = _integral(u, lambda t: _pos(t) ** (p + 1))
    mq = _integral(u, lambda t: _pos(t) ** (q + 1))
    R = abs(_A(p, N, s) * mp - _A(q, N, s) * mq)
    return R, R / (abs(_A(q, N, s)) * mq + 1e-300)


def pohozaev_general_f(u: RadialProfile, f: Callable, F: Callable,
                       params: ProblemParams) -> float:
    """(N-2s)∫u f(u) - 2N∫F(u) for F(t) = ∫_0^t f."""
    N, s = params.N, params.s
    return ((N - 2 * s) * _integral(u, lambda t: t * f(t))
            - 2 * N * _integral(u, F))


def power_nonlinearity(p: float, q: float):
    """(f, F) for f(t) = t^p - t^q on t >= 0."""
    f = lambda t: _pos(t) ** p - _pos(t) ** q
    F = lambda t: _pos(t) ** (p + 1) / (p + 1) - _pos(t) ** (q + 1) / (q + 1)
    return f, F


def energy_identity_residual(u: RadialProfile, params: ProblemParams, lam: float = 1.0,
                             c: float = 1.0) -> float:
    """|‖u‖² - ∫(λu^{p+1} - c u^{q+1})| / ‖u‖², the seminorm taken from the
    squared-difference quadrature."""
    if not np.any(u.values):
        return 0.0
    E = gagliardo_energy(u, params)
    p, q = params.p, params.q
    rhs = _integral(u, lambda t: lam * _pos(t) ** (p + 1) - c * _pos(t) ** (q + 1))
    return abs(E - rhs) / (abs(E) + 1e-300)


def pde_residual(u: RadialProfile, params: ProblemParams, lam: float = 1.0,
                 c: float = 1.0, relative: bool = False) -> float:
    """Quadrature norm of (-Δ)^s u - λ u^p + c u^q over the nodes (interior
    of the ball for Dirichlet problems).

    λ = c = 1 is the equation itself; other values cover the constrained
    (λ) and the scaled (c*) forms.  ``relative`` divides by the norm of
    (-Δ)^s u, which makes the number invariant under the rescalings that map
    one form to another.
    """
    if not np.any(u.values):
        return 0.0
    Lu = fraclap_radial(u, params, error_estimate=False).profile.values
    a = _pos(u.values)
    r = Lu - lam * a ** params.p + c * a ** params.q
    w = np.array(u.grid.weights)
    if params.is_ball:
        w[u.grid.nodes >= params.domain.radius] = 0.0
    norm = math.sqrt(w @ (r * r))
    if relative:
        norm /= math.sqrt(w @ (Lu * Lu)) + 1e-300
    return float(norm)


def _half_width(u: RadialProfile) -> float:
    r, v = u.grid.nodes, u.values
    below = np.nonzero(v <= 0.5 * v[0])[0]
    return float(r[below[0]]) if len(below) else float(r[-1]) / 4


def weak_residual(u: RadialProfile, params: ProblemParams, lam: float = 1.0,
                  c: float = 1.0, n_tests: int = 5, seed: int = 0) -> float:
    """max_φ |B(u, φ) - ∫(λu^p - c u^q)φ| / ‖φ‖_{L²} over random Gaussian
    bumps φ, where B is the Gagliardo bilinear form from the
    squared-difference quadrature (polarisation of gagliardo_energy)."""
    rng = np.random.default_rng(seed)
    r = u.grid.nodes
    ell = _half_width(u)
    a = _pos(u.values)
    f = lam * a ** params.p - c * a ** params.q
    worst = 0.0
    for _ in range(n_tests):
        centre = rng.uniform(0.0, 2.0 * ell)
        width = rng.uniform(0.25, 1.0) * ell
        phi = np.exp(-0.5 * ((r - centre) / width) ** 2)
        if params.is_ball:
            phi *= np.maximum(1 - (r / params.domain.radius) ** 2, 0.0) ** 2
        B = 0.25 * (gagliardo_energy(u.with_values(u.values + phi), params)
                    - gagliardo_energy(u.with_values(u.values - phi), params))
        rhs = u.grid.integrate(f * phi)
        worst = max(worst, abs(B - rhs) / math.sqrt(u.grid.integrate(phi * phi)))
    return worst


# ---------------------------------------------------------------------------
# decay fits
# ---------------------------------------------------------------------------

def default_window(u: RadialProfile) -> Tuple[float, float]:
    return FIT_WINDOW[0] * u.grid.r_cut, FIT_WINDOW[1] * u.grid.r_cut


def _loglog_fit(r: np.ndarray, y: np.ndarray, what: str) -> Tuple[float, float]:
    if len(r) < 3:
        raise FitIllConditioned(f"only {len(r)} nodes in the fit window")
    if np.any(y <= 0):
        raise NonpositiveValues(f"{what} is not positive on the fit window")
    fit = linregress(np.log(r), np.log(y))
    return float(fit.slope), float(fit.stderr)


def _window_mask(u: RadialProfile, window) -> np.ndarray:
    lo, hi = window
    if not 0 < lo < hi:
        raise ParameterError(f"fit window must satisfy 0 < r_lo < r_hi, got {window}")
    if hi > u.grid.r_cut * (1 + 1e-12):
        raise ParameterError(f"fit window {window} extends beyond r_cut = {u.grid.r_cut}")
    r = u.grid.nodes
    return (r >= lo) & (r <= hi)


def fit_tail_exponent(u: RadialProfile, fit_window=None) -> Tuple[float, float]:
    """Least-squares slope of log u against log r on the window: (slope, stderr)."""
    window = fit_window or default_window(u)
    m = _window_mask(u, window)
    return _loglog_fit(u.grid.nodes[m], u.values[m], "u")


def centered_derivative(u: RadialProfile) -> np.ndarray:
    """u'(r) at the nodes: three-point centred differences on the nonuniform
    grid, second-order one-sided formulas at both ends."""
    r, v = u.grid.nodes, u.values
    if len(r) < 3:
        raise ParameterError("derivative needs at least 3 nodes")
    d = np.empty_like(v)
    h1 = r[1:-1] - r[:-2]
    h2 = r[2:] - r[1:-1]
    d[1:-1] = (h1 * h1 * v[2:] - h2 * h2 * v[:-2] + (h2 * h2 - h1 * h1) * v[1:-1]) \
        / (h1 * h2 * (h1 + h2))
    for i, (j, k) in ((0, (1, 2)), (-1, (-2, -3))):
        a, b = r[j] - r[i], r[k] - r[i]
        d[i] = (b * b * (v[j] - v[i]) - a * a * (v[k] - v[i])) / (a * b * (b - a))
    return d


def fit_gradient_tail(u: RadialProfile, fit_window=None) -> Tuple[float, float]:
    """Slope of log|u'| against log r on the window: (slope, stderr)."""
    window = fit_window or default_window(u)
    m = _window_mask(u, window)
    du = np.abs(centered_derivative(u))
    return _loglog_fit(u.grid.nodes[m], du[m], "|u'|")


def is_power_law(slope: float, stderr: float) -> bool:
    return bool(stderr <= NONPOWER_RATIO * abs(slope))


# ---------------------------------------------------------------------------
# Kelvin transform
# ---------------------------------------------------------------------------

def _interp_positive(u: RadialProfile, x: np.ndarray) -> np.ndarray:
    """u(x) with monotone cubic interpolation of log u against log r on the
    positive nodes, exact for power laws.  Falls back to eval_profile where
    that is not possible (below the first positive node, nonpositive data,
    beyond r_cut)."""
    r, v = u.grid.nodes, u.values
    out = np.asarray(u(x), float)
    pos = r > 0
    if np.count_nonzero(pos) < 2 or np.any(v[pos] <= 0):
        return out
    rp = r[pos]
    inside = (x >= rp[0]) & (x <= rp[-1])
    if np.any(inside):
        f = PchipInterpolator(np.log(rp), np.log(v[pos]), extrapolate=False)
        out[inside] = np.exp(f(np.log(x[inside])))
    return out


def kelvin_transform(u: RadialProfile, params, grid: Optional[RadialGrid] = None
                     ) -> RadialProfile:
    """r ↦ r^{2s-N} u(1/r) sampled on ``grid`` (default: the grid of u).

    Beyond r_cut the image behaves like u(0) r^{2s-N}; at r = 0 the value is
    the limit of r^{2s-N} u(1/r), read off u's tail.
    """
    N, s = params.N, params.s
    d = N - 2 * s
    grid = grid or u.grid
    r = grid.nodes
    out = np.empty_like(r)
    pos = r > 0
    out[pos] = r[pos] ** (-d) * _interp_positive(u, 1.0 / r[pos])
    if not np.all(pos):
        tail = u.tail
        if isinstance(tail, ZeroTail) or tail is None:
            out[~pos] = 0.0
        elif tail.exponent > d or tail.amplitude == 0.0:
            out[~pos] = 0.0
        elif abs(tail.exponent - d) < 1e-12:
            out[~pos] = tail.amplitude
        else:
            raise ParameterError(
                f"tail exponent {tail.exponent} < N-2s: Kelvin image unbounded at 0")
    return RadialProfile(grid, out, spliced_tail(grid, out, d))


def kelvin_grid(u: RadialProfile) -> RadialGrid:
    """Log grid on [0, R] with first step 1/R, R = r_cut of u.

    Inversion maps the coarse outer part of u's grid to small radii, so the
    image is sampled on a grid that is geometric over [1/R, R] instead of on
    u's own grid.
    """
    R = u.grid.r_cut
    return make_log_grid(1.0 / R, R, len(u.grid), u.grid.N)


def kelvin_covariance_error(u: RadialProfile, params, window=KELVIN_WINDOW) -> float:
    """Relative L² gap between (-Δ)^s ũ and |x|^{-N-2s} ((-Δ)^s u)(1/|x|) on
    the radii in ``window``, ũ sampled on kelvin_grid(u)."""
    N, s = params.N, params.s
    ku = kelvin_transform(u, params, kelvin_grid(u))
    r = ku.grid.nodes
    m = (r >= window[0]) & (r <= window[1])
    if np.count_nonzero(m) < 2:
        raise ParameterError(f"fewer than two nodes in the Kelvin window {window}")
    lhs = fraclap_at(ku, params, r[m])
    rhs = r[m] ** (-N - 2 * s) * fraclap_at(u, params, 1.0 / r[m])
    w = np.array(ku.grid.weights)[m]
    num = math.sqrt(w @ (lhs - rhs) ** 2)
    den = math.sqrt(w @ rhs ** 2) + 1e-300
    return float(num / den)


# ---------------------------------------------------------------------------
# monotonicity and the radial estimate
# ---------------------------------------------------------------------------

def is_monotone(u: RadialProfile) -> bool:
    v = u.values
    return bool(np.all(np.diff(v) <= 1e-12 * max(np.max(np.abs(v)), 1e-300)))


def radest_constant(u: RadialProfile, params) -> float:
    """max over nodes r >= 1 of u(r) r^{(N-2s)/2}."""
    r = u.grid.nodes
    m = r >= 1.0
    if not np.any(m):
        return 0.0
    return float(np.max(u.values[m] * r[m] ** ((params.N - 2 * params.s) / 2)))


def radest_bound(u: RadialProfile, params) -> float:
    """(N/ω_N)^{1/2*} S^{-1/2} ‖u‖_{Ḣ^s}: the a-priori bound on
    u(r) r^{(N-2s)/2} for radially nonincreasing u, S in the squared
    convention S‖u‖²_{2*} <= ‖u‖²."""
    N, s = params.N, params.s
    two_star = 2 * N / (N - 2 * s)
    E = gagliardo_energy(u, params) if np.any(u.values) else 0.0
    return ((N / sphere_area(N)) ** (1 / two_star)
            * sobolev_constant(N, s) ** -0.5 * math.sqrt(max(E, 0.0)))


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

def run_full_diagnostics(u: RadialProfile, params: ProblemParams, fit_window=None,
                         nonexistence_flag: Optional[bool] = None, lam: float = 1.0,
                         c: float = 1.0) -> DiagnosticsReport:
    """Every check on one profile; failures are recorded in ``errors``.

    ``lam`` and ``c`` select the equation (-Δ)^s u = λu^p - c u^q used by
    the PDE and energy residuals (the Pohozaev check is for λ = c = 1).

    ``nonexistence_flag`` is echoed when given (the solver tracks it over
    its iterates); otherwise the τ/δ test is applied to u alone: a profile
    counts as a witness of existence only if its PDE residual is below τ
    while ∫u^{q+1} exceeds δ.
    """
    rep = DiagnosticsReport(critical_flag=params.classification.value)
    values = u.values
    rep.linf = float(np.max(np.abs(values))) if len(values) else 0.0
    rep.monotone = is_monotone(u)
    rep.lemma_radest_constant = radest_constant(u, params)
    window = tuple(fit_window) if fit_window is not None else default_window(u)
    rep.fit_window = (float(window[0]), float(window[1]))

    def attempt(name, fn):
        try:
            return fn()
        except (FracLabError, ValueError, FloatingPointError) as exc:
            rep.errors[name] = f"{type(exc).__name__}: {exc}"
            return None

    zero = not np.any(values)
    res = attempt("pde_residual", lambda: pde_residual(u, params, lam, c))
    if res is not None:
        rep.pde_residual = res
    ph = attempt("pohozaev_residual", lambda: pohozaev_residual(u, params))
    if ph is not None:
        rep.pohozaev_residual, rep.pohozaev_relative = ph
    en = attempt("energy_identity_residual",
                 lambda: energy_identity_residual(u, params, lam, c))
    if en is not None:
        rep.energy_identity_residual = en
    if zero:
        rep.kelvin_covariance_error = 0.0
    elif params.is_ball:
        # decay laws and the Kelvin map concern the whole-space problem
        rep.flags.append("DecayChecksSkippedOnBall")
    else:
        tf = attempt("tail_exponent_fit", lambda: fit_tail_exponent(u, window))
        if tf is not None:
            rep.tail_exponent_fit, rep.tail_exponent_stderr = tf
            if not is_power_law(*tf):
                rep.flags.append("NonPowerLaw")
        gf = attempt("grad_tail_exponent_fit", lambda: fit_gradient_tail(u, window))
        if gf is not None:
            rep.grad_tail_exponent_fit, rep.grad_tail_exponent_stderr = gf
            if not is_power_law(*gf):
                rep.flags.append("NonPowerLawGradient")
        kc = attempt("kelvin_covariance_error", lambda: kelvin_covariance_error(u, params))
        if kc is not None:
            rep.kelvin_covariance_error = kc
    if nonexistence_flag is None:
        mq = attempt("mass_q1", lambda: _integral(u, lambda t: _pos(t) ** (params.q + 1)))
        witness = (mq is not None and rep.pde_residual < NONEXIST_TAU
                   and mq > NONEXIST_DELTA)
        nonexistence_flag = not witness
    rep.nonexistence_flag = bool(nonexistence_flag)
    return rep
