"""Problem parameters, normalising constants, radial grids and profiles."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Union

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy.special import gamma as Gamma

from ._spline import SplineMap, endpoint_derivative_row
from .errors import ParameterError

CRITICAL_TOL = 1e-12


# ---------------------------------------------------------------------------
# parameters and constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WholeSpace:
    pass


@dataclass(frozen=True)
class Ball:
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ParameterError(f"Ball radius must be positive, got {self.radius}")


Domain = Union[WholeSpace, Ball]


class Classification(str, enum.Enum):
    SUBCRITICAL = "Subcritical"
    CRITICAL = "Critical"
    SUPERCRITICAL = "Supercritical"


@dataclass(frozen=True)
class ProblemParams:
    N: int
    s: float
    p: float
    q: float
    domain: Domain = field(default_factory=WholeSpace)
    crit: float = field(init=False)
    q_min: float = field(init=False)
    classification: Classification = field(init=False)

    def __post_init__(self):
        N, s, p = self.N, self.s, self.p
        crit = (N + 2 * s) / (N - 2 * s)
        object.__setattr__(self, "crit", crit)
        object.__setattr__(self, "q_min", (p - 1) * N / (2 * s) - 1)
        if abs(p - crit) <= CRITICAL_TOL:
            cls = Classification.CRITICAL
        elif p > crit:
            cls = Classification.SUPERCRITICAL
        else:
            cls = Classification.SUBCRITICAL
        object.__setattr__(self, "classification", cls)

    @property
    def is_ball(self) -> bool:
        return isinstance(self.domain, Ball)

    @property
    def decay_exponent(self) -> float:
        """N - 2s, the far-field decay rate of whole-space solutions."""
        return self.N - 2 * self.s

    @property
    def two_star(self) -> float:
        return 2 * self.N / (self.N - 2 * self.s)


def make_params(N: int, s: float, p: float, q: float,
                domain: Optional[Domain] = None) -> ProblemParams:
    """Validate and build a :class:`ProblemParams`.

    Raises ParameterError for s outside (0, 1), N <= 2s, p <= 1 or q <= p.
    """
    if int(N) != N or N < 1:
        raise ParameterError(f"N must be a positive integer, got {N}")
    if not 0 < s < 1:
        raise ParameterError(f"s must lie in (0, 1), got {s}")
    if not N > 2 * s:
        raise ParameterError(f"N > 2s violated: N={N}, 2s={2 * s}")
    if not p > 1:
        raise ParameterError(f"p must exceed 1, got {p}")
    if not q > p:
        raise ParameterError(f"q > p violated: q={q}, p={p}")
    return ProblemParams(int(N), float(s), float(p), float(q),
                         domain if domain is not None else WholeSpace())


@dataclass(frozen=True)
class OperatorParams:
    """Just (N, s), for operator evaluations outside the N > 2s regime of
    the nonlinear problem (e.g. N = 1, s = 1/2)."""
    N: int
    s: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ParameterError(f"N must be a positive integer, got {self.N}")
        if not 0 < self.s < 1:
            raise ParameterError(f"s must lie in (0, 1), got {self.s}")


@dataclass(frozen=True)
class Constants:
    c_Ns: float
    k_2s: float


def constants_for(params_or_N, s: Optional[float] = None) -> Constants:
    """c_{N,s} of the singular integral and k_{2s} of the extension trace."""
    if s is None:
        N, s = params_or_N.N, params_or_N.s
    else:
        N = params_or_N
    c = 2 ** (2 * s) * s * Gamma(N / 2 + s) / (math.pi ** (N / 2) * Gamma(1 - s))
    k = Gamma(s) / (2 ** (1 - 2 * s) * Gamma(1 - s))
    return Constants(float(c), float(k))


def sphere_area(N: int) -> float:
    """Surface area of the unit sphere in R^N (2 for N = 1)."""
    return 2 * math.pi ** (N / 2) / math.gamma(N / 2)


def sobolev_constant(N: int, s: float) -> float:
    """Sharp S with S * |u|_{2*}^2 <= |u|_{H^s}^2 (multiplier normalisation)."""
    return (2 ** (2 * s) * math.pi ** s * math.gamma((N + 2 * s) / 2)
            / math.gamma((N - 2 * s) / 2)
            * (math.gamma(N / 2) / math.gamma(N)) ** (2 * s / N))


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

class RadialGrid:
    """Ascending radial nodes with quadrature weights for the measure
    ``omega_N r^(N-1) dr`` over [nodes[0], nodes[-1]].

    The weights integrate the interpolating cubic spline exactly, so they
    are exact for cubic polynomials in r.
    """

    def __init__(self, nodes, N: int, grading: str = "custom",
                 ratio: Optional[float] = None):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or len(nodes) < 4:
            raise ParameterError("a grid needs at least 4 nodes")
        if nodes[0] < 0 or np.any(np.diff(nodes) <= 0):
            raise ParameterError("grid nodes must be nonnegative and strictly increasing")
        self.nodes = nodes
        self.nodes.flags.writeable = False
        self.N = int(N)
        self.grading = grading
        self.ratio = ratio

    def __len__(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:
        return (f"RadialGrid(M={len(self)}, N={self.N}, r0={self.nodes[0]:.3g}, "
                f"r_cut={self.r_cut:.3g}, grading={self.grading!r})")

    @property
    def r_cut(self) -> float:
        return float(self.nodes[-1])

    @property
    def has_origin(self) -> bool:
        return self.nodes[0] == 0.0

    @cached_property
    def key(self) -> bytes:
        """Scale-free fingerprint: identical for grids that differ by a dilation."""
        return (self.nodes / self.r_cut).tobytes() + bytes([self.N])

    def scaled(self, factor: float) -> "RadialGrid":
        return RadialGrid(self.nodes * factor, self.N, self.grading, self.ratio)

    def spline_map(self, right: Optional[np.ndarray] = None) -> SplineMap:
        M = len(self)
        if self.has_origin:
            left = np.zeros(M)
        else:
            left = endpoint_derivative_row(self.nodes, at_start=True)
        if right is None:
            right = endpoint_derivative_row(self.nodes, at_start=False)
        return SplineMap(self.nodes, left, right)

    @cached_property
    def weights(self) -> np.ndarray:
        w = sphere_area(self.N) * self.spline_map().moments(self.N - 1)
        # round-off level negatives (the origin weight in N >= 2)
        w[np.abs(w) < 1e-13 * np.max(np.abs(w))] = 0.0
        # on coarse grids the origin weight can be a genuine O(h^{N+1})
        # negative; it is lumped into the next node, which keeps the rule
        # exact for constants and all weights nonnegative
        if self.has_origin and w[0] < 0:
            w[1] += w[0]
            w[0] = 0.0
        w.flags.writeable = False
        return w

    def integrate(self, values) -> float:
        """Integral of the radial function with these node values over the
        grid's shell [r_0, r_cut] in R^N."""
        return float(self.weights @ np.asarray(values, float))

    def spacing_at(self, r) -> np.ndarray:
        """Local node spacing; beyond r_cut it grows like the last spacing ratio."""
        r = np.asarray(r, float)
        h = np.diff(self.nodes)
        node_h = np.minimum(np.r_[h[0], h], np.r_[h, h[-1]])
        inside = np.interp(r, self.nodes, node_h)
        beyond = h[-1] * r / self.r_cut
        return np.where(r > self.r_cut, beyond, inside)


def make_log_grid(r_min: float, r_cut: float, M: int, N: int,
                  include_origin: bool = True) -> RadialGrid:
    """Geometrically graded radial grid with M nodes ending at r_cut.

    With ``include_origin`` the nodes start at 0 and the spacings grow by a
    constant ratio from a first step of r_min, so there is no jump in
    spacing next to the origin.  Without it the nodes themselves are
    geometric, r_min * ratio**j.
    """
    if M < 16:
        raise ParameterError(f"M must be at least 16, got {M}")
    if not 0 < r_min < r_cut:
        raise ParameterError(f"need 0 < r_min < r_cut, got {r_min}, {r_cut}")
    if include_origin:
        n = M - 1
        if r_min * n >= r_cut:
            raise ParameterError("r_min too large for a graded grid with this M")
        def f(lr):
            with np.errstate(over="ignore"):
                return r_min * np.expm1(n * lr) / np.expm1(lr) - r_cut
        lr = brentq(f, 1e-14, math.log(r_cut / r_min) + 1.0, xtol=1e-15, rtol=1e-15)
        nodes = r_min * np.expm1(np.arange(M) * lr) / math.expm1(lr)
        ratio = math.exp(lr)
    else:
        nodes = np.geomspace(r_min, r_cut, M)
        ratio = (r_cut / r_min) ** (1.0 / (M - 1))
    nodes[-1] = r_cut
    return RadialGrid(nodes, N, grading="log", ratio=float(ratio))


def make_uniform_grid(r_cut: float, M: int, N: int) -> RadialGrid:
    if M < 16:
        raise ParameterError(f"M must be at least 16, got {M}")
    if not r_cut > 0:
        raise ParameterError("r_cut must be positive")
    return RadialGrid(np.linspace(0.0, r_cut, M), N, grading="uniform")


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZeroTail:
    """u = 0 beyond the last node."""


@dataclass(frozen=True)
class PowerLaw:
    """u(r) = amplitude * r**(-exponent) beyond the last node.

    exponent 0 is the constant extension.
    """
    amplitude: float
    exponent: float

    def __post_init__(self):
        if not self.exponent >= 0:
            raise ParameterError(f"tail exponent must be >= 0, got {self.exponent}")

    def __call__(self, r):
        return self.amplitude * np.asarray(r, float) ** (-self.exponent)


Tail = Union[ZeroTail, PowerLaw]
ZERO_TAIL = ZeroTail()


@dataclass(frozen=True, eq=False)
class RadialProfile:
    grid: RadialGrid
    values: np.ndarray
    tail: Optional[Tail] = ZERO_TAIL

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (len(self.grid),):
            raise ParameterError(f"values shape {v.shape} does not match grid size {len(self.grid)}")
        if not np.all(np.isfinite(v)):
            raise ParameterError("profile values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        if isinstance(self.tail, PowerLaw):
            scale = max(np.max(np.abs(v)), 1e-300)
            jump = abs(v[-1] - self.tail(self.grid.r_cut))
            if jump / scale >= 1e-6:
                raise ParameterError(
                    f"tail splice discontinuous at r_cut: relative jump {jump / scale:.3e}")

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def N(self) -> int:
        return self.grid.N

    def with_values(self, values, tail="same") -> "RadialProfile":
        """Same grid and tail kind; a PowerLaw tail is re-spliced to the new
        last value."""
        values = np.asarray(values, float)
        if tail == "same":
            tail = self.tail
            if isinstance(tail, PowerLaw):
                tail = spliced_tail(self.grid, values, tail.exponent)
        return RadialProfile(self.grid, values, tail)

    @cached_property
    def _pchip(self):
        return PchipInterpolator(self.grid.nodes, self.values, extrapolate=False)

    def __call__(self, r):
        return eval_profile(self, r)


def spliced_tail(grid: RadialGrid, values, exponent: float) -> PowerLaw:
    """PowerLaw tail continuous with the last nodal value."""
    return PowerLaw(float(values[-1]) * grid.r_cut ** exponent, float(exponent))


def power_tail_profile(grid: RadialGrid, values, exponent: float) -> RadialProfile:
    values = np.asarray(values, float)
    return RadialProfile(grid, values, spliced_tail(grid, values, exponent))


def sample(grid: RadialGrid, f, tail_exponent: Optional[float] = None) -> RadialProfile:
    """Profile of the callable f on ``grid``; spliced PowerLaw tail if an
    exponent is given, Zero tail otherwise."""
    values = np.asarray(f(grid.nodes), float)
    if tail_exponent is None:
        return RadialProfile(grid, values, ZERO_TAIL)
    return power_tail_profile(grid, values, tail_exponent)


def eval_profile(profile: RadialProfile, r):
    """Monotone cubic (PCHIP) inside the grid, the tail model beyond r_cut.

    Below the first node of a grid without the origin the profile is
    continued as the power law through the first two nodes (constant if
    they are not both positive).
    """
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    if np.any(r < 0):
        raise ParameterError("radius must be nonnegative")
    nodes, vals = profile.grid.nodes, profile.values
    out = np.empty_like(r)
    inside = (r >= nodes[0]) & (r <= nodes[-1])
    out[inside] = profile._pchip(r[inside])
    # exact values at nodes
    idx = np.searchsorted(nodes, r[inside])
    idx = np.clip(idx, 0, len(nodes) - 1)
    hit = nodes[idx] == r[inside]
    tmp = out[inside]
    tmp[hit] = vals[idx[hit]]
    out[inside] = tmp
    beyond = r > nodes[-1]
    tail = profile.tail
    if isinstance(tail, PowerLaw):
        out[beyond] = tail(r[beyond])
    else:
        out[beyond] = 0.0
    below = r < nodes[0]
    if np.any(below):
        v0, v1 = vals[0], vals[1]
        if v0 > 0 and v1 > 0:
            slope = math.log(v1 / v0) / math.log(nodes[1] / nodes[0])
            with np.errstate(divide="ignore"):
                out[below] = v0 * (r[below] / nodes[0]) ** slope
        else:
            out[below] = v0
    return float(out[0]) if scalar else out
