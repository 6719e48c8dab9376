"""Fourier-multiplier evaluation of (-Δ)^s on a periodic box, N in {1, 2}.

Used only as an independent oracle for the radial singular-integral code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import zeta

from .errors import BoundaryLeak, NotRadial, ParameterError
from .model import RadialGrid, RadialProfile, ZERO_TAIL, constants_for

LEAK_TOL = 1e-12
RADIAL_TOL = 1e-8
LATTICE_K = 32


@dataclass(frozen=True, eq=False)
class UniformField:
    """Samples on the periodic box [-L, L)^N with M points per axis."""
    L: float
    M: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, float)
        if self.M < 2 or self.M & (self.M - 1):
            raise ParameterError(f"M must be a power of two, got {self.M}")
        if v.ndim not in (1, 2) or any(n != self.M for n in v.shape):
            raise ParameterError(f"values shape {v.shape} is not (M,) or (M, M)")
        if not np.all(np.isfinite(v)):
            raise ParameterError("values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.values.ndim

    @property
    def dx(self) -> float:
        return 2 * self.L / self.M

    @property
    def axis(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(self.M)

    def coords(self):
        x = self.axis
        return np.meshgrid(*([x] * self.N), indexing="ij")

    def radius(self) -> np.ndarray:
        return np.sqrt(sum(c * c for c in self.coords()))


def sample_field(f, L: float, M: int, N: int) -> UniformField:
    """UniformField of the radial function f(|x|)."""
    x = -L + (2 * L / M) * np.arange(M)
    r = np.abs(x) if N == 1 else np.hypot(*np.meshgrid(x, x, indexing="ij"))
    return UniformField(L, M, np.asarray(f(r), float))


def _image_sums(field: UniformField, exponents) -> list:
    """Σ_{k ≠ 0} |x + 2Lk|^{-a} at every sample, for each a in exponents."""
    P = 2 * field.L
    if field.N == 1:
        q = field.axis / P
        return [P ** (-a) * (zeta(a, 1 + q) + zeta(a, 1 - q)) for a in exponents]
    X, Y = field.coords()
    outs = [np.zeros_like(X) for _ in exponents]
    K = LATTICE_K
    for i in range(-K, K + 1):
        for j in range(-K, K + 1):
            if i == 0 and j == 0:
                continue
            logd = -0.5 * np.log((X + P * i) ** 2 + (Y + P * j) ** 2)
            for o, a in zip(outs, exponents):
                o += np.exp(a * logd)
    # lattice points outside the square, replaced by the integral of |Pk|^{-a}
    # over the plane minus [-K-1/2, K+1/2]^2 (eight octants)
    Keff = K + 0.5
    for o, a in zip(outs, exponents):
        oct_, _ = quad(lambda t: (1 + t * t) ** (-a / 2), 0.0, 1.0)
        o += P ** (-a) * 8 * Keff ** (2 - a) / (a - 2) * oct_
    return outs


def _image_correction(f: UniformField, s: float, order: int = 3) -> np.ndarray:
    """Σ_k m_{2k} Δ^k|y|^{-a} / (4^k k! (N/2)_k) summed over the images k ≠ 0.

    Uses the radial mean of (z·∇)^{2k}/(2k)! and
    Δ^k |y|^{-a} = Π_j (a+2j)(a+2j+2-N) |y|^{-a-2k}.
    """
    N = f.N
    a = N + 2 * s
    cell = f.dx ** N
    r2 = f.radius() ** 2
    v = f.values
    sums = _image_sums(f, [a + 2 * k for k in range(order + 1)])
    corr = np.zeros_like(v)
    coef = 1.0
    for k in range(order + 1):
        if k > 0:
            coef *= (a + 2 * k - 2) * (a + 2 * k - N) / (4 * k * (N / 2 + k - 1))
        corr += coef * float((r2 ** k * v).sum() * cell) * sums[k]
    return corr


def fraclap_spectral(f: UniformField, s: float, image_correction: bool = True,
                     check_decay: bool = True) -> UniformField:
    """|ξ|^{2s} multiplier on the discrete frequencies, zero mode dropped.

    The FFT acts on the periodisation of f, whose operator image is the sum
    of all translates of (-Δ)^s f.  With ``image_correction`` the translates
    k ≠ 0 are removed using the multipole expansion of the far field
    -c_{N,s} ∫ f(z) |y - z|^{-N-2s} dz in even moments of the samples.
    """
    if not 0 < s <= 1:
        raise ParameterError(f"s must lie in (0, 1], got {s}")
    v = f.values
    N = f.N
    if check_decay:
        edge = np.concatenate([np.take(v, 0, axis=ax).ravel() for ax in range(N)])
        peak = float(np.max(np.abs(v)))
        if peak > 0 and np.max(np.abs(edge)) > LEAK_TOL * peak:
            raise BoundaryLeak(
                f"boundary values {np.max(np.abs(edge)):.3e} exceed {LEAK_TOL:g} of the peak")
    xi1 = 2 * np.pi * np.fft.fftfreq(f.M, d=f.dx)
    xi2 = sum(g ** 2 for g in np.meshgrid(*([xi1] * N), indexing="ij"))
    mult = xi2 ** s
    out = np.real(np.fft.ifftn(mult * np.fft.fftn(v)))
    if image_correction and s < 1:
        out = out + constants_for(N, s).c_Ns * _image_correction(f, s)
    return UniformField(f.L, f.M, out)


def restrict_to_radial(f: UniformField) -> RadialProfile:
    """Average samples over exact radius classes and return the radial profile."""
    v = f.values
    M = f.M
    peak = max(float(np.max(np.abs(v))), 1e-300)
    refl = (M - np.arange(M)) % M
    if f.N == 1:
        defect = np.max(np.abs(v - v[refl]))
    else:
        defect = max(np.max(np.abs(v - v[refl, :])), np.max(np.abs(v - v[:, refl])),
                     np.max(np.abs(v - v.T)))
    if defect > RADIAL_TOL * peak:
        raise NotRadial(f"symmetry defect {defect / peak:.3e} relative")
    # integer squared radius in units of dx (x_j = (j - M/2) dx)
    idx = np.arange(M) - M // 2
    if f.N == 1:
        key = idx ** 2
    else:
        I, J = np.meshgrid(idx, idx, indexing="ij")
        key = I ** 2 + J ** 2
    key = key.ravel()
    vals = v.ravel()
    uniq, inv = np.unique(key, return_inverse=True)
    sums = np.bincount(inv, weights=vals)
    counts = np.bincount(inv)
    radii = np.sqrt(uniq.astype(float)) * f.dx
    grid = RadialGrid(radii, f.N, grading="custom")
    return RadialProfile(grid, sums / counts, ZERO_TAIL)
