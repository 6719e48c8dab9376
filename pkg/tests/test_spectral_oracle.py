import math

import numpy as np
import pytest
from scipy.integrate import quad

from fraclab.errors import BoundaryLeak, NotRadial, ParameterError
from fraclab.spectral_oracle import (UniformField, fraclap_spectral, restrict_to_radial,
                                     sample_field)


def test_plane_wave_is_eigenfunction():
    L, M = math.pi, 64
    x = -L + (2 * L / M) * np.arange(M)
    f = UniformField(L, M, np.cos(3 * x))
    out = fraclap_spectral(f, 0.5, image_correction=False, check_decay=False)
    assert np.allclose(out.values, 3.0 * np.cos(3 * x), atol=1e-12)


def test_plane_wave_2d():
    L, M = math.pi, 32
    x = -L + (2 * L / M) * np.arange(M)
    X, Y = np.meshgrid(x, x, indexing="ij")
    v = np.cos(2 * X) * np.cos(Y)
    out = fraclap_spectral(UniformField(L, M, v), 0.3, image_correction=False, check_decay=False)
    assert np.allclose(out.values, 5 ** 0.3 * v, atol=1e-12)


def test_semigroup_composition(rng):
    L, M = math.pi, 64
    v = rng.normal(size=M)
    v -= v.mean()
    f = UniformField(L, M, v)
    a = fraclap_spectral(fraclap_spectral(f, 0.2, False, False), 0.3, False, False)
    b = fraclap_spectral(f, 0.5, False, False)
    assert np.allclose(a.values, b.values, atol=1e-10)


def test_parseval_energy(rng):
    L, M = math.pi, 128
    v = rng.normal(size=M)
    f = UniformField(L, M, v)
    Lf = fraclap_spectral(f, 0.4, False, False)
    lhs = float(np.sum(v * Lf.values))
    vh = np.fft.fft(v)
    k = np.fft.fftfreq(M, d=2 * L / M) * 2 * math.pi
    rhs = float(np.sum(np.abs(k) ** 0.8 * np.abs(vh) ** 2) / M)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_gaussian_at_origin_against_quadrature():
    # (-Δ)^s e^{-x²/2}(0) = (1/π) ∫_0^∞ ξ^{2s} √(2π) e^{-ξ²/2} dξ
    s = 0.5
    ref = quad(lambda k: k ** (2 * s) * math.sqrt(2 * math.pi) * math.exp(-k * k / 2),
               0, np.inf)[0] / math.pi
    f = sample_field(lambda r: np.exp(-r * r / 2), 20.0, 4096, 1)
    out = fraclap_spectral(f, s)
    assert abs(out.values[2048] - ref) < 1e-6


def test_image_correction_matters():
    f = sample_field(lambda r: np.exp(-r * r / 2), 20.0, 4096, 1)
    ref = math.sqrt(2 / math.pi)        # 2^{1/2} Γ(1) / Γ(1/2)
    raw = fraclap_spectral(f, 0.5, image_correction=False).values[2048]
    fixed = fraclap_spectral(f, 0.5).values[2048]
    assert abs(fixed - ref) < abs(raw - ref) / 10


def test_restrict_to_radial_2d():
    f = sample_field(lambda r: np.exp(-r * r), 8.0, 64, 2)
    prof = restrict_to_radial(f)
    assert prof.grid.nodes[0] == 0.0
    assert np.allclose(prof.values, np.exp(-prof.grid.nodes ** 2), atol=1e-14)


def test_not_radial():
    L, M = 8.0, 64
    x = -L + (2 * L / M) * np.arange(M)
    X, Y = np.meshgrid(x, x, indexing="ij")
    with pytest.raises(NotRadial):
        restrict_to_radial(UniformField(L, M, np.exp(-(X - 1) ** 2 - Y ** 2)))


def test_boundary_leak():
    f = sample_field(lambda r: 1 / (1 + r * r), 10.0, 256, 1)
    with pytest.raises(BoundaryLeak):
        fraclap_spectral(f, 0.5)


def test_field_validation():
    with pytest.raises(ParameterError):
        UniformField(1.0, 100, np.zeros(100))
    with pytest.raises(ParameterError):
        UniformField(1.0, 64, np.zeros(32))
    with pytest.raises(ParameterError):
        fraclap_spectral(UniformField(1.0, 64, np.zeros(64)), 1.5)
