import math

import numpy as np
import pytest
from scipy.integrate import quad

from fraclab.cs_extension import (critical_norm_sq, extend, extension_energy, neumann_trace,
                                  poisson_constant, with_values)
from fraclab.errors import ParameterError
from fraclab.model import OperatorParams, constants_for, make_log_grid, sample
from fraclab.radial_fraclap import gagliardo_energy

OP1 = OperatorParams(1, 0.5)
C1 = constants_for(1, 0.5)


@pytest.fixture(scope="module")
def gauss_ext():
    g = make_log_grid(2e-2, 30.0, 256, 1)
    u = sample(g, lambda r: np.exp(-r * r / 2))
    return u, extend(u, OP1, 120.0, 256)


def test_zero_datum_gives_zero():
    g = make_log_grid(2e-2, 10.0, 64, 1)
    u = sample(g, lambda r: np.zeros_like(r))
    w = extend(u, OP1, 40.0, 64)
    assert not np.any(w.values)
    assert extension_energy(w, C1) == 0.0


def test_linearity():
    g = make_log_grid(2e-2, 20.0, 128, 1)
    a = sample(g, lambda r: np.exp(-r * r / 2))
    b = sample(g, lambda r: np.exp(-r * r))
    ab = sample(g, lambda r: 2 * np.exp(-r * r / 2) - 3 * np.exp(-r * r))
    wa, wb, wab = (extend(x, OP1, 80.0, 128).values for x in (a, b, ab))
    assert np.allclose(wab, 2 * wa - 3 * wb, atol=1e-10)


def test_poisson_constant_unit_mass():
    for N, s in ((1, 0.5), (3, 0.5), (3, 0.3)):
        p = poisson_constant(N, s)
        # ∫_{R^N} y^{2s}(|x|²+y²)^{-(N+2s)/2} dx at y = 1
        m, _ = quad(lambda r: r ** (N - 1) * (1 + r * r) ** (-(N + 2 * s) / 2), 0, np.inf)
        area = 2 * math.pi ** (N / 2) / math.gamma(N / 2)
        assert p * area * m == pytest.approx(1.0, rel=1e-8)


def test_axis_values_against_poisson_integral(gauss_ext):
    # w(0, y) = ∫ P(x, y) e^{-x²/2} dx with the Poisson kernel for N=1, s=1/2
    u, w = gauss_ext
    p = poisson_constant(1, 0.5)
    for j in (40, 80, 120):
        y = w.y_nodes[j]
        ref = 2 * quad(lambda x: p * y / (x * x + y * y) * math.exp(-x * x / 2), 0, np.inf)[0]
        assert w.values[0, j] == pytest.approx(ref, rel=2e-2)


def test_maximum_principle(gauss_ext):
    _, w = gauss_ext
    assert w.values.max() <= 1.0 + 1e-12
    assert w.values.min() >= -1e-12


def test_solution_minimises_discrete_energy(gauss_ext, rng):
    _, w = gauss_ext
    E0 = extension_energy(w, C1)
    for _ in range(3):
        bump = np.zeros_like(w.values)
        bump[1:-1, 1:-1] = 1e-3 * rng.normal(size=(w.values.shape[0] - 2, w.values.shape[1] - 2))
        assert extension_energy(with_values(w, w.values + bump), C1) > E0


def test_isometry_gaussian(gauss_ext):
    u, w = gauss_ext
    E = gagliardo_energy(u, OP1)
    assert abs(extension_energy(w, C1) - E) / E < 3e-2


def test_trace_recovers_operator(gauss_ext):
    u, w = gauss_ext
    tr = neumann_trace(w, C1).values
    r = u.grid.nodes
    m = r <= 5
    # cosine transform of |ξ| √(2π) e^{-ξ²/2}
    ref = np.array([quad(lambda k: k * math.sqrt(2 * math.pi) * math.exp(-k * k / 2), 0, 40,
                         weight="cos", wvar=x)[0] / math.pi for x in r[m]])
    assert np.sqrt(np.mean((tr[m] - ref) ** 2) / np.mean(ref ** 2)) < 3e-2


def test_constant_trace_vanishes():
    g = make_log_grid(2e-2, 10.0, 64, 3)
    u = sample(g, lambda r: np.ones_like(r), 0.0)
    w = extend(u, OperatorParams(3, 0.5), 40.0, 64)
    tr = neumann_trace(w, constants_for(3, 0.5)).values
    assert np.max(np.abs(tr[g.nodes < 5])) < 1e-8


def test_trace_inequality_bubble():
    # S ‖u‖²_{2*} ≤ ‖u‖², with near equality on the extremal
    from fraclab.model import sobolev_constant
    op = OperatorParams(3, 0.5)
    g = make_log_grid(4e-2, 100.0, 256, 3)
    u = sample(g, lambda r: 1 / (1 + r * r), 2.0)
    w = extend(u, op, 400.0, 256)
    E = extension_energy(w, constants_for(op))
    lhs = sobolev_constant(3, 0.5) * critical_norm_sq(u, 3, 0.5)
    assert lhs <= E * (1 + 3e-2)
    assert E == pytest.approx(math.pi ** 2 / 2, rel=3e-2)


def test_argument_checks():
    g = make_log_grid(2e-2, 10.0, 64, 1)
    u = sample(g, lambda r: np.exp(-r * r))
    with pytest.raises(ParameterError):
        extend(u, OP1, 10.0, 64)
    with pytest.raises(ParameterError):
        extend(u, OP1, 40.0, 32)


def test_isometry_improves_as_strip_is_enlarged():
    # the truncation radii are a modelling choice; the defect must shrink as they grow
    defects = []
    for R in (10.0, 20.0, 40.0):
        g = make_log_grid(2e-2, R, 256, 1)
        u = sample(g, lambda r: np.exp(-r * r / 2))
        defects.append(abs(extension_energy(extend(u, OP1, 4 * R, 256), C1) - 1.0))
    assert defects[0] > defects[1] > defects[2]
