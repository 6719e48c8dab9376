"""Radial fractional Laplacian laboratory for (-Δ)^s u = u^p - u^q."""

__version__ = "0.1.0"

from .errors import (BoundaryLeak, ConfigError, DivergentSeminorm, FitIllConditioned,
                     FracLabError, NonpositiveValues, NotRadial, ParameterError,
                     QuadratureDiverged, SolverStagnation, TailRequired, ZeroMass)
from .model import (Ball, Classification, OperatorParams, PowerLaw, ProblemParams,
                    RadialGrid, RadialProfile, WholeSpace, ZERO_TAIL, ZeroTail,
                    constants_for, eval_profile, make_log_grid, make_params,
                    make_uniform_grid, sample, sobolev_constant, sphere_area)
from .radial_fraclap import (dilate, duality_pairing, fraclap_at, fraclap_radial,
                             gagliardo_energy, lp_mass)
from .spectral_oracle import (UniformField, fraclap_spectral, restrict_to_radial,
                              sample_field)
from .cs_extension import (ExtensionField, extend, extension_energy, neumann_trace,
                           poisson_constant)
from .variational import (MinimizerResult, SolverConfig, functional_F, minimize_K,
                          minimize_S_ball, project_manifold, rearrange_decreasing,
                          rescale_to_solution, scale_to_cstar)
from .diagnostics import (DiagnosticsReport, energy_identity_residual, fit_gradient_tail,
                          fit_tail_exponent, kelvin_transform, pohozaev_general_f,
                          pohozaev_residual, run_full_diagnostics)
