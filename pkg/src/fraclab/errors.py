"""Exception types raised by the numerical modules."""


class FracLabError(Exception):
    """Base class for all package errors."""


class ParameterError(FracLabError, ValueError):
    pass


class TailRequired(FracLabError):
    pass


class QuadratureDiverged(FracLabError):
    pass


class DivergentSeminorm(FracLabError):
    pass


class BoundaryLeak(FracLabError):
    pass


class NotRadial(FracLabError):
    pass


class SolverStagnation(FracLabError):
    pass


class FitIllConditioned(FracLabError):
    pass


class ZeroMass(FracLabError):
    pass


class NonpositiveValues(FracLabError):
    pass


class ConfigError(FracLabError):
    """Malformed run configuration; message names the offending field."""
