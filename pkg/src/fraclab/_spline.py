"""Cubic-spline machinery that is linear in nodal values.

Every map here is expressed as a matrix acting on the vector of nodal values,
so operators assembled on top of it stay exactly linear.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
from scipy.interpolate import BSpline, make_interp_spline


def endpoint_derivative_row(x: np.ndarray, at_start: bool) -> np.ndarray:
    """Weights of the 4-point Lagrange derivative at an end of ``x``.

    Exact for cubic data, so splines closed with it reproduce cubics.
    """
    M = len(x)
    idx = np.arange(4) if at_start else np.arange(M - 4, M)
    xs = x[idx]
    x0 = xs[0] if at_start else xs[-1]
    row = np.zeros(M)
    for a, ia in enumerate(idx):
        others = [xs[b] for b in range(4) if b != a]
        denom = np.prod([xs[a] - xo for xo in others])
        # d/dx prod(x - xo) at x0
        deriv = 0.0
        for j in range(3):
            deriv += np.prod([x0 - others[m] for m in range(3) if m != j])
        row[ia] = deriv / denom
    return row


class SplineMap:
    """Linear map from nodal values to an interpolating cubic spline.

    ``left`` and ``right`` are rows giving the end slopes as linear
    functionals of the nodal values.
    """

    k = 3

    def __init__(self, nodes: np.ndarray, left: np.ndarray, right: np.ndarray):
        self.nodes = np.asarray(nodes, dtype=float)
        M = len(self.nodes)
        spl = make_interp_spline(
            self.nodes, np.eye(M), k=3,
            bc_type=([(1, np.asarray(left, float))], [(1, np.asarray(right, float))]),
        )
        self.t = spl.t
        self.ncoef = len(self.t) - self.k - 1
        self.C = np.ascontiguousarray(spl.c[: self.ncoef])
        self._spl = spl

    @property
    def lo(self) -> float:
        return float(self.nodes[0])

    @property
    def hi(self) -> float:
        return float(self.nodes[-1])

    def design(self, x: np.ndarray):
        """Sparse B-spline design matrix (len(x), ncoef) for x inside the nodes."""
        x = np.clip(np.asarray(x, float), self.lo, self.hi)
        return BSpline.design_matrix(x, self.t, self.k)

    def dense(self, x: np.ndarray, nu: int = 0) -> np.ndarray:
        """Dense (len(x), M) matrix of the nu-th derivative at x."""
        x = np.clip(np.asarray(x, float), self.lo, self.hi)
        return self._spl(x, nu)

    @cached_property
    def antiderivatives(self):
        """(t, k, C) for the first and second antiderivatives from the left node."""
        out = []
        for n in (1, 2):
            a = self._spl.antiderivative(n)
            nc = len(a.t) - a.k - 1
            out.append((a.t, a.k, np.ascontiguousarray(a.c[:nc])))
        return out

    def anti_design(self, x: np.ndarray, order: int):
        t, k, _ = self.antiderivatives[order - 1]
        x = np.clip(np.asarray(x, float), self.lo, self.hi)
        return BSpline.design_matrix(x, t, k)

    def evaluate(self, values: np.ndarray, x: np.ndarray, nu: int = 0) -> np.ndarray:
        """Evaluate the interpolant of one value vector (cheap path)."""
        c = self.C @ values
        x = np.clip(np.asarray(x, float), self.lo, self.hi)
        return BSpline(self.t, c, self.k)(x, nu)

    def moments(self, weight_power: int) -> np.ndarray:
        """Exact integrals of each nodal cardinal spline times r**weight_power."""
        npts = 4 + (weight_power + 1) // 2
        g, gw = np.polynomial.legendre.leggauss(npts)
        knots = np.unique(self.t)
        a, b = knots[:-1], knots[1:]
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        x = (mid[:, None] + half[:, None] * g[None, :]).ravel()
        w = (half[:, None] * gw[None, :]).ravel() * x ** weight_power
        D = BSpline.design_matrix(x, self.t, self.k)
        mom = D.T @ w
        return mom @ self.C
