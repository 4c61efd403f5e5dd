"""Manufactured solutions for the elliptic and curl-curl solvers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy
from sympy import cos, exp, sin

from . import operators as op
from .forward import MaxwellOperator, solve_conductivity
from .grid import Grid
from .materials import COORDS, MaterialParams

x1, x2, x3 = COORDS


def _curl(F):
    return [sympy.diff(F[2], x2) - sympy.diff(F[1], x3),
            sympy.diff(F[0], x3) - sympy.diff(F[2], x1),
            sympy.diff(F[1], x1) - sympy.diff(F[0], x2)]


def _fn(expr):
    f = sympy.lambdify(COORDS, expr, "numpy")
    return lambda x, y, z: np.broadcast_to(f(x, y, z), np.broadcast(x, y, z).shape)


@dataclass
class ConvergenceResult:
    ns: tuple
    errors: tuple

    @property
    def orders(self):
        e, n = self.errors, self.ns
        return tuple(float(np.log(e[i] / e[i + 1]) / np.log(n[i + 1] / n[i])) for i in range(len(e) - 1))


ELLIPTIC_W = sin(2 * x1) * cos(x2) + x3 * exp(x1 - x2)
ELLIPTIC_SIGMA = 1 + sympy.Rational(3, 10) * x1 * x2 * x3 + sympy.Rational(1, 5) * sin(x3)


def elliptic_error(n: int) -> float:
    grid = Grid(n)
    w = ELLIPTIC_W
    f = -sum(sympy.diff(ELLIPTIC_SIGMA * sympy.diff(w, xi), xi) for xi in COORDS)
    sigma = _fn(ELLIPTIC_SIGMA)(*grid.cell_coords())
    sol = solve_conductivity(grid, sigma, _fn(w), source=_fn(f), tol=1e-12)
    err = sol.w - _fn(w)(*grid.node_coords()).ravel()
    return float(np.sqrt(grid.h ** 3 * np.sum(np.abs(err) ** 2)))


CC_E = (sin(2 * x2) * cos(x3) + x1 ** 2, cos(x1) * x3 * x2 + sin(x1 + x3), exp(x1 / 2) * sin(x2 + x3))
CC_MU = 1 + x1 * x2 / 5
CC_EPS = 1 + sin(x3) * 3 / 10
CC_SIGMA = 1 + cos(x1 + x2) / 5


def curlcurl_error(n: int, omega: float = 1.0, method="auto") -> float:
    grid = Grid(n)
    q = omega * CC_EPS + sympy.I * CC_SIGMA
    inner = [c / CC_MU for c in _curl(CC_E)]
    J = [a - omega * q * e for a, e in zip(_curl(inner), CC_E)]
    cc = grid.cell_coords()
    params = MaterialParams(grid, _fn(CC_MU)(*cc), _fn(CC_EPS)(*cc), _fn(CC_SIGMA)(*cc))
    Jv = np.concatenate([_fn(J[a])(*grid.edge_coords(a)).ravel() for a in range(3)])
    Ex = np.concatenate([_fn(CC_E[a])(*grid.edge_coords(a)).ravel() for a in range(3)]).astype(complex)
    sol = MaxwellOperator(grid, params, omega, method=method).solve(Ex, Jv)
    ie = ~grid.boundary_edges
    err = (sol.E.data - Ex)[ie]
    return float(np.sqrt(grid.h ** 3 * np.sum(np.abs(err) ** 2)))


def convergence(error_fn, ns=(8, 16, 32), **kw) -> ConvergenceResult:
    return ConvergenceResult(tuple(ns), tuple(error_fn(n, **kw) for n in ns))
