"""Material parameters and boundary illuminations."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import sympy

from .grid import Grid

X1, X2, X3 = sympy.symbols("x1 x2 x3", real=True)
COORDS = (X1, X2, X3)


class MaterialError(ValueError):
    pass


@dataclass(frozen=True)
class Bump:
    """``amplitude * exp(-|x - center|^2 / width^2)``."""

    center: tuple[float, float, float] = (0.5, 0.5, 0.5)
    width: float = 0.2
    amplitude: float = 0.1

    def __call__(self, x, y, z):
        c = self.center
        r2 = (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2
        return self.amplitude * np.exp(-r2 / self.width ** 2)


@dataclass(frozen=True)
class ScalarSpec:
    """A constant plus a sum of Gaussian bumps."""

    base: float = 1.0
    bumps: tuple[Bump, ...] = ()

    def __call__(self, x, y, z):
        v = np.full(np.broadcast(x, y, z).shape, float(self.base))
        for b in self.bumps:
            v = v + b(x, y, z)
        return v

    def sample(self, grid: Grid):
        return self(*grid.cell_coords())


@dataclass(frozen=True, eq=False)
class MaterialParams:
    """Isotropic cell-centered coefficients with ellipticity bounds."""

    grid: Grid
    mu: np.ndarray
    eps: np.ndarray
    sigma: np.ndarray
    sigma_ref: float = 1.0
    lambda_min: float | None = None
    lambda_max: float | None = None

    def __post_init__(self):
        shape = self.grid.cell_shape
        for name in ("mu", "eps", "sigma"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.shape == ():
                a = np.full(shape, float(a))
            if a.shape != shape:
                raise MaterialError(f"{name} has shape {a.shape}, expected {shape}")
            if not np.all(np.isfinite(a)):
                raise MaterialError(f"{name} has non-finite values")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if np.min(self.sigma) <= 0:
            raise MaterialError("sigma must be strictly positive")
        lo = min(self.mu.min(), self.eps.min(), self.sigma.min(), self.sigma_ref)
        hi = max(self.mu.max(), self.eps.max(), self.sigma.max(), self.sigma_ref)
        if self.lambda_min is None:
            object.__setattr__(self, "lambda_min", float(lo))
        if self.lambda_max is None:
            object.__setattr__(self, "lambda_max", float(hi))
        if not 0 < self.lambda_min <= self.lambda_max:
            raise MaterialError("need 0 < lambda_min <= lambda_max")
        if lo < self.lambda_min or hi > self.lambda_max:
            raise MaterialError(
                f"coefficients outside [{self.lambda_min}, {self.lambda_max}] (range [{lo}, {hi}])")

    @classmethod
    def constant(cls, grid: Grid, mu=1.0, eps=1.0, sigma=1.0, **kw):
        return cls(grid, np.full(grid.cell_shape, mu), np.full(grid.cell_shape, eps),
                   np.full(grid.cell_shape, sigma), **kw)

    @classmethod
    def from_specs(cls, grid: Grid, mu: ScalarSpec, eps: ScalarSpec, sigma: ScalarSpec, **kw):
        return cls(grid, mu.sample(grid), eps.sample(grid), sigma.sample(grid), **kw)

    def q(self, omega: float) -> np.ndarray:
        """Cell-centered admittivity ``omega * eps + 1j * sigma``."""
        return omega * self.eps + 1j * self.sigma


@dataclass(frozen=True)
class Illumination:
    """Curl-free boundary illumination: a constant vector or the gradient of a polynomial.

    Both kinds are stored as a scalar potential ``psi`` of degree <= 2 so that
    ``phi = grad psi``; a constant vector ``c`` has ``psi = c . x``.
    """

    id: str
    kind: str
    expr: str
    vector: tuple = field(default=(), compare=False)

    @classmethod
    def constant(cls, c, id: str | None = None):
        c = tuple(complex(v) for v in c)
        if len(c) != 3:
            raise MaterialError("constant illumination needs three components")
        return cls(id or "const" + str(tuple(_fmt(v) for v in c)), "constant_vector",
                   str(sum(sympy.nsimplify(v) * xi for v, xi in zip(c, COORDS))), c)

    @classmethod
    def gradient(cls, psi: str, id: str | None = None):
        return cls(id or f"grad({psi})", "gradient_of_polynomial", psi)

    @classmethod
    def parse(cls, text: str) -> "Illumination":
        """Parse ``e1``/``e2``/``e3``, ``[a, b, c]`` or ``grad(<polynomial>)``."""
        t = text.strip().replace(" ", "")
        if t in ("e1", "e2", "e3"):
            c = [0, 0, 0]
            c[int(t[1]) - 1] = 1
            return cls.constant(c, id=t)
        if t.startswith("grad(") and t.endswith(")"):
            return cls.gradient(t[5:-1], id=t)
        if t.startswith("[") and t.endswith("]"):
            return cls.constant([complex(v) for v in t[1:-1].split(",")], id=t)
        raise MaterialError(f"cannot parse illumination {text!r}")

    def __post_init__(self):
        if self.kind not in ("constant_vector", "gradient_of_polynomial"):
            raise MaterialError(f"unknown illumination kind {self.kind!r}")
        poly = sympy.Poly(self.potential_expr, *COORDS)
        if poly.total_degree() > 2:
            raise MaterialError(f"illumination potential {self.expr!r} has degree > 2")

    @cached_property
    def potential_expr(self):
        return sympy.sympify(self.expr, locals={"x1": X1, "x2": X2, "x3": X3})

    @cached_property
    def _potential(self):
        return sympy.lambdify(COORDS, self.potential_expr, "numpy")

    @cached_property
    def _field(self):
        return [sympy.lambdify(COORDS, sympy.diff(self.potential_expr, xi), "numpy") for xi in COORDS]

    def potential(self, x, y, z):
        return np.broadcast_to(np.asarray(self._potential(x, y, z), dtype=complex), np.broadcast(x, y, z).shape)

    def field(self, axis: int, x, y, z):
        """Component ``axis`` of ``phi = grad psi``."""
        return np.broadcast_to(np.asarray(self._field[axis](x, y, z), dtype=complex), np.broadcast(x, y, z).shape)

    def edge_values(self, grid: Grid) -> np.ndarray:
        """Tangential component of ``phi`` at every edge midpoint (flat edge vector)."""
        return np.concatenate([self.field(a, *grid.edge_coords(a)).ravel() for a in range(3)])


def _fmt(v: complex):
    return v.real if v.imag == 0 else v
