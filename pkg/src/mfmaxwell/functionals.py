"""Pointwise functionals of sampled fields: determinants, eta and gamma.

Gradient convention: ``(grad u)[j, k] = d u_j / d x_k``. Products are
bilinear (no complex conjugation), moduli are taken only at the end.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import operators as op
from .grid import Grid, GridError


@dataclass(frozen=True)
class ZetaDescriptor:
    id: str
    b: int
    r: int
    derivative_order: int


ZETA1 = ZetaDescriptor("zeta1", b=3, r=1, derivative_order=0)
ZETA2 = ZetaDescriptor("zeta2", b=6, r=1, derivative_order=1)
ZETA3 = ZetaDescriptor("zeta3", b=6, r=2, derivative_order=1)
ZETAS = {z.id: z for z in (ZETA1, ZETA2, ZETA3)}


@dataclass(eq=False)
class ConditionField:
    """``|zeta_l|`` on the interior band, stacked as ``(r, *band_shape)``."""

    grid: Grid
    values: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 3:
            self.values = self.values[None]
        if self.values.shape[1:] != self.grid.band_shape:
            raise GridError(f"condition values {self.values.shape} do not match band {self.grid.band_shape}")
        if not np.all(np.isfinite(self.values)):
            raise GridError("condition field has non-finite values on the band")

    @property
    def r(self):
        return self.values.shape[0]

    @property
    def coverage_value(self) -> np.ndarray:
        """``min_l |zeta_l|`` per band cell."""
        return self.values.min(axis=0)


# -- pointwise kernels ------------------------------------------------------

def det3(c1, c2, c3):
    """Determinant of the 3x3 matrix with columns c1, c2, c3 (arrays shaped (3, ...))."""
    return (c1[0] * (c2[1] * c3[2] - c2[2] * c3[1])
            - c2[0] * (c1[1] * c3[2] - c1[2] * c3[1])
            + c3[0] * (c1[1] * c2[2] - c1[2] * c2[1]))


def _matvec(J, u):
    return np.einsum("jk...,k...->j...", J, u)


def _matTvec(J, u):
    return np.einsum("jk...,j...->k...", J, u)


def eta_kernel(u1, J1, u2, J2):
    """eta from values and Jacobians; all trailing axes are broadcast."""
    d1 = np.einsum("kk...->...", J1)
    d2 = np.einsum("kk...->...", J2)
    return (_matvec(J1, u2) - _matvec(J2, u1) + d1 * u2 - d2 * u1
            - 2 * _matTvec(J1, u2) + 2 * _matTvec(J2, u1))


def gamma_kernel(u1, lap1, gd1, u2, lap2, gd2):
    """gamma from values, Laplacians and grad-div."""
    dot = lambda a, b: np.sum(a * b, axis=0)  # noqa: E731
    return dot(gd1, u2) - dot(gd2, u1) - dot(lap1, u2) + dot(lap2, u1)


# -- grid-level operators -------------------------------------------------

def _check_cell(grid: Grid, *us):
    for u in us:
        if np.shape(u) != (3,) + grid.cell_shape:
            raise GridError(f"expected cell field {(3,) + grid.cell_shape}, got {np.shape(u)}")


def eta_full(grid: Grid, u1, u2):
    """eta on the full cell grid (NaN where stencils leave the box)."""
    _check_cell(grid, u1, u2)
    return eta_kernel(u1, op.cell_gradient(u1, grid.h), u2, op.cell_gradient(u2, grid.h))


def gamma_full(grid: Grid, u1, u2):
    _check_cell(grid, u1, u2)
    h = grid.h
    return gamma_kernel(u1, op.cell_laplacian(u1, h), op.cell_grad_div(u1, h),
                        u2, op.cell_laplacian(u2, h), op.cell_grad_div(u2, h))


def _band(grid: Grid, a):
    return np.asarray(a)[(Ellipsis,) + grid.band]


def eta(grid: Grid, u1, u2):
    """eta(u1, u2) on the interior band, shape ``(3, *band)``."""
    grid.require_band(1)
    return _band(grid, eta_full(grid, u1, u2))


def gamma(grid: Grid, u1, u2):
    """gamma(u1, u2) on the interior band."""
    grid.require_band(1)
    return _band(grid, gamma_full(grid, u1, u2))


def eta_matrix(grid: Grid, fields):
    """Columns ``eta(u1,u2), eta(u3,u4), eta(u5,u6)`` as a ``(3, 3, *band)`` array (row, column)."""
    if len(fields) != 6:
        raise ValueError("eta matrix needs six fields")
    cols = [eta(grid, fields[2 * k], fields[2 * k + 1]) for k in range(3)]
    return np.stack(cols, axis=1)


def zeta1(grid: Grid, E1, E2, E3, provenance=None) -> ConditionField:
    _check_cell(grid, E1, E2, E3)
    v = np.abs(det3(*(_band(grid, E) for E in (E1, E2, E3))))
    return ConditionField(grid, v, dict(provenance or {}, zeta="zeta1"))


def zeta2_value(grid: Grid, fields):
    """Signed (complex) determinant of the three eta columns on the band."""
    M = eta_matrix(grid, fields)
    return det3(M[:, 0], M[:, 1], M[:, 2])


def zeta2(grid: Grid, *fields, provenance=None) -> ConditionField:
    return ConditionField(grid, np.abs(zeta2_value(grid, fields)), dict(provenance or {}, zeta="zeta2"))


def zeta3(grid: Grid, *fields, provenance=None) -> ConditionField:
    c1 = np.abs(zeta2_value(grid, fields))
    c2 = np.abs(_band(grid, fields[0])[1])
    return ConditionField(grid, np.stack([c1, c2]), dict(provenance or {}, zeta="zeta3"))


def evaluate(zeta: ZetaDescriptor | str, grid: Grid, fields, provenance=None) -> ConditionField:
    """Dispatch on a descriptor; ``fields`` are the b cell-centered electric fields."""
    z = ZETAS[zeta] if isinstance(zeta, str) else zeta
    if len(fields) != z.b:
        raise ValueError(f"{z.id} needs b={z.b} fields, got {len(fields)}")
    fn = {"zeta1": zeta1, "zeta2": zeta2, "zeta3": zeta3}[z.id]
    return fn(grid, *fields, provenance=provenance)
