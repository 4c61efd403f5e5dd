"""Thin containers for sampled complex fields."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import operators as op
from .grid import Grid, GridError

LAYOUTS = ("edge", "face", "cell")


@dataclass(frozen=True, eq=False)
class ComplexVectorField:
    """A complex vector field on one staggered layout.

    ``data`` is a flat vector for ``edge``/``face`` layouts and a
    ``(3, n, n, n)`` array for ``cell``.
    """

    grid: Grid
    layout: str
    data: np.ndarray
    kind: str = "derived"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise GridError(f"unknown layout {self.layout!r}")
        g = self.grid
        expected = {"edge": (g.n_edges,), "face": (g.n_faces,), "cell": (3,) + g.cell_shape}[self.layout]
        data = np.asarray(self.data, dtype=complex)
        if data.shape != expected:
            raise GridError(f"{self.layout} field needs shape {expected}, got {data.shape}")
        object.__setattr__(self, "data", data)

    def to_cells(self) -> "ComplexVectorField":
        if self.layout == "cell":
            return self
        conv = op.edges_to_cells if self.layout == "edge" else op.faces_to_cells
        return ComplexVectorField(self.grid, "cell", conv(self.grid, self.data), self.kind, dict(self.meta))

    @property
    def cells(self) -> np.ndarray:
        return self.to_cells().data


@dataclass(frozen=True, eq=False)
class ComplexScalarField:
    """Cell-centered complex scalar (admittivity, coupling coefficient)."""

    grid: Grid
    data: np.ndarray
    kind: str = "derived"

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.shape != self.grid.cell_shape:
            raise GridError(f"scalar field needs shape {self.grid.cell_shape}, got {data.shape}")
        object.__setattr__(self, "data", data)
