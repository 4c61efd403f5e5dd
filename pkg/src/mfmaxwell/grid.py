"""Staggered (Yee) grid on the unit box.

Layout conventions, all arrays in C order with axis 0 = x:

* nodes          ``(n+1, n+1, n+1)`` at ``(i h, j h, k h)``
* x-edges        ``(n, n+1, n+1)``   at ``((i+1/2) h, j h, k h)``  (y, z analogous)
* x-faces        ``(n+1, n, n)``     at ``(i h, (j+1/2) h, (k+1/2) h)``
* cells          ``(n, n, n)``       at ``((i+1/2) h, (j+1/2) h, (k+1/2) h)``
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    n: int
    margin: int = 2

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise GridError(f"n must be a positive integer, got {self.n!r}")
        if self.margin < 1:
            raise GridError("margin must be >= 1")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    # -- shapes -----------------------------------------------------------
    def edge_shape(self, axis: int) -> tuple[int, int, int]:
        s = [self.n + 1] * 3
        s[axis] = self.n
        return tuple(s)

    def face_shape(self, axis: int) -> tuple[int, int, int]:
        s = [self.n] * 3
        s[axis] = self.n + 1
        return tuple(s)

    @property
    def node_shape(self):
        return (self.n + 1,) * 3

    @property
    def cell_shape(self):
        return (self.n,) * 3

    @property
    def n_nodes(self) -> int:
        return (self.n + 1) ** 3

    @property
    def n_cells(self) -> int:
        return self.n ** 3

    @property
    def n_edges_axis(self) -> int:
        return self.n * (self.n + 1) ** 2

    @property
    def n_edges(self) -> int:
        return 3 * self.n_edges_axis

    @property
    def n_faces_axis(self) -> int:
        return (self.n + 1) * self.n ** 2

    @property
    def n_faces(self) -> int:
        return 3 * self.n_faces_axis

    # -- coordinates ------------------------------------------------------
    def _coords(self, offsets, shape):
        axes = [(np.arange(s) + o) / self.n for s, o in zip(shape, offsets)]
        return np.meshgrid(*axes, indexing="ij")

    def node_coords(self):
        return self._coords((0, 0, 0), self.node_shape)

    def cell_coords(self):
        return self._coords((0.5, 0.5, 0.5), self.cell_shape)

    def edge_coords(self, axis: int):
        off = [0.0, 0.0, 0.0]
        off[axis] = 0.5
        return self._coords(off, self.edge_shape(axis))

    def face_coords(self, axis: int):
        off = [0.5, 0.5, 0.5]
        off[axis] = 0.0
        return self._coords(off, self.face_shape(axis))

    # -- boundary masks ---------------------------------------------------
    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        """Flat boolean mask of nodes on the box surface."""
        m = np.zeros(self.node_shape, dtype=bool)
        for ax in range(3):
            idx = [slice(None)] * 3
            idx[ax] = 0
            m[tuple(idx)] = True
            idx[ax] = -1
            m[tuple(idx)] = True
        return m.ravel()

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        """Flat mask of edges lying on the box surface (all of them tangential)."""
        parts = []
        for ax in range(3):
            m = np.zeros(self.edge_shape(ax), dtype=bool)
            for other in range(3):
                if other == ax:
                    continue
                idx = [slice(None)] * 3
                idx[other] = 0
                m[tuple(idx)] = True
                idx[other] = -1
                m[tuple(idx)] = True
            parts.append(m.ravel())
        return np.concatenate(parts)

    @cached_property
    def boundary_faces(self) -> np.ndarray:
        """Flat mask of faces on the box surface (normal to it)."""
        parts = []
        for ax in range(3):
            m = np.zeros(self.face_shape(ax), dtype=bool)
            idx = [slice(None)] * 3
            idx[ax] = 0
            m[tuple(idx)] = True
            idx[ax] = -1
            m[tuple(idx)] = True
            parts.append(m.ravel())
        return np.concatenate(parts)

    # -- interior band ----------------------------------------------------
    @property
    def band(self) -> tuple[slice, slice, slice]:
        """Cell-index slices of the band at distance >= margin cells from the surface."""
        s = slice(self.margin, self.n - self.margin)
        return (s, s, s)

    @property
    def band_shape(self):
        return (self.n - 2 * self.margin,) * 3

    def require_band(self, depth: int = 1):
        """Raise unless stencils reaching ``depth`` cells fit inside the margin."""
        if self.n < 2 * self.margin + 3:
            raise GridError(f"grid n={self.n} too small for margin {self.margin} (need n >= {2 * self.margin + 3})")
        if depth > self.margin:
            raise GridError(f"stencil depth {depth} exceeds band margin {self.margin}")

    def split_edges(self, e: np.ndarray):
        """Split a flat edge vector into its three component arrays."""
        k = self.n_edges_axis
        return [e[a * k:(a + 1) * k].reshape(self.edge_shape(a)) for a in range(3)]

    def split_faces(self, f: np.ndarray):
        k = self.n_faces_axis
        return [f[a * k:(a + 1) * k].reshape(self.face_shape(a)) for a in range(3)]
