"""Mimetic difference operators on the staggered grid.

Sparse matrices map between flat node/edge/face/cell vectors::

    nodes --grad--> edges --curl--> faces --div--> cells

so ``curl @ grad == 0`` and ``div @ curl == 0`` hold exactly (integer
stencils scaled by 1/h). The transpose of ``curl`` is the dual curl
from faces back to edges; on interior edges it is the usual Yee curl.

Cell-centered derivative helpers (``cell_gradient`` etc.) operate on
``(3, n, n, n)`` or ``(n, n, n)`` arrays and pad non-computable layers
with NaN; callers slice out the interior band.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .grid import Grid, GridError


def _d(m: int, h: float):
    """(m, m+1) forward difference."""
    return sp.diags([-np.ones(m), np.ones(m)], [0, 1], shape=(m, m + 1), format="csr") / h


def _avg(m: int):
    """(m, m+1) midpoint average."""
    return sp.diags([0.5 * np.ones(m), 0.5 * np.ones(m)], [0, 1], shape=(m, m + 1), format="csr")


def _spread(m: int):
    """(m+1, m) average of the adjacent interval values (one-sided at the ends)."""
    a = sp.lil_matrix((m + 1, m))
    for i in range(m + 1):
        nb = [j for j in (i - 1, i) if 0 <= j < m]
        for j in nb:
            a[i, j] = 1.0 / len(nb)
    return a.tocsr()


def _k3(a, b, c):
    return sp.kron(sp.kron(a, b), c, format="csr")


@lru_cache(maxsize=8)
def grad_matrix(grid: Grid):
    n, h = grid.n, grid.h
    I1 = sp.identity(n + 1, format="csr")
    d = _d(n, h)
    return sp.vstack([_k3(d, I1, I1), _k3(I1, d, I1), _k3(I1, I1, d)], format="csr")


@lru_cache(maxsize=8)
def curl_matrix(grid: Grid):
    """Edge circulation -> face flux density."""
    n, h = grid.n, grid.h
    I0 = sp.identity(n, format="csr")
    I1 = sp.identity(n + 1, format="csr")
    d = _d(n, h)
    Z = None
    # x-faces: dEz/dy - dEy/dz
    row_x = [Z, -_k3(I1, I0, d), _k3(I1, d, I0)]
    # y-faces: dEx/dz - dEz/dx
    row_y = [_k3(I0, I1, d), Z, -_k3(d, I1, I0)]
    # z-faces: dEy/dx - dEx/dy
    row_z = [-_k3(I0, d, I1), _k3(d, I0, I1), Z]
    return sp.bmat([row_x, row_y, row_z], format="csr")


@lru_cache(maxsize=8)
def div_matrix(grid: Grid):
    n, h = grid.n, grid.h
    I0 = sp.identity(n, format="csr")
    d = _d(n, h)
    return sp.hstack([_k3(d, I0, I0), _k3(I0, d, I0), _k3(I0, I0, d)], format="csr")


@lru_cache(maxsize=8)
def edge_to_cell(grid: Grid):
    """Average the four parallel edges of each cell; returns (3 n^3, n_edges)."""
    n = grid.n
    I0 = sp.identity(n, format="csr")
    a = _avg(n)
    return sp.block_diag([_k3(I0, a, a), _k3(a, I0, a), _k3(a, a, I0)], format="csr")


@lru_cache(maxsize=8)
def face_to_cell(grid: Grid):
    """Average the two opposite faces of each cell; returns (3 n^3, n_faces)."""
    n = grid.n
    I0 = sp.identity(n, format="csr")
    a = _avg(n)
    return sp.block_diag([_k3(a, I0, I0), _k3(I0, a, I0), _k3(I0, I0, a)], format="csr")


@lru_cache(maxsize=8)
def cell_to_edge(grid: Grid):
    """Average cell values onto edges (up to four cells share an edge)."""
    n = grid.n
    I0 = sp.identity(n, format="csr")
    p = _spread(n)
    return sp.vstack([_k3(I0, p, p), _k3(p, I0, p), _k3(p, p, I0)], format="csr")


@lru_cache(maxsize=8)
def cell_to_face(grid: Grid):
    n = grid.n
    I0 = sp.identity(n, format="csr")
    p = _spread(n)
    return sp.vstack([_k3(p, I0, I0), _k3(I0, p, I0), _k3(I0, I0, p)], format="csr")


# -- vector-level wrappers ------------------------------------------------

def _check(v, size, what):
    v = np.asarray(v)
    if v.ndim != 1 or v.size != size:
        raise GridError(f"{what}: expected flat vector of length {size}, got shape {v.shape}")
    return v


def grad(grid: Grid, f):
    """Node scalar -> edge vector."""
    return grad_matrix(grid) @ _check(f, grid.n_nodes, "grad")


def curl(grid: Grid, e):
    """Edge vector -> face vector."""
    return curl_matrix(grid) @ _check(e, grid.n_edges, "curl")


def curl_dual(grid: Grid, f):
    """Face vector -> edge vector (adjoint curl); meaningful on interior edges."""
    return curl_matrix(grid).T @ _check(f, grid.n_faces, "curl_dual")


def div(grid: Grid, f):
    """Face vector -> cell scalar."""
    return div_matrix(grid) @ _check(f, grid.n_faces, "div")


def edges_to_cells(grid: Grid, e):
    """Flat edge vector -> ``(3, n, n, n)`` cell-centered array."""
    return (edge_to_cell(grid) @ _check(e, grid.n_edges, "edges_to_cells")).reshape((3,) + grid.cell_shape)


def faces_to_cells(grid: Grid, f):
    return (face_to_cell(grid) @ _check(f, grid.n_faces, "faces_to_cells")).reshape((3,) + grid.cell_shape)


# -- cell-centered finite differences ------------------------------------

def _shift(u, axis, k):
    """u evaluated at index offset k along ``axis`` (last three axes), NaN where out of range."""
    ax = u.ndim - 3 + axis
    out = np.full_like(u, np.nan)
    n = u.shape[ax]
    src = [slice(None)] * u.ndim
    dst = [slice(None)] * u.ndim
    if k >= 0:
        src[ax] = slice(k, n)
        dst[ax] = slice(0, n - k)
    else:
        src[ax] = slice(0, n + k)
        dst[ax] = slice(-k, n)
    out[tuple(dst)] = u[tuple(src)]
    return out


def _as_float(u):
    u = np.asarray(u)
    return u.astype(np.complex128) if np.iscomplexobj(u) else u.astype(np.float64)


def partial(u, axis: int, h: float):
    """Centered first derivative along ``axis``."""
    u = _as_float(u)
    return (_shift(u, axis, 1) - _shift(u, axis, -1)) / (2 * h)


def partial2(u, a: int, b: int, h: float):
    """Centered second derivative d^2/dx_a dx_b."""
    u = _as_float(u)
    if a == b:
        return (_shift(u, a, 1) - 2 * u + _shift(u, a, -1)) / h ** 2
    return partial(partial(u, a, h), b, h)


def cell_gradient(u, h: float):
    """Jacobian ``J[j, k] = d u_j / d x_k`` for a ``(3, n, n, n)`` field, shape ``(3, 3, n, n, n)``."""
    return np.stack([np.stack([partial(u[j], k, h) for k in range(3)]) for j in range(3)])


def cell_div(u, h: float):
    return sum(partial(u[k], k, h) for k in range(3))


def cell_curl(u, h: float):
    return np.stack([
        partial(u[2], 1, h) - partial(u[1], 2, h),
        partial(u[0], 2, h) - partial(u[2], 0, h),
        partial(u[1], 0, h) - partial(u[0], 1, h),
    ])


def cell_laplacian(u, h: float):
    """Componentwise 7-point Laplacian (works on scalar or vector fields)."""
    return sum(partial2(u, k, k, h) for k in range(3))


def cell_grad_div(u, h: float):
    """``grad(div u)`` with compact second differences (exact on cubics)."""
    return np.stack([sum(partial2(u[k], j, k, h) for k in range(3)) for j in range(3)])


def derivatives_cell(grid: Grid, u, order: int = 1):
    """Derivatives of a cell-centered vector field restricted to the interior band.

    ``order=1`` returns the Jacobian ``(3, 3, *band)``; ``order=2`` returns
    ``(laplacian, grad_div)`` each ``(3, *band)``.
    """
    grid.require_band(order)
    u = np.asarray(u)
    if u.shape != (3,) + grid.cell_shape:
        raise GridError(f"expected cell field of shape {(3,) + grid.cell_shape}, got {u.shape}")
    b = (Ellipsis,) + grid.band
    if order == 1:
        return cell_gradient(u, grid.h)[b]
    if order == 2:
        return cell_laplacian(u, grid.h)[b], cell_grad_div(u, grid.h)[b]
    raise ValueError("order must be 1 or 2")
