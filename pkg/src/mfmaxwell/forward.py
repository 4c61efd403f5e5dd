"""Forward problems: the static pair at zero frequency and the time-harmonic system.

The harmonic solve eliminates H and works with edge unknowns::

    curl(mu^-1 curl E) - omega q E = J      on interior edges
    E = phi (tangential)                    on boundary edges
    H = curl E / (i omega mu)               on faces

At omega = 0 the curl-curl operator is singular, so the static problem is
split into a conductivity solve for the potential and a least-squares
solve for the magnetic field.
"""
from __future__ import annotations

import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pyamg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import operators as op
from .fields import ComplexVectorField
from .grid import Grid
from .materials import Illumination, MaterialError, MaterialParams

log = logging.getLogger(__name__)

THREADS_ENV = "MFMAXWELL_THREADS"

# pyamg draws start vectors for spectral-radius estimates from the legacy
# global RNG; setups are serialized and seeded so hierarchies are reproducible.
_AMG_LOCK = threading.Lock()
AMG_SETUP_SEED = 0


def _amg_hierarchy(K):
    with _AMG_LOCK:
        state = np.random.get_state()
        np.random.seed(AMG_SETUP_SEED)
        try:
            return pyamg.smoothed_aggregation_solver(K)
        finally:
            np.random.set_state(state)


class SolverError(RuntimeError):
    """Linear solve failed to reach its tolerance."""

    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = list(history or [])


def default_workers() -> int:
    return max(1, int(os.environ.get(THREADS_ENV, "1")))


def parallel_map(fn, items, workers=None):
    """Ordered map over a thread pool; results come back in input order."""
    items = list(items)
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# zero frequency
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class StaticSolution:
    grid: Grid
    w: np.ndarray
    E0: ComplexVectorField
    residual: float
    iterations: int
    H0: ComplexVectorField | None = None
    magnetic_history: list = field(default_factory=list)

    def with_magnetic(self, H0, history):
        self.H0 = H0
        self.magnetic_history = list(history)
        return self


def _boundary_values(grid: Grid, psi):
    x, y, z = grid.node_coords()
    if isinstance(psi, Illumination):
        vals = psi.potential(x, y, z)
    else:
        vals = np.asarray(psi(x, y, z))
    return np.broadcast_to(vals, grid.node_shape).ravel()


def conductivity_matrix(grid: Grid, sigma):
    sig_e = op.cell_to_edge(grid) @ np.broadcast_to(np.asarray(sigma, float), grid.cell_shape).ravel()
    G = op.grad_matrix(grid)
    return (G.T @ sp.diags(sig_e) @ G).tocsr()


def solve_conductivity(grid: Grid, sigma, psi, source=None, tol=1e-10, maxiter=None,
                       x0=None, lambda_min=None) -> StaticSolution:
    """Solve ``-div(sigma grad w) = source`` with ``w = psi`` on the surface.

    ``psi`` is an :class:`Illumination` (its potential is used) or any
    callable ``psi(x, y, z)``. Jacobi-preconditioned CG on interior nodes.
    """
    sigma = np.broadcast_to(np.asarray(sigma, float), grid.cell_shape)
    floor = 0.0 if lambda_min is None else lambda_min
    if sigma.min() <= 0 or sigma.min() < floor:
        raise MaterialError(f"sigma below ellipticity bound (min {sigma.min()})")
    K = conductivity_matrix(grid, sigma)
    bd = grid.boundary_nodes
    inn = ~bd
    wb = _boundary_values(grid, psi)
    f = np.zeros(grid.n_nodes, dtype=complex if np.iscomplexobj(wb) else float)
    if source is not None:
        f = f + np.broadcast_to(np.asarray(source(*grid.node_coords())), grid.node_shape).ravel()
    Kii = K[inn][:, inn]
    rhs = f[inn] - K[inn][:, bd] @ wb[bd]
    if not np.any(np.iscomplex(rhs)):
        rhs = rhs.real
    Minv = sp.diags(1.0 / Kii.diagonal())
    its = [0]

    def count(_):
        its[0] += 1

    nrm = np.linalg.norm(rhs)
    wi = np.zeros_like(rhs)
    if nrm > 0:
        start = None if x0 is None else np.asarray(x0)[inn]
        wi, info = spla.cg(Kii, rhs, x0=start, rtol=tol, atol=0.0, M=Minv,
                           maxiter=maxiter or 20 * grid.n_nodes, callback=count)
        if info != 0:
            raise SolverError(f"conductivity CG did not converge (info={info})")
    res = np.linalg.norm(Kii @ wi - rhs) / nrm if nrm > 0 else 0.0
    w = np.array(wb, dtype=np.result_type(wb, wi))
    w[inn] = wi
    E0 = ComplexVectorField(grid, "edge", op.grad(grid, w), "E")
    return StaticSolution(grid, w, E0, float(res), its[0])


def cgls(A, b, tol=1e-7, maxiter=5000):
    """Conjugate gradients on the normal equations; returns ``(x, objective_history)``.

    The objective ``|b - A x|^2`` is non-increasing along the iterates.
    """
    x = np.zeros(A.shape[1], dtype=np.result_type(A.dtype, b.dtype))
    r = b.astype(x.dtype, copy=True)
    AH = A.conj().T.tocsr()
    s = AH @ r
    p = s.copy()
    gamma = np.vdot(s, s).real
    b2 = np.vdot(b, b).real
    hist = [b2]
    if b2 == 0:
        return x, hist
    for _ in range(maxiter):
        q = A @ p
        qq = np.vdot(q, q).real
        if qq == 0:
            break
        alpha = gamma / qq
        x += alpha * p
        r -= alpha * q
        hist.append(np.vdot(r, r).real)
        if hist[-1] <= tol ** 2 * b2:
            break
        s = AH @ r
        gnew = np.vdot(s, s).real
        if gnew == 0:
            break
        p = s + (gnew / gamma) * p
        gamma = gnew
    return x, hist


def solve_static_magnetic(grid: Grid, mu, sigma, E0, tol=1e-7, maxiter=20000, consistency_tol=1e-6):
    """First-order least squares for the static magnetic field.

    Minimises ``|curl H - sigma E0|^2 + |div(mu H)|^2`` over face fields with
    ``mu H . nu = 0`` imposed strongly on surface faces. Returns
    ``(H0 face field, objective history)``.
    """
    mu = np.broadcast_to(np.asarray(mu, float), grid.cell_shape).ravel()
    sigma = np.broadcast_to(np.asarray(sigma, float), grid.cell_shape).ravel()
    e = E0.data if isinstance(E0, ComplexVectorField) else np.asarray(E0)
    ie = ~grid.boundary_edges
    jf = ~grid.boundary_faces
    src = (op.cell_to_edge(grid) @ sigma) * e
    B = op.grad_matrix(grid)[ie][:, ~grid.boundary_nodes]
    scale = np.linalg.norm(src) / grid.h
    if scale > 0 and np.linalg.norm(B.T @ src[ie]) > consistency_tol * scale:
        raise SolverError("static data inconsistent: div(sigma E0) is not small")
    mu_f = op.cell_to_face(grid) @ mu
    C = op.curl_matrix(grid)
    A = sp.vstack([C.T[ie][:, jf], op.div_matrix(grid)[:, jf] @ sp.diags(mu_f[jf])], format="csr")
    b = np.concatenate([src[ie], np.zeros(grid.n_cells)])
    if not np.iscomplexobj(b) or not np.any(b.imag):
        b = b.real
    x, hist = cgls(A, b, tol=tol, maxiter=maxiter)
    if hist[0] > 0 and hist[-1] > (10 * tol) ** 2 * hist[0]:
        raise SolverError(f"FOSLS did not converge (objective ratio {hist[-1] / hist[0]:.3e})", hist)
    H = np.zeros(grid.n_faces, dtype=x.dtype)
    H[jf] = x
    return ComplexVectorField(grid, "face", H, "H"), hist


def solve_static(grid: Grid, params: MaterialParams, psi, with_magnetic=True, sigma_ref=None):
    """Zero-frequency pair for one illumination, using ``sigma_ref`` (default: the true sigma)."""
    sig = params.sigma if sigma_ref is None else np.broadcast_to(sigma_ref, grid.cell_shape)
    sol = solve_conductivity(grid, sig, psi, lambda_min=None)
    if with_magnetic:
        H0, hist = solve_static_magnetic(grid, params.mu, sig, sol.E0)
        sol.with_magnetic(H0, hist)
    return sol


# ---------------------------------------------------------------------------
# positive frequency
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class HarmonicSolution:
    grid: Grid
    omega: float
    E: ComplexVectorField
    H: ComplexVectorField
    residual: float
    iterations: int
    history: list = field(default_factory=list)
    illumination: str = ""


class MaxwellOperator:
    """Discrete curl-curl operator at one frequency, reusable across right-hand sides.

    ``method``:
      * ``"direct"``  sparse LU (used automatically for n <= 12)
      * ``"amg"``     BiCGStab on a gauge-augmented system, smoothed-aggregation
                      preconditioner on its real SPD surrogate
      * ``"jacobi"``  BiCGStab with diagonal preconditioning on the plain system
    """

    def __init__(self, grid: Grid, params: MaterialParams, omega: float, method="auto", tol=1e-10,
                 maxiter=2000):
        if not omega > 0:
            raise ValueError("omega must be > 0; use solve_conductivity/solve_static at zero frequency")
        if params.grid != grid:
            raise ValueError("params defined on a different grid")
        self.grid, self.params, self.omega = grid, params, float(omega)
        self.tol, self.maxiter = tol, maxiter
        if method == "auto":
            method = "direct" if grid.n <= 12 else "amg"
        if method not in ("direct", "amg", "jacobi"):
            raise ValueError(f"unknown method {method!r}")
        self.method = method
        C = op.curl_matrix(grid)
        self.mu_f = op.cell_to_face(grid) @ (1.0 / params.mu.ravel())  # face values of 1/mu
        self.q_e = op.cell_to_edge(grid) @ params.q(omega).ravel()
        A = (C.T @ sp.diags(self.mu_f) @ C - self.omega * sp.diags(self.q_e)).tocsr()
        self.ie = ~grid.boundary_edges
        self.A_ii = A[self.ie][:, self.ie].tocsr()
        self.A_ib = A[self.ie][:, ~self.ie].tocsr()
        self._setup()

    def _setup(self):
        ie = self.ie
        if self.method == "direct":
            self._lu = spla.splu(self.A_ii.tocsc(), permc_spec="MMD_AT_PLUS_A")
            return
        if self.method == "jacobi":
            self._system = self.A_ii
            self._precond = sp.diags(1.0 / self.A_ii.diagonal())
            return
        # gauge augmentation: B^T q E = -B^T J / omega holds for every solution
        B = op.grad_matrix(self.grid)[ie][:, ~self.grid.boundary_nodes]
        q = self.q_e[ie]
        q0 = q.mean()
        mu_bar = 1.0 / self.mu_f.mean()
        self._gauge_scale = 1.0 / (q0 ** 2 * mu_bar)
        self._B = B
        self._QB = (sp.diags(q) @ B).tocsr()
        self._system = (self.A_ii + self._gauge_scale * (self._QB @ self._QB.T)).tocsr()
        C = op.curl_matrix(self.grid)
        K = (C.T @ sp.diags(self.mu_f) @ C)[ie][:, ie] + (B @ B.T) / mu_bar \
            + sp.diags(np.full(ie.sum(), abs(self.omega * q0)))
        ml = _amg_hierarchy(K.tocsr())
        P = ml.aspreconditioner()

        def apply(v):
            return P @ np.ascontiguousarray(v.real) + 1j * (P @ np.ascontiguousarray(v.imag))

        self._precond = spla.LinearOperator(self._system.shape, matvec=apply, dtype=complex)

    def boundary_from(self, phi) -> np.ndarray:
        """Full edge vector carrying the tangential illumination on surface edges."""
        e = np.zeros(self.grid.n_edges, dtype=complex)
        if phi is None:
            return e
        vals = phi.edge_values(self.grid) if isinstance(phi, Illumination) else np.asarray(phi, complex)
        e[~self.ie] = vals[~self.ie]
        return e

    def solve(self, phi=None, J=None, illumination_id="") -> HarmonicSolution:
        grid, ie = self.grid, self.ie
        E = self.boundary_from(phi)
        J = np.zeros(grid.n_edges, complex) if J is None else np.asarray(J, complex)
        rhs = J[ie] - self.A_ib @ E[~ie]
        nrm = np.linalg.norm(rhs)
        hist, its = [], 0
        if nrm == 0:
            xi = np.zeros(ie.sum(), complex)
        elif self.method == "direct":
            xi = self._lu.solve(rhs)
        else:
            b = rhs
            if self.method == "amg":
                b = rhs - self._gauge_scale * (self._QB @ (self._B.T @ J[ie])) / self.omega
            xi, its, hist = self._krylov(b, nrm)
        res = float(np.linalg.norm(self.A_ii @ xi - rhs) / nrm) if nrm > 0 else 0.0
        if res > max(1e-8, 10 * self.tol):
            raise SolverError(f"curl-curl solve at omega={self.omega} stalled, residual {res:.3e}", hist)
        E[ie] = xi
        Hf = (op.curl_matrix(grid) @ E) * self.mu_f / (1j * self.omega)
        return HarmonicSolution(
            grid, self.omega,
            ComplexVectorField(grid, "edge", E, "E", {"omega": self.omega, "illumination": illumination_id}),
            ComplexVectorField(grid, "face", Hf, "H", {"omega": self.omega, "illumination": illumination_id}),
            res, its, hist, illumination_id)

    def _krylov(self, b, nrm):
        hist = []

        def cb(xk):
            hist.append(float(np.linalg.norm(self._system @ xk - b) / np.linalg.norm(b)))

        x, info = spla.bicgstab(self._system, b, M=self._precond, rtol=self.tol, atol=0.0,
                                maxiter=self.maxiter, callback=cb)
        if info != 0:
            log.warning("bicgstab failed (info=%s) at omega=%s, retrying with GMRES", info, self.omega)
            hist.append(float("nan"))
            x, info = spla.gmres(self._system, b, x0=x, M=self._precond, rtol=self.tol, atol=0.0,
                                 restart=60, maxiter=self.maxiter)
            if info != 0:
                raise SolverError(f"Krylov solve failed at omega={self.omega} (info={info})", hist)
        return x, len(hist), hist


def solve_maxwell(grid: Grid, params: MaterialParams, omega: float, phi=None, J=None,
                  method="auto", tol=1e-10) -> HarmonicSolution:
    """Solve the harmonic system for one illumination (and optional edge source ``J``)."""
    iid = phi.id if isinstance(phi, Illumination) else ""
    return MaxwellOperator(grid, params, omega, method=method, tol=tol).solve(phi, J, iid)


# ---------------------------------------------------------------------------
# synthetic internal data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeasurementSet:
    frequencies: tuple
    illuminations: tuple

    def __post_init__(self):
        object.__setattr__(self, "frequencies", tuple(float(w) for w in self.frequencies))
        object.__setattr__(self, "illuminations", tuple(self.illuminations))
        if not self.frequencies or any(w <= 0 for w in self.frequencies):
            raise ValueError("frequencies must be a non-empty list of positive numbers")
        if not self.illuminations:
            raise ValueError("at least one illumination required")

    @property
    def b(self):
        return len(self.illuminations)


@dataclass(eq=False)
class SyntheticDataset:
    """Cell-centered internal data keyed by ``(omega, illumination index)``."""

    params: MaterialParams
    measurements: MeasurementSet
    H: dict
    E: dict
    D: dict = field(default_factory=dict)
    L: np.ndarray | None = None
    noise: dict = field(default_factory=lambda: {"level": 0.0, "seed": 0})
    residuals: dict = field(default_factory=dict)

    @property
    def grid(self):
        return self.params.grid


class ForwardFailure(RuntimeError):
    def __init__(self, omega, index, cause):
        super().__init__(f"forward solve failed at omega={omega}, illumination #{index}: {cause}")
        self.omega, self.index = omega, index


def solve_all(params: MaterialParams, omega: float, illuminations, method="auto"):
    """All illuminations at one frequency sharing one operator setup."""
    try:
        A = MaxwellOperator(params.grid, params, omega, method=method)
    except Exception as exc:  # noqa: BLE001 - re-raised with context
        raise ForwardFailure(omega, -1, exc) from exc
    out = []
    for i, phi in enumerate(illuminations):
        try:
            out.append(A.solve(phi, illumination_id=phi.id))
        except Exception as exc:  # noqa: BLE001
            raise ForwardFailure(omega, i, exc) from exc
    return out


def synthesize_measurements(params: MaterialParams, mset: MeasurementSet, noise: float = 0.0,
                            seed: int = 0, L=None, method="auto", workers=None) -> SyntheticDataset:
    """Forward-solve every (omega, illumination) and sample internal data at cell centers.

    ``L`` (scalar or cell array) switches on the electro-seismic data ``D = L E``.
    Noise is multiplicative, ``f * (1 + noise * xi)`` with real standard normal ``xi``
    drawn per component and cell from ``numpy.random.default_rng(seed)``.
    """
    grid = params.grid
    sols = parallel_map(lambda w: solve_all(params, w, mset.illuminations, method), mset.frequencies, workers)
    rng = np.random.default_rng(seed)
    Lc = None if L is None else np.broadcast_to(np.asarray(L, float), grid.cell_shape).copy()
    if Lc is not None and Lc.min() <= 0:
        raise MaterialError("coupling coefficient L must be positive")

    def noisy(a):
        if noise == 0:
            return a
        return a * (1.0 + noise * rng.standard_normal(a.shape))

    H, E, D, res = {}, {}, {}, {}
    for w, row in zip(mset.frequencies, sols):
        for i, s in enumerate(row):
            Ec = s.E.cells
            H[(w, i)] = noisy(s.H.cells)
            E[(w, i)] = Ec
            if Lc is not None:
                D[(w, i)] = noisy(Lc * Ec)
            res[(w, i)] = s.residual
    return SyntheticDataset(params, mset, H, E, D, Lc, {"level": float(noise), "seed": int(seed)}, res)
