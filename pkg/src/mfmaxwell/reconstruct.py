"""Transport-equation reconstructions of eps and sigma (or the coupling L) from internal data.

All three pipelines reduce to a first-order equation along grid lines,

    dy/ds = alpha(x) . e_k  y + beta(x) . e_k  y^2,

integrated cell-to-cell by RK4 while growing a region from a seed cell.
Growth only crosses an edge between two cells that are both admissible
for a common frequency; when a prediction changes frequency the
frequency-independent pair (eps, sigma) is carried across.
"""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import functionals as fn
from . import operators as op
from .forward import SyntheticDataset
from .frequency import CoverReport
from .grid import Grid

log = logging.getLogger(__name__)


class ReconstructionError(ValueError):
    pass


class RankDeficientError(ReconstructionError):
    pass


# ---------------------------------------------------------------------------
# linear algebra on cell stacks
# ---------------------------------------------------------------------------

def cross_columns(G):
    """The 3x6 matrix ``[G1 x e1, G1 x e2, G2 x e1, ..., G3 x e2]``.

    ``G`` has shape ``(3, 3, ...)`` with ``G[:, i]`` the i-th vector.
    """
    G = np.asarray(G)
    cols = []
    for i in range(3):
        g = G[:, i]
        z = np.zeros_like(g[0])
        cols.append(np.stack([z, g[2], -g[1]]))   # g x e1
        cols.append(np.stack([-g[2], z, g[0]]))   # g x e2
    return np.stack(cols, axis=1)


def right_inverse_3x6(M, s_lin: float = 0.0):
    """Moore-Penrose right inverse ``M^H (M M^H)^-1`` of a 3x6 matrix (or a stack ``(..., 3, 6)``).

    Raises :class:`RankDeficientError` if the smallest singular value is <= ``s_lin``
    (or numerically zero when ``s_lin`` is 0).
    """
    M = np.asarray(M, dtype=complex)
    if M.shape[-2:] != (3, 6):
        raise ValueError(f"expected (..., 3, 6), got {M.shape}")
    sv = np.linalg.svd(M, compute_uv=False)
    smin = sv[..., -1]
    floor = max(s_lin, 1e-12 * float(np.max(sv[..., 0], initial=0.0)))
    if np.any(smin <= floor):
        raise RankDeficientError(f"matrix rank < 3 (smallest singular value {np.min(smin):.3e})")
    MH = np.conj(np.swapaxes(M, -1, -2))
    return MH @ np.linalg.inv(M @ MH)


def _to_stack(a, lead):
    """Move ``lead`` leading matrix axes to the end: (r, c, *band) -> (N, r, c)."""
    a = np.asarray(a)
    band = a.shape[lead:]
    return np.moveaxis(a.reshape(a.shape[:lead] + (-1,)), -1, 0), band


# ---------------------------------------------------------------------------
# transport systems
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class TransportSystem:
    """Per-cell coefficients of ``grad y = alpha y + beta y^2`` on the band."""

    mode: str
    omega: float
    M: np.ndarray                 # (3, c, *band)
    alpha: np.ndarray             # (3, *band)
    beta: np.ndarray | None       # (3, *band) or None
    admissible: np.ndarray        # bool band
    strength: np.ndarray          # sigma_min (method1) or |det M| (method2/ES)
    rhs: np.ndarray | None = None


def _band(grid, a):
    return np.asarray(a)[(Ellipsis,) + grid.band]


def build_M1(grid: Grid, H, omega: float, s_lin: float | None = None) -> TransportSystem:
    """Matrix ``[curl H_i x e_j]`` and the data vector of the first magnetic method.

    ``H`` is a sequence of three cell-centered magnetic fields at frequency ``omega``.
    """
    grid.require_band(1)
    if len(H) != 3:
        raise ValueError("method 1 needs three magnetic fields")
    h = grid.h
    curls = np.stack([_band(grid, op.cell_curl(Hi, h)) for Hi in H], axis=1)   # (3, 3, *band)
    M = cross_columns(curls)                                                    # (3, 6, *band)
    v = np.stack([_band(grid, Hi[j]) for Hi in H for j in (0, 1)])             # (6, *band)
    lap_v = np.stack([_band(grid, op.cell_laplacian(Hi[j], h)) for Hi in H for j in (0, 1)])
    Ms, band = _to_stack(M, 2)
    sv = np.linalg.svd(Ms, compute_uv=False)
    smin = sv[:, -1]
    if s_lin is None:
        s_lin = 1e-3 * float(np.median(sv[:, 0]))
    adm = smin > s_lin
    alpha = np.zeros((smin.size, 3), complex)
    beta = np.zeros((smin.size, 3), complex)
    if adm.any():
        Minv = right_inverse_3x6(Ms[adm])
        vs, _ = _to_stack(v, 1)
        ls, _ = _to_stack(lap_v, 1)
        # grad q M = -q lap v - q^2 omega v  =>  grad q = q (-lap v M+) + q^2 (-omega v M+)
        alpha[adm] = -np.einsum("nk,nkj->nj", ls[adm], Minv)
        beta[adm] = -omega * np.einsum("nk,nkj->nj", vs[adm], Minv)
    unstack = lambda a: np.moveaxis(a, 0, -1).reshape((3,) + band)  # noqa: E731
    return TransportSystem("method1", omega, M, unstack(alpha), unstack(beta),
                           adm.reshape(band), smin.reshape(band))


def build_M2_and_rhs(grid: Grid, fields, omega: float, mode: str = "magnetic",
                     det_floor: float | None = None) -> TransportSystem:
    """``M = [eta(w1,w2) eta(w3,w4) eta(w5,w6)]`` and ``rhs = (gamma(w1,w2), ...)``.

    ``mode="magnetic"``: ``fields`` are magnetic fields and ``w = curl H``;
    ``mode="electroseismic"``: ``fields`` are the ``D`` data and ``w = D``.
    Returns ``grad p = p * alpha`` with ``alpha = rhs M^-1``.
    """
    if mode not in ("magnetic", "electroseismic"):
        raise ValueError(f"unknown mode {mode!r}")
    if len(fields) != 6:
        raise ValueError("method 2 needs six fields")
    need = 2 if mode == "magnetic" else 1
    grid.require_band(need)
    w = [op.cell_curl(F, grid.h) for F in fields] if mode == "magnetic" else [np.asarray(F) for F in fields]
    M = np.stack([_band(grid, fn.eta_full(grid, w[2 * k], w[2 * k + 1])) for k in range(3)], axis=1)
    rhs = np.stack([_band(grid, fn.gamma_full(grid, w[2 * k], w[2 * k + 1])) for k in range(3)])
    det = np.abs(fn.det3(M[:, 0], M[:, 1], M[:, 2]))
    if det_floor is None:
        det_floor = 1e-3 * float(np.median(det))
    adm = det > det_floor
    Ms, band = _to_stack(M, 2)
    rs, _ = _to_stack(rhs, 1)
    alpha = np.zeros((Ms.shape[0], 3), complex)
    if adm.ravel().any():
        a = adm.ravel()
        # g M = r  <=>  M^T g = r
        alpha[a] = np.linalg.solve(np.swapaxes(Ms[a], -1, -2), rs[a][..., None])[..., 0]
    alpha = np.moveaxis(alpha, 0, -1).reshape((3,) + band)
    name = "method2" if mode == "magnetic" else "electroseismic"
    return TransportSystem(name, omega, M, alpha, None, adm, det, rhs)


# ---------------------------------------------------------------------------
# region growing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeedValue:
    """Known values at one cell (full-grid index).

    Give ``eps`` and ``sigma`` (or ``q`` with ``omega``) for the magnetic methods,
    ``L`` for the electro-seismic one.
    """

    cell: tuple
    eps: float | None = None
    sigma: float | None = None
    q: complex | None = None
    omega: float | None = None
    L: float | None = None

    def eps_sigma(self) -> complex:
        if self.eps is not None and self.sigma is not None:
            return complex(self.eps, self.sigma)
        if self.q is not None and self.omega:
            return complex(self.q.real / self.omega, self.q.imag)
        raise ReconstructionError("seed needs (eps, sigma) or (q, omega)")


@dataclass(eq=False)
class ReconstructionReport:
    grid: Grid
    method: str
    eps: np.ndarray | None          # band arrays, NaN where unrecovered
    sigma: np.ndarray | None
    L: np.ndarray | None
    valid: np.ndarray
    order: np.ndarray               # BFS layer per cell, -1 if unrecovered
    frequency_used: np.ndarray      # NaN if unrecovered
    metrics: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def q(self, omega):
        return omega * self.eps + 1j * self.sigma


_DIRS = [(a, s) for a in range(3) for s in (1, -1)]


def _rk4(y, s, a0, a1, b0, b1, h, steps=4):
    """Integrate ``y' = s (a(t) y + b(t) y^2)`` over [0, h] with linearly interpolated a, b."""
    dt = h / steps

    def f(t, y):
        lam = t / h
        a = (1 - lam) * a0 + lam * a1
        b = (1 - lam) * b0 + lam * b1
        return s * (a * y + b * y * y)

    t = 0.0
    for _ in range(steps):
        k1 = f(t, y)
        k2 = f(t + dt / 2, y + dt / 2 * k1)
        k3 = f(t + dt / 2, y + dt / 2 * k2)
        k4 = f(t + dt, y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
    return y


def grow(grid: Grid, systems: dict, masks: dict, strength: dict, seed_index, seed_value,
         to_local, from_local, valid_local, rk_steps: int = 4):
    """Layered breadth-first integration over the band.

    ``systems``/``masks``/``strength`` are keyed by frequency; masks select the
    cells where each frequency's equation may be used, ``strength`` ranks
    frequencies when several are usable on an edge. ``to_local(p, omega)`` maps
    the stored state to the integrated variable and ``from_local`` back.
    Returns ``(value, known, order, freq_used, divergent_count)`` on the band.
    """
    shape = grid.band_shape
    N = int(np.prod(shape))
    omegas = sorted(systems)
    known = np.zeros(N, dtype=bool)
    value = np.full(N, np.nan + 0j, dtype=complex)
    order = np.full(N, -1, dtype=int)
    fused = np.full(N, np.nan)
    s0 = np.ravel_multi_index(seed_index, shape)
    known[s0] = True
    value[s0] = seed_value
    order[s0] = 0
    adm = np.stack([np.asarray(masks[w]).ravel() for w in omegas])               # (K, N)
    stren = np.stack([np.where(adm[k], np.asarray(strength[w]).ravel(), -np.inf) for k, w in enumerate(omegas)])
    alpha = [systems[w].alpha.reshape(3, N) for w in omegas]
    beta = [None if systems[w].beta is None else systems[w].beta.reshape(3, N) for w in omegas]
    idx = np.arange(N).reshape(shape)
    divergent = 0
    layer = 0
    while True:
        layer += 1
        src, dst, axis, sign = [], [], [], []
        kn = known.reshape(shape)
        for a, s in _DIRS:
            # edges c -> c + s e_a with c known and target unknown
            sl_c = [slice(None)] * 3
            sl_n = [slice(None)] * 3
            if s == 1:
                sl_c[a], sl_n[a] = slice(0, -1), slice(1, None)
            else:
                sl_c[a], sl_n[a] = slice(1, None), slice(0, -1)
            sel = kn[tuple(sl_c)] & ~kn[tuple(sl_n)]
            if sel.any():
                src.append(idx[tuple(sl_c)][sel])
                dst.append(idx[tuple(sl_n)][sel])
                axis.append(np.full(sel.sum(), a))
                sign.append(np.full(sel.sum(), s))
        if not src:
            break
        src, dst = np.concatenate(src), np.concatenate(dst)
        axis, sign = np.concatenate(axis), np.concatenate(sign)
        # best common frequency per edge
        common = np.minimum(stren[:, src], stren[:, dst])                       # (K, E)
        kbest = np.argmax(common, axis=0)
        ok = np.isfinite(common[kbest, np.arange(src.size)])
        if not ok.any():
            break
        src, dst, axis, sign, kbest = src[ok], dst[ok], axis[ok], sign[ok], kbest[ok]
        pred = np.empty(src.size, dtype=complex)
        for k, w in enumerate(omegas):
            m = kbest == k
            if not m.any():
                continue
            a0 = alpha[k][axis[m], src[m]]
            a1 = alpha[k][axis[m], dst[m]]
            if beta[k] is None:
                b0 = b1 = 0.0
            else:
                b0 = beta[k][axis[m], src[m]]
                b1 = beta[k][axis[m], dst[m]]
            y0 = to_local(value[src[m]], w)
            y1 = _rk4(y0, sign[m], a0, a1, b0, b1, grid.h, rk_steps)
            good = valid_local(y1)
            divergent += int((~good).sum())
            pred[m] = np.where(good, from_local(y1, w), np.nan)
        finite = np.isfinite(pred)
        if not finite.any():
            break
        dst_f, pred_f = dst[finite], pred[finite]
        tot = np.zeros(N, complex)
        cnt = np.zeros(N)
        np.add.at(tot, dst_f, pred_f)
        np.add.at(cnt, dst_f, 1)
        new = cnt > 0
        value[new] = tot[new] / cnt[new]
        known[new] = True
        order[new] = layer
        # frequency used: that of the strongest incoming edge
        w_edge = np.array(omegas)[kbest[finite]]
        st_edge = np.max(common[:, ok][:, finite], axis=0)
        best_st = np.full(N, -np.inf)
        np.maximum.at(best_st, dst_f, st_edge)
        pick = st_edge >= best_st[dst_f]
        fused[dst_f[pick]] = w_edge[pick]
    return (value.reshape(shape), known.reshape(shape), order.reshape(shape),
            fused.reshape(shape), divergent)


def _seed_band_index(grid: Grid, seed: SeedValue, masks: dict):
    b = tuple(int(c) - grid.margin for c in seed.cell)
    if len(b) != 3 or any(not 0 <= i < m for i, m in zip(b, grid.band_shape)):
        raise ReconstructionError(f"seed cell {seed.cell} is outside the interior band")
    if not any(np.asarray(m)[b] for m in masks.values()):
        raise ReconstructionError(f"seed cell {seed.cell} is outside every admissible region")
    return b


def _q_local(p, w):
    return w * p.real + 1j * p.imag


def _q_global(y, w):
    return y.real / w + 1j * y.imag


def _frequencies(dataset: SyntheticDataset, cover: CoverReport):
    K = [w for w in cover.K if w in dataset.measurements.frequencies]
    if not K:
        raise ReconstructionError("dataset contains none of the cover frequencies")
    return K


def _metrics(grid, truth: dict, rec: dict, valid):
    out = {"n_valid": int(valid.sum()), "band_cells": int(valid.size),
           "valid_fraction": float(valid.mean())}
    for name, t in truth.items():
        r = rec[name]
        if r is None or not valid.any():
            continue
        tb = _band(grid, t)[valid]
        err = np.abs(r[valid] - tb)
        out[f"{name}_rel_linf"] = float(err.max() / np.abs(tb).max())
        out[f"{name}_rel_l2"] = float(np.sqrt(np.mean(err ** 2)) / np.sqrt(np.mean(tb ** 2)))
    return out


def _q_report(grid, method, dataset, K, systems, masks, strength, seed, notes):
    b = _seed_band_index(grid, seed, masks)
    value, known, order, fused, div = grow(
        grid, systems, masks, strength, b, seed.eps_sigma(), _q_local, _q_global,
        lambda y: np.isfinite(y) & (y.imag > 0))
    if div:
        notes.append(f"{div} integration steps produced Im q <= 0 and were discarded")
    unreached = int((np.logical_or.reduce([masks[w] for w in K]) & ~known).sum())
    if unreached:
        notes.append(f"{unreached} covered cells unreachable from the seed")
    valid = known & (value.imag > 0)
    eps = np.where(valid, value.real, np.nan)
    sig = np.where(valid, value.imag, np.nan)
    p = dataset.params
    metrics = _metrics(grid, {"eps": p.eps, "sigma": p.sigma}, {"eps": eps, "sigma": sig}, valid)
    metrics.update({"frequencies": list(K), "divergent_steps": div})
    return ReconstructionReport(grid, method, eps, sig, None, valid, order, fused, metrics, notes)


def integrate_method1(dataset: SyntheticDataset, cover: CoverReport, seed: SeedValue,
                      illuminations=(0, 1, 2), s_lin=None, rk_steps: int = 4) -> ReconstructionReport:
    """First magnetic method: ``grad q M1 = -q lap v - q^2 omega v`` on each admissible region."""
    grid = dataset.grid
    K = _frequencies(dataset, cover)
    systems, masks, strength = {}, {}, {}
    for w in K:
        H = [dataset.H[(w, i)] for i in illuminations]
        sys_ = build_M1(grid, H, w, s_lin)
        systems[w] = sys_
        masks[w] = cover.masks[w] & sys_.admissible
        strength[w] = cover.values[w]
    return _q_report(grid, "method1", dataset, K, systems, masks, strength, seed, [])


def integrate_method2(dataset: SyntheticDataset, cover: CoverReport, seed: SeedValue,
                      illuminations=(0, 1, 2, 3, 4, 5), det_floor=None) -> ReconstructionReport:
    """Second magnetic method: ``grad q = q (gamma, ...) M2^-1``."""
    grid = dataset.grid
    K = _frequencies(dataset, cover)
    systems, masks, strength = {}, {}, {}
    for w in K:
        H = [dataset.H[(w, i)] for i in illuminations]
        sys_ = build_M2_and_rhs(grid, H, w, "magnetic", det_floor)
        systems[w] = sys_
        masks[w] = cover.masks[w] & sys_.admissible
        strength[w] = cover.values[w]
    return _q_report(grid, "method2", dataset, K, systems, masks, strength, seed, [])


def presmooth(dataset: SyntheticDataset, width: float) -> SyntheticDataset:
    """Gaussian pre-smoothing of the measured H and D fields (``width`` in cells, 0 = off).

    Meant for noisy data only: on exact data it adds an O(width^2 h^2) bias.
    Real and imaginary parts of each component are filtered separately with
    ``mode="nearest"`` so the boundary layer is not pulled towards zero.
    """
    if width < 0:
        raise ValueError("smoothing width must be >= 0")
    if width == 0:
        return dataset

    def f(a):
        sm = lambda x: ndimage.gaussian_filter(x, width, mode="nearest")  # noqa: E731
        return np.stack([sm(c.real) + 1j * sm(c.imag) for c in a])

    return dataclasses.replace(dataset, H={k: f(v) for k, v in dataset.H.items()},
                               D={k: f(v) for k, v in dataset.D.items()})


def curl_curl_cells(grid: Grid, E):
    """``curl curl E = grad div E - lap E`` on cell data (NaN where stencils leave known data)."""
    return op.cell_grad_div(E, grid.h) - op.cell_laplacian(E, grid.h)


def electroseismic_pipeline(dataset: SyntheticDataset, cover: CoverReport, seed: SeedValue,
                            check_point: SeedValue | None = None, det_floor=None) -> ReconstructionReport:
    """Recover L from ``D = L E``, then ``q`` from ``curl curl E = omega q E`` with ``E = D / L``.

    ``q`` is the least-squares quotient over the three components of the first
    field, so the usable set is the L region shrunk by the curl-curl stencil.
    ``check_point`` (known eps, sigma at a second cell) is only compared, not used.
    """
    grid = dataset.grid
    if not dataset.D:
        raise ReconstructionError("dataset has no electro-seismic D fields")
    if seed.L is not None and seed.L <= 0:
        raise ReconstructionError("electro-seismic seed needs a positive L value")
    K = _frequencies(dataset, cover)
    notes = []
    if seed.L is None:
        # the curl-curl quotient is homogeneous in E, so q does not need the scale of L
        notes.append("no L seed: L recovered up to a constant factor (seeded with 1)")
    systems, masks, strength = {}, {}, {}
    imag_ratio = 0.0
    for w in K:
        D = [dataset.D[(w, i)] for i in range(6)]
        sys_ = build_M2_and_rhs(grid, D, w, "electroseismic", det_floor)
        a = sys_.alpha
        imag_ratio = max(imag_ratio, float(np.max(np.abs(a.imag)[:, sys_.admissible], initial=0.0)
                                           / max(np.max(np.abs(a)[:, sys_.admissible], initial=0.0), 1e-300)))
        sys_.alpha = a.real.astype(complex)
        systems[w] = sys_
        masks[w] = cover.masks[w] & sys_.admissible
        strength[w] = cover.values[w]
    notes.append(f"max |Im alpha| / |alpha| for the L equation: {imag_ratio:.3e}")
    b = _seed_band_index(grid, seed, masks)
    value, known, order, fused, div = grow(
        grid, systems, masks, strength, b, complex(seed.L or 1.0), lambda p, w: p, lambda y, w: y,
        lambda y: np.isfinite(y) & (y.real > 0))
    if div:
        notes.append(f"{div} integration steps produced L <= 0 and were discarded")
    Lb = np.where(known, value.real, np.nan)
    Lfull = np.full(grid.cell_shape, np.nan)
    Lfull[grid.band] = Lb
    # q from the first field at the strongest admissible frequency per cell
    best_q = np.full(grid.band_shape, np.nan + 0j)
    best_st = np.full(grid.band_shape, -np.inf)
    fq = np.full(grid.band_shape, np.nan)
    for w in K:
        with np.errstate(invalid="ignore"):
            E1 = dataset.D[(w, 0)] / Lfull
            cc = _band(grid, curl_curl_cells(grid, E1))
            Eb = _band(grid, E1)
            q = np.sum(np.conj(Eb) * cc, axis=0) / (w * np.sum(np.abs(Eb) ** 2, axis=0))
        ok = cover.masks[w] & known & np.isfinite(q)
        take = ok & (cover.values[w] > best_st)
        best_q[take] = q[take]
        best_st[take] = cover.values[w][take]
        fq[take] = w
    q_valid = np.isfinite(best_q) & (best_q.imag > 0)
    if not q_valid.any():
        raise ReconstructionError("no cell where L is known and the second condition holds")
    with np.errstate(invalid="ignore"):
        eps = np.where(q_valid, best_q.real / np.where(np.isfinite(fq), fq, 1.0), np.nan)
    sig = np.where(q_valid, best_q.imag, np.nan)
    lost = int((known & ~q_valid).sum())
    if lost:
        notes.append(f"{lost} cells have L but no q (stencil reaches unrecovered L or condition 2 fails)")
    p = dataset.params
    metrics = _metrics(grid, {"eps": p.eps, "sigma": p.sigma}, {"eps": eps, "sigma": sig}, q_valid)
    if dataset.L is not None and known.any() and seed.L is not None:
        tl = _band(grid, dataset.L)[known]
        metrics["L_rel_linf"] = float(np.abs(Lb[known] - tl).max() / np.abs(tl).max())
    metrics.update({"frequencies": list(K), "divergent_steps": div})
    if check_point is not None:
        cb = tuple(int(c) - grid.margin for c in check_point.cell)
        if q_valid[cb]:
            metrics["check_point_error"] = float(abs(complex(eps[cb], sig[cb]) - check_point.eps_sigma()))
    metrics["n_L_valid"] = int(known.sum())
    return ReconstructionReport(grid, "electroseismic", eps, sig, Lb, q_valid, order, fq, metrics, notes)
