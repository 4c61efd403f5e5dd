"""Frequency sweeps and greedy selection of a finite covering frequency set."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import functionals as fn
from .forward import ForwardFailure, parallel_map, solve_all
from .grid import Grid
from .materials import MaterialParams

log = logging.getLogger(__name__)

SOFT_MAX_FREQUENCIES = 4


@dataclass(frozen=True)
class FrequencyGrid:
    """``n_samples`` midpoints of equal subintervals of ``[k_min, k_max]``."""

    k_min: float = 0.5
    k_max: float = 2.0
    n_samples: int = 8

    def __post_init__(self):
        if not 0 < self.k_min < self.k_max:
            raise ValueError("need 0 < k_min < k_max")
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")

    @property
    def samples(self) -> tuple:
        step = (self.k_max - self.k_min) / self.n_samples
        return tuple(float(self.k_min + (j + 0.5) * step) for j in range(self.n_samples))


@dataclass(eq=False)
class ScanResult:
    zeta: fn.ZetaDescriptor
    grid: Grid
    frequencies: tuple
    conditions: dict            # omega -> ConditionField
    failures: dict = field(default_factory=dict)  # omega -> message

    def coverage(self, omega) -> np.ndarray:
        return self.conditions[omega].coverage_value


def scan(params: MaterialParams, illuminations, zeta, freq_grid, method="auto", workers=None) -> ScanResult:
    """Solve all forward problems at each sampled frequency and evaluate the zeta conditions."""
    z = fn.ZETAS[zeta] if isinstance(zeta, str) else zeta
    if len(illuminations) != z.b:
        raise ValueError(f"{z.id} needs {z.b} illuminations, got {len(illuminations)}")
    grid = params.grid
    grid.require_band(z.derivative_order or 1)
    omegas = freq_grid.samples if isinstance(freq_grid, FrequencyGrid) else tuple(float(w) for w in freq_grid)

    def one(w):
        try:
            sols = solve_all(params, w, illuminations, method)
        except ForwardFailure as exc:
            return w, None, str(exc)
        fields = [s.E.cells for s in sols]
        prov = {"omega": w, "illuminations": [phi.id for phi in illuminations]}
        return w, fn.evaluate(z, grid, fields, prov), None

    conds, fails = {}, {}
    for w, cf, err in parallel_map(one, omegas, workers):
        if cf is None:
            log.warning("excluding omega=%s: %s", w, err)
            fails[w] = err
        else:
            conds[w] = cf
    return ScanResult(z, grid, tuple(w for w in omegas if w in conds), conds, fails)


class UncoverableError(ValueError):
    def __init__(self, msg, worst_cells):
        super().__init__(msg)
        self.worst_cells = worst_cells


@dataclass(eq=False)
class CoverReport:
    zeta: str
    grid: Grid
    K: tuple
    s: float
    values: dict        # omega -> min_l |zeta_l| on the band
    masks: dict         # omega -> values > s/2
    labels: dict        # omega -> component labels (0 = outside)
    n_components: dict
    coverage: float
    scanned: tuple = ()

    @property
    def union(self) -> np.ndarray:
        out = np.zeros(self.grid.band_shape, dtype=bool)
        for m in self.masks.values():
            out |= m
        return out

    def certified_s(self) -> float:
        """Recompute ``min_x max_{omega in K} min_l |zeta_l|``."""
        return float(np.min(np.max(np.stack([self.values[w] for w in self.K]), axis=0)))


def components(mask):
    """6-connected components; labels ordered by first cell in C order. Returns ``(labels, count)``."""
    mask = np.asarray(mask, dtype=bool)
    structure = ndimage.generate_binary_structure(mask.ndim, 1)
    labels, count = ndimage.label(mask, structure=structure)
    return labels, int(count)


def _worst_cells(grid: Grid, best, k=5):
    flat = np.argsort(best, axis=None, kind="stable")[:k]
    out = []
    for f in flat:
        idx = np.unravel_index(f, best.shape)
        cell = tuple(int(i + grid.margin) for i in idx)
        out.append({"cell": cell, "x": tuple((c + 0.5) * grid.h for c in cell), "value": float(best[idx])})
    return out


def select_cover(result: ScanResult, target_s: float | None = None, max_size: int = SOFT_MAX_FREQUENCIES,
                 min_gain: float = 0.05) -> CoverReport:
    """Greedy max-min cover over the scanned frequencies.

    At each step add the frequency that maximises ``min_x max_{omega in K} c_omega(x)``
    (ties broken by the mean covered value, then by scan order). Stops when
    ``target_s`` is reached, the budget ``max_size`` is used, or (without a target)
    the relative gain in s falls below ``min_gain``.
    """
    if not result.conditions:
        raise ValueError("scan has no usable frequencies")
    grid = result.grid
    cand = list(result.frequencies)
    vals = {w: result.coverage(w) for w in cand}
    best = np.zeros(grid.band_shape)
    K: list = []
    s = 0.0
    while cand and len(K) < max_size:
        scored = []
        for j, w in enumerate(cand):
            m = np.maximum(best, vals[w])
            scored.append((float(m.min()), float(m.mean()), -j, w))
        new_s, new_mean, _, w = max(scored)
        if K:
            if target_s is not None and s >= target_s:
                break
            if s > 0 and new_s <= s * (1 + min_gain) and (target_s is None or new_s <= s):
                break
            if s == 0 and new_s == 0 and new_mean <= float(best.mean()):
                break
        K.append(w)
        cand.remove(w)
        best = np.maximum(best, vals[w])
        s = float(best.min())
    if s <= 0:
        allbest = np.max(np.stack([vals[w] for w in result.frequencies]), axis=0)
        worst = _worst_cells(grid, allbest)
        raise UncoverableError(f"no positive threshold achievable; worst cells {worst}", worst)
    if len(K) > SOFT_MAX_FREQUENCIES:
        log.info("cover uses %d frequencies (more than %d)", len(K), SOFT_MAX_FREQUENCIES)
    K_sorted = tuple(sorted(K))
    masks, labels, ncomp = {}, {}, {}
    for w in K_sorted:
        masks[w] = vals[w] > s / 2
        labels[w], ncomp[w] = components(masks[w])
    union = np.zeros(grid.band_shape, dtype=bool)
    for m in masks.values():
        union |= m
    return CoverReport(result.zeta.id, grid, K_sorted, s, {w: vals[w] for w in K_sorted}, masks, labels,
                       ncomp, float(union.mean()), tuple(result.frequencies))


def cover_from_values(grid: Grid, zeta: str, values: dict, **kw) -> CoverReport:
    """Run :func:`select_cover` on precomputed coverage fields (``omega -> band array``)."""
    conds = {w: fn.ConditionField(grid, v) for w, v in values.items()}
    res = ScanResult(fn.ZETAS[zeta], grid, tuple(values), conds)
    return select_cover(res, **kw)
