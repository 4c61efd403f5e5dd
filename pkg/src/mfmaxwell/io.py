"""Serialization: legacy VTK structured points (ASCII) and JSON manifests.

Field files use CELL_DATA on the unit box with ``DIMENSIONS n+1 n+1 n+1``;
values are written x-fastest as the VTK layout requires. Complex arrays are
split into ``<name>_re`` / ``<name>_im``. Numbers use ``%.17g`` so a write/read
round trip is exact, and every file is LF-terminated ASCII.
"""
from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from .grid import Grid

TOOL = "mfmaxwell"


class ManifestError(RuntimeError):
    pass


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:  # running from a source tree
        return "0.1.0"


def _fmt(a) -> str:
    return "\n".join("%.17g" % v for v in np.asarray(a, dtype=float).ravel())


def _xfast(a):
    return np.asarray(a).ravel(order="F")


def write_vtk(path, grid: Grid, scalars: dict | None = None, vectors: dict | None = None, title="mfmaxwell"):
    """Write cell fields. ``scalars``: name -> ``(n, n, n)``; ``vectors``: name -> ``(3, n, n, n)``."""
    scalars, vectors = dict(scalars or {}), dict(vectors or {})
    n = grid.n
    out = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII", "DATASET STRUCTURED_POINTS",
           f"DIMENSIONS {n + 1} {n + 1} {n + 1}", "ORIGIN 0 0 0", "SPACING %.17g %.17g %.17g" % ((grid.h,) * 3),
           f"CELL_DATA {grid.n_cells}"]

    def parts(name, a):
        a = np.asarray(a)
        if np.iscomplexobj(a):
            return [(name + "_re", a.real), (name + "_im", a.imag)]
        return [(name, a)]

    for name in sorted(scalars):
        a = np.asarray(scalars[name])
        if a.shape != grid.cell_shape:
            raise ValueError(f"scalar {name!r} has shape {a.shape}, expected {grid.cell_shape}")
        for nm, part in parts(name, a):
            out += [f"SCALARS {nm} double 1", "LOOKUP_TABLE default", _fmt(_xfast(part))]
    for name in sorted(vectors):
        a = np.asarray(vectors[name])
        if a.shape != (3,) + grid.cell_shape:
            raise ValueError(f"vector {name!r} has shape {a.shape}")
        for nm, part in parts(name, a):
            cols = np.stack([_xfast(part[k]) for k in range(3)], axis=1)
            out += [f"VECTORS {nm} double", "\n".join("%.17g %.17g %.17g" % tuple(r) for r in cols)]
    Path(path).write_bytes(("\n".join(out) + "\n").encode("ascii"))


def read_vtk(path):
    """Read a file written by :func:`write_vtk`. Returns ``(grid, arrays)``; ``_re``/``_im`` pairs are merged."""
    toks = Path(path).read_text(encoding="ascii").split("\n")
    if not toks[0].startswith("# vtk DataFile"):
        raise ValueError(f"{path}: not a legacy VTK file")
    if toks[2].strip() != "ASCII" or toks[3].strip() != "DATASET STRUCTURED_POINTS":
        raise ValueError(f"{path}: only ASCII structured points are supported")
    dims = [int(v) for v in toks[4].split()[1:]]
    if len(set(dims)) != 1:
        raise ValueError(f"{path}: non-cubic grid {dims}")
    grid = Grid(dims[0] - 1)
    n = grid.n
    ncell = grid.n_cells
    i = 7
    if not toks[i].startswith("CELL_DATA") or int(toks[i].split()[1]) != ncell:
        raise ValueError(f"{path}: expected CELL_DATA {ncell}")
    i += 1
    raw = {}
    while i < len(toks) and toks[i].strip():
        head = toks[i].split()
        if head[0] == "SCALARS":
            vals = np.array([float(v) for v in toks[i + 2:i + 2 + ncell]])
            raw[head[1]] = vals.reshape((n, n, n), order="F")
            i += 2 + ncell
        elif head[0] == "VECTORS":
            rows = np.array([[float(v) for v in r.split()] for r in toks[i + 1:i + 1 + ncell]])
            raw[head[1]] = np.stack([rows[:, k].reshape((n, n, n), order="F") for k in range(3)])
            i += 1 + ncell
        else:
            raise ValueError(f"{path}: unexpected section {head[0]!r}")
    arrays = {}
    for name, a in raw.items():
        if name.endswith("_im") and name[:-3] + "_re" in raw:
            continue
        if name.endswith("_re") and name[:-3] + "_im" in raw:
            arrays[name[:-3]] = a + 1j * raw[name[:-3] + "_im"]
        else:
            arrays[name] = a
    return grid, arrays


def embed_band(grid: Grid, a, fill=np.nan):
    """Band array ``(..., *band)`` -> full cell array with ``fill`` outside the band."""
    a = np.asarray(a)
    out = np.full(a.shape[:-3] + grid.cell_shape, fill, dtype=np.result_type(a, float))
    out[(Ellipsis,) + grid.band] = a
    return out


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="ascii")


@dataclass
class Manifest:
    """Checksummed record of one command's outputs."""

    command: str
    config_hash: str
    problem_hash: str
    config: dict
    files: dict = field(default_factory=dict)       # relative name -> sha256
    inputs: dict = field(default_factory=dict)      # role -> upstream dataset id
    timing: dict = field(default_factory=dict)
    tool: str = TOOL
    version: str = field(default_factory=tool_version)

    NAME = "manifest.json"

    @property
    def dataset_id(self) -> str:
        """Hash of the outputs (not of timing), stable across identical reruns."""
        return config_hash({"command": self.command, "problem": self.problem_hash, "files": self.files})

    def add(self, root, name):
        self.files[name] = sha256_file(Path(root) / name)

    def write(self, root):
        d = {k: getattr(self, k) for k in ("tool", "version", "command", "config_hash", "problem_hash",
                                           "config", "files", "inputs", "timing")}
        d["dataset_id"] = self.dataset_id
        write_json(Path(root) / self.NAME, d)

    @classmethod
    def load(cls, root, verify=True) -> "Manifest":
        p = Path(root) / cls.NAME
        if not p.exists():
            raise ManifestError(f"no manifest in {root}")
        d = json.loads(p.read_text())
        m = cls(d["command"], d["config_hash"], d["problem_hash"], d["config"], d["files"], d.get("inputs", {}),
                d.get("timing", {}), d.get("tool", TOOL), d.get("version", "?"))
        if verify:
            for name, digest in m.files.items():
                f = Path(root) / name
                if not f.exists():
                    raise ManifestError(f"{root}: listed file {name} is missing")
                if sha256_file(f) != digest:
                    raise ManifestError(f"{root}: checksum mismatch for {name}")
        return m


class Timer:
    def __init__(self):
        self.t = {}

    def __call__(self, name):
        timer = self

        class _T:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timer.t[name] = round(time.perf_counter() - self.t0, 3)

        return _T()


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
