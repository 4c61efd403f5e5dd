"""Command line: ``mfmaxwell synthesize | scan | select | reconstruct | verify``.

Exit status is 0 only on full success; 1 for failed checks, solver failures,
uncoverable scans or artifact mismatches; 2 for invalid configs or usage.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import forward as fw
from . import frequency as fq
from . import io
from . import reconstruct as rc
from . import verify as vf

log = logging.getLogger("mfmaxwell")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class CommandError(RuntimeError):
    """A failure that maps to exit status 1 with a message."""


# -- dataset and cover artifacts ---------------------------------------------

def _data_name(j, i):
    return f"data_w{j}_i{i}.vtk"


def _manifest(cfg, command):
    return io.Manifest(command, cfg.hash, cfg.problem_hash, cfg.to_dict())


def cmd_synthesize(cfg: cfgmod.ExperimentConfig, out: Path) -> io.Manifest:
    timer = io.Timer()
    params = cfg.material_params()
    L = cfg.L_field()
    freqs = fq.FrequencyGrid(cfg.frequencies.k_min, cfg.frequencies.k_max, cfg.frequencies.n_samples).samples
    mset = fw.MeasurementSet(freqs, cfg.illumination_objects())
    with timer("forward"):
        ds = fw.synthesize_measurements(params, mset, cfg.noise.level, cfg.noise.seed, L,
                                        cfg.solver.method, cfg.solver.workers)
    m = _manifest(cfg, "synthesize")
    truth = {"mu": params.mu, "eps": params.eps, "sigma": params.sigma}
    if L is not None:
        truth["L"] = L
    io.write_vtk(out / "truth.vtk", params.grid, truth, title="ground truth coefficients")
    m.add(out, "truth.vtk")
    with timer("write"):
        for j, w in enumerate(freqs):
            for i in range(len(mset.illuminations)):
                vec = {"H": ds.H[(w, i)], "E": ds.E[(w, i)]}
                if ds.D:
                    vec["D"] = ds.D[(w, i)]
                name = _data_name(j, i)
                io.write_vtk(out / name, params.grid, vectors=vec, title=f"omega={w!r} illumination={i}")
                m.add(out, name)
    meta = {"frequencies": list(freqs), "illuminations": list(cfg.illuminations),
            "noise": ds.noise, "max_residual": max(ds.residuals.values())}
    io.write_json(out / "dataset.json", meta)
    m.add(out, "dataset.json")
    m.timing = timer.t
    m.write(out)
    return m


def load_dataset(cfg: cfgmod.ExperimentConfig, root: Path) -> fw.SyntheticDataset:
    root = Path(root)
    meta = json.loads((root / "dataset.json").read_text())
    _, truth = io.read_vtk(root / "truth.vtk")
    grid = cfg.grid
    params = fw.MaterialParams(grid, truth["mu"], truth["eps"], truth["sigma"])
    freqs = tuple(meta["frequencies"])
    ill = tuple(fw.Illumination.parse(s) for s in meta["illuminations"])
    H, E, D = {}, {}, {}
    for j, w in enumerate(freqs):
        for i in range(len(ill)):
            _, arr = io.read_vtk(root / _data_name(j, i))
            H[(w, i)], E[(w, i)] = arr["H"], arr["E"]
            if "D" in arr:
                D[(w, i)] = arr["D"]
    return fw.SyntheticDataset(params, fw.MeasurementSet(freqs, ill), H, E, D, truth.get("L"),
                               meta["noise"], {})


def _run_scan(cfg):
    fgrid = fq.FrequencyGrid(cfg.frequencies.k_min, cfg.frequencies.k_max, cfg.frequencies.n_samples)
    res = fq.scan(cfg.material_params(), cfg.illumination_objects(), cfg.zeta, fgrid, cfg.solver.method,
                  cfg.solver.workers)
    return fgrid, res


def _write_scan(cfg, fgrid, res, out: Path, m: io.Manifest):
    grid = res.grid
    scalars = {}
    for j, w in enumerate(fgrid.samples):
        if w in res.conditions:
            for l, v in enumerate(res.conditions[w].values):
                scalars[f"zeta_w{j}_l{l}"] = io.embed_band(grid, v)
    io.write_vtk(out / "scan.vtk", grid, scalars, title=f"{cfg.zeta} condition values")
    summary = {"zeta": cfg.zeta, "frequencies": list(fgrid.samples), "usable": list(res.frequencies),
               "failures": {repr(k): v for k, v in res.failures.items()},
               "min_value": {repr(w): float(res.coverage(w).min()) for w in res.frequencies},
               "mean_value": {repr(w): float(res.coverage(w).mean()) for w in res.frequencies}}
    io.write_json(out / "scan.json", summary)
    m.add(out, "scan.vtk")
    m.add(out, "scan.json")


def cmd_scan(cfg: cfgmod.ExperimentConfig, out: Path) -> io.Manifest:
    timer = io.Timer()
    with timer("scan"):
        fgrid, res = _run_scan(cfg)
    m = _manifest(cfg, "scan")
    _write_scan(cfg, fgrid, res, out, m)
    m.timing = timer.t
    m.write(out)
    return m


def load_scan(cfg: cfgmod.ExperimentConfig, root: Path) -> fq.ScanResult:
    import mfmaxwell.functionals as fn

    meta = json.loads((Path(root) / "scan.json").read_text())
    _, arr = io.read_vtk(Path(root) / "scan.vtk")
    grid = cfg.grid
    z = fn.ZETAS[meta["zeta"]]
    conds = {}
    for j, w in enumerate(meta["frequencies"]):
        if w not in meta["usable"]:
            continue
        vals = np.stack([arr[f"zeta_w{j}_l{l}"][grid.band] for l in range(z.r)])
        conds[w] = fn.ConditionField(grid, vals, {"omega": w})
    return fq.ScanResult(z, grid, tuple(meta["usable"]), conds)


def cmd_select(cfg: cfgmod.ExperimentConfig, out: Path, scan_dir: Path | None) -> io.Manifest:
    timer = io.Timer()
    m = _manifest(cfg, "select")
    if scan_dir is not None:
        sm = io.Manifest.load(scan_dir)
        _check_problem(cfg, sm, "scan")
        res = load_scan(cfg, scan_dir)
        m.inputs["scan"] = sm.dataset_id
    else:
        with timer("scan"):
            fgrid, res = _run_scan(cfg)
        _write_scan(cfg, fgrid, res, out, m)
    c = cfg.cover
    with timer("select"):
        try:
            cov = fq.select_cover(res, c.target_s, c.max_size, c.min_gain)
        except fq.UncoverableError as exc:
            io.write_json(out / "uncoverable.json", {"message": str(exc), "worst_cells": exc.worst_cells})
            raise CommandError(str(exc)) from exc
    write_cover(cov, out, m)
    m.timing = timer.t
    m.write(out)
    return m


def write_cover(cov: fq.CoverReport, out: Path, m: io.Manifest):
    grid = cov.grid
    sc = {}
    for j, w in enumerate(cov.K):
        sc[f"value_k{j}"] = io.embed_band(grid, cov.values[w])
        sc[f"mask_k{j}"] = io.embed_band(grid, cov.masks[w].astype(float), fill=0.0)
        sc[f"label_k{j}"] = io.embed_band(grid, cov.labels[w].astype(float), fill=0.0)
    io.write_vtk(out / "cover.vtk", grid, sc, title=f"{cov.zeta} cover")
    summary = {"zeta": cov.zeta, "K": list(cov.K), "s": cov.s, "certified_s": cov.certified_s(),
               "coverage": cov.coverage, "n_components": {repr(w): v for w, v in cov.n_components.items()},
               "scanned": list(cov.scanned), "soft_limit_exceeded": len(cov.K) > fq.SOFT_MAX_FREQUENCIES}
    io.write_json(out / "cover.json", summary)
    m.add(out, "cover.vtk")
    m.add(out, "cover.json")


def load_cover(cfg: cfgmod.ExperimentConfig, root: Path) -> fq.CoverReport:
    meta = json.loads((Path(root) / "cover.json").read_text())
    _, arr = io.read_vtk(Path(root) / "cover.vtk")
    grid = cfg.grid
    b = grid.band
    K = tuple(meta["K"])
    values = {w: arr[f"value_k{j}"][b] for j, w in enumerate(K)}
    masks = {w: arr[f"mask_k{j}"][b] > 0.5 for j, w in enumerate(K)}
    labels = {w: arr[f"label_k{j}"][b].astype(int) for j, w in enumerate(K)}
    ncomp = {w: int(labels[w].max()) for w in K}
    return fq.CoverReport(meta["zeta"], grid, K, meta["s"], values, masks, labels, ncomp, meta["coverage"],
                          tuple(meta["scanned"]))


def _check_problem(cfg, manifest: io.Manifest, role: str):
    if manifest.problem_hash != cfg.problem_hash:
        raise CommandError(f"{role} artifacts were produced for a different problem "
                           f"({manifest.problem_hash[:12]} != {cfg.problem_hash[:12]})")


def seed_for(cfg: cfgmod.ExperimentConfig, ds: fw.SyntheticDataset) -> rc.SeedValue:
    cell = cfg.seed_cell
    sv = cfg.reconstruction.seed_values
    es = cfg.reconstruction.method == "electroseismic"
    if sv == "truth":
        if es:
            return rc.SeedValue(cell, L=float(ds.L[cell]))
        return rc.SeedValue(cell, eps=float(ds.params.eps[cell]), sigma=float(ds.params.sigma[cell]))
    unknown = set(sv) - {"eps", "sigma", "L"}
    if unknown:
        raise cfgmod.ConfigError(f"reconstruction.seed_values.{sorted(unknown)[0]}: unknown key")
    return rc.SeedValue(cell, eps=sv.get("eps"), sigma=sv.get("sigma"), L=sv.get("L"))


def run_reconstruction(cfg, ds, cov) -> rc.ReconstructionReport:
    r = cfg.reconstruction
    seed = seed_for(cfg, ds)
    ds = rc.presmooth(ds, r.presmooth)
    if r.method == "method1":
        idx = r.illumination_indices or (0, 1, 2)
        return rc.integrate_method1(ds, cov, seed, illuminations=tuple(idx))
    if r.method == "method2":
        idx = r.illumination_indices or tuple(range(6))
        return rc.integrate_method2(ds, cov, seed, illuminations=tuple(idx))
    return rc.electroseismic_pipeline(ds, cov, seed)


def write_report(rep: rc.ReconstructionReport, out: Path, m: io.Manifest):
    grid = rep.grid
    sc = {"valid": io.embed_band(grid, rep.valid.astype(float), fill=0.0),
          "order": io.embed_band(grid, rep.order.astype(float), fill=-1.0),
          "frequency_used": io.embed_band(grid, rep.frequency_used)}
    for name in ("eps", "sigma", "L"):
        a = getattr(rep, name)
        if a is not None:
            sc[name] = io.embed_band(grid, a)
    io.write_vtk(out / "reconstruction.vtk", grid, sc, title=f"{rep.method} reconstruction")
    lines = [f"method = {rep.method}"]
    for k in sorted(rep.metrics):
        v = rep.metrics[k]
        lines.append(f"{k} = {v!r}" if not isinstance(v, float) else f"{k} = {v:.17g}")
    for note in rep.notes:
        lines.append(f"note = {note}")
    (out / "errors.txt").write_bytes(("\n".join(lines) + "\n").encode("ascii"))
    m.add(out, "reconstruction.vtk")
    m.add(out, "errors.txt")


def cmd_reconstruct(cfg, out: Path, dataset_dir: Path, cover_dir: Path) -> tuple:
    timer = io.Timer()
    dm = io.Manifest.load(dataset_dir)
    cm = io.Manifest.load(cover_dir)
    if dm.command != "synthesize":
        raise CommandError(f"{dataset_dir} does not hold a synthesized dataset")
    if cm.command != "select":
        raise CommandError(f"{cover_dir} does not hold a cover")
    _check_problem(cfg, dm, "dataset")
    _check_problem(cfg, cm, "cover")
    with timer("load"):
        ds = load_dataset(cfg, dataset_dir)
        cov = load_cover(cfg, cover_dir)
    m = _manifest(cfg, "reconstruct")
    m.inputs = {"dataset": dm.dataset_id, "cover": cm.dataset_id}
    with timer("reconstruct"):
        try:
            rep = run_reconstruction(cfg, ds, cov)
        except rc.ReconstructionError as exc:
            raise CommandError(str(exc)) from exc
    write_report(rep, out, m)
    m.timing = timer.t
    m.write(out)
    return m, rep


def cmd_verify(suite: str, out: Path | None):
    checks = vf.run(suite)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value:.6g} ({c.threshold})")
    if out is not None:
        io.write_json(out / "verify.json", {"suite": suite, "checks": [c.as_dict() for c in checks],
                                            "passed": all(c.passed for c in checks)})
    return all(c.passed for c in checks)


# -- entry point -----------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="mfmaxwell", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", type=Path, required=config_required)
        sp.add_argument("--out", type=Path, help="output directory (default: config 'output')")
        return sp

    common(sub.add_parser("synthesize", help="forward-solve every (frequency, illumination)"))
    common(sub.add_parser("scan", help="evaluate the zeta conditions over sampled frequencies"))
    s = common(sub.add_parser("select", help="greedy frequency cover from a scan"))
    s.add_argument("--scan", type=Path, help="scan directory (default: run the scan)")
    s = common(sub.add_parser("reconstruct", help="run the configured reconstruction"))
    s.add_argument("--dataset", type=Path, required=True)
    s.add_argument("--cover", type=Path, required=True)
    s = common(sub.add_parser("verify", help="run a self-check suite"), config_required=False)
    s.add_argument("--suite", default="all", choices=sorted(vf.SUITES) + ["all"])
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = cfgmod.load(args.config) if args.config is not None else None
        out = args.out or (Path(cfg.output) if cfg is not None and cfg.output else None)
        if out is None and args.command != "verify":
            raise cfgmod.ConfigError("output: give --out or set 'output' in the config")
        if out is not None:
            io.ensure_dir(out)
        if args.command == "verify":
            return EXIT_OK if cmd_verify(args.suite, out) else EXIT_FAIL
        if args.command == "synthesize":
            cmd_synthesize(cfg, out)
        elif args.command == "scan":
            cmd_scan(cfg, out)
        elif args.command == "select":
            cmd_select(cfg, out, args.scan)
        elif args.command == "reconstruct":
            _, rep = cmd_reconstruct(cfg, out, args.dataset, args.cover)
            print((out / "errors.txt").read_text(), end="")
        return EXIT_OK
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CommandError, io.ManifestError, fw.ForwardFailure, fw.SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except fw.MaterialError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
