"""Reconstruction error against grid size for a fixed smooth medium.

Prints one row per n with relative sup errors of every method. Useful to see
whether a given error is discretization-limited (it should fall roughly like h^2).

    python scripts/refinement_study.py --ns 16 24 32 --width 0.3
"""
import argparse
import time

from mfmaxwell import forward as fw
from mfmaxwell import frequency as fq
from mfmaxwell import functionals as fn
from mfmaxwell import reconstruct as rc
from mfmaxwell.grid import Grid
from mfmaxwell.materials import Bump, Illumination, MaterialParams, ScalarSpec

SIX = ("e2", "grad(x1*x2)", "e3", "grad(x2*x3)", "e1", "grad(x1*x3)")


def run(n, width, amp, omega):
    g = Grid(n)
    p = MaterialParams.from_specs(g, ScalarSpec(1.0), ScalarSpec(1.0, (Bump((0.5, 0.5, 0.5), width, amp),)),
                                  ScalarSpec(1.0, (Bump((0.45, 0.5, 0.55), width, amp),)))
    L = ScalarSpec(1.0, (Bump((0.5, 0.55, 0.5), width, 0.3),)).sample(g)
    ds = fw.synthesize_measurements(p, fw.MeasurementSet((omega,), tuple(Illumination.parse(s) for s in SIX)), L=L)
    E = [ds.E[(omega, i)] for i in range(6)]
    cov = {z: fq.cover_from_values(g, z, {omega: fn.evaluate(z, g, f).coverage_value})
           for z, f in (("zeta1", [E[4], E[0], E[2]]), ("zeta2", E), ("zeta3", E))}
    c = (n // 2,) * 3
    seed = rc.SeedValue(c, eps=float(p.eps[c]), sigma=float(p.sigma[c]))
    return {"method1": rc.integrate_method1(ds, cov["zeta1"], seed, illuminations=(4, 0, 2)).metrics,
            "method2": rc.integrate_method2(ds, cov["zeta2"], seed).metrics,
            "es": rc.electroseismic_pipeline(ds, cov["zeta3"], rc.SeedValue(c, L=float(L[c]))).metrics}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ns", type=int, nargs="+", default=[16, 24])
    ap.add_argument("--width", type=float, default=0.3)
    ap.add_argument("--amplitude", type=float, default=0.2)
    ap.add_argument("--omega", type=float, default=1.90625)
    a = ap.parse_args()
    print(f"{'n':>4} {'m1 eps':>9} {'m1 sig':>9} {'m2 eps':>9} {'m2 sig':>9} {'es eps':>9} {'es sig':>9} {'es L':>9}  sec")
    for n in a.ns:
        t0 = time.perf_counter()
        m = run(n, a.width, a.amplitude, a.omega)
        row = [m["method1"]["eps_rel_linf"], m["method1"]["sigma_rel_linf"], m["method2"]["eps_rel_linf"],
               m["method2"]["sigma_rel_linf"], m["es"]["eps_rel_linf"], m["es"]["sigma_rel_linf"],
               m["es"]["L_rel_linf"]]
        print(f"{n:>4} " + " ".join(f"{v:9.2e}" for v in row) + f"  {time.perf_counter() - t0:.0f}", flush=True)


if __name__ == "__main__":
    main()
