"""Scan a frequency interval and print the per-frequency condition statistics and the greedy cover.

    python scripts/cover_scan.py configs/zeta1_method1.json --samples 16
"""
import argparse
import dataclasses

from mfmaxwell import config as cm
from mfmaxwell import frequency as fq


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--samples", type=int, help="override the number of frequency samples")
    ap.add_argument("--max-size", type=int, default=None)
    a = ap.parse_args()
    cfg = cm.load(a.config)
    f = cfg.frequencies
    if a.samples:
        f = dataclasses.replace(f, n_samples=a.samples)
    res = fq.scan(cfg.material_params(), cfg.illumination_objects(), cfg.zeta,
                  fq.FrequencyGrid(f.k_min, f.k_max, f.n_samples))
    print(f"{'omega':>10} {'min':>10} {'mean':>10}")
    for w in res.frequencies:
        c = res.coverage(w)
        print(f"{w:10.5f} {c.min():10.4g} {c.mean():10.4g}")
    for w, msg in res.failures.items():
        print(f"{w:10.5f} excluded: {msg}")
    cov = fq.select_cover(res, cfg.cover.target_s, a.max_size or cfg.cover.max_size, cfg.cover.min_gain)
    print(f"K = {list(cov.K)}  s = {cov.s:.4g}  coverage = {cov.coverage:.3f}  "
          f"components = {cov.n_components}")


if __name__ == "__main__":
    main()
