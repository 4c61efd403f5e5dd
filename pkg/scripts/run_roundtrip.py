"""Synthesize, select and reconstruct for one config, printing the error table.

    python scripts/run_roundtrip.py configs/zeta2_method2.json --out runs/m2
"""
import argparse
import sys
from pathlib import Path

from mfmaxwell import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config", type=Path)
    ap.add_argument("--out", type=Path, required=True)
    a = ap.parse_args()
    c = str(a.config)
    steps = [["synthesize", "--config", c, "--out", str(a.out / "data")],
             ["select", "--config", c, "--out", str(a.out / "cover")],
             ["reconstruct", "--config", c, "--out", str(a.out / "rec"),
              "--dataset", str(a.out / "data"), "--cover", str(a.out / "cover")]]
    for argv in steps:
        print(f"== {argv[0]}", flush=True)
        code = cli.main(["-v"] + argv)
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
