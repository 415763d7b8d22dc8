#!/usr/bin/env python3
"""Desk-scale solver comparison on the bundled phantom.

Generates a blurred noisy problem, runs the reference configurations,
and writes per-solver traces plus a merged CSV.  Equivalent to:

    npdblur gen --image phantom:64 --psf gaussian:sigma=2:support=21 \
                --noise level=0.01,seed=1234 --out out/problem
    npdblur compare --problem out/problem --configs configs/*.cfg \
                --out out/traces
"""

import argparse
import sys
from pathlib import Path

from npdblur import cli

PRESETS = ("npd", "npdit", "pnpd", "pnpd_ne", "pnpd_bt")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out")
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--noise", default="level=0.01,seed=1234")
    ap.add_argument("--psf", default="gaussian:sigma=2:support=21")
    args = ap.parse_args()

    out = Path(args.out)
    configs_dir = Path(__file__).resolve().parent.parent / "configs"
    configs = [str(configs_dir / f"{p}.cfg") for p in PRESETS]

    rc = cli.main([
        "gen", "--image", f"phantom:{args.size}", "--psf", args.psf,
        "--noise", args.noise, "--out", str(out / "problem"),
    ])
    if rc != 0:
        return rc
    rc = cli.main([
        "compare", "--problem", str(out / "problem"),
        "--configs", *configs, "--out", str(out / "traces"),
    ])
    if rc != 0:
        return rc

    merged = (out / "traces" / "compare.csv").read_text().splitlines()
    header = merged[0].split(",")
    last = merged[-1].split(",")
    print("\nfinal-iteration summary:")
    for preset in PRESETS:
        idx = header.index(f"{preset}_rre")
        print(f"  {preset:8s} rre = {float(last[idx]):.4f}   "
              f"ssim = {float(last[header.index(f'{preset}_ssim')]):.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
