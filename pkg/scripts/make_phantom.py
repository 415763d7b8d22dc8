#!/usr/bin/env python3
"""Write the bundled piecewise-constant phantom as a PGM file."""

import argparse
from pathlib import Path

from npdblur import bench, grids


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--maxval", type=int, default=65535, choices=(255, 65535))
    ap.add_argument("--out", default="phantom.pgm")
    args = ap.parse_args()
    img = bench.make_phantom(args.size, args.size)
    Path(args.out).write_bytes(grids.write_pgm(img, maxval=args.maxval))
    print(f"wrote {args.out} ({args.size}x{args.size}, maxval {args.maxval})")


if __name__ == "__main__":
    main()
