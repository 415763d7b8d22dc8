#!/usr/bin/env python3
"""Sweep the preconditioner shift nu for the left-preconditioned solver
and record how the error trajectory destabilizes as nu shrinks.

For each nu the script runs three variants (one inner iteration, ten
inner iterations, and no extrapolation) and reports the largest rise of
the error above its running minimum; a large rise means the trajectory
left its floor, the small-nu instability.  Writes one trace CSV per run.
"""

import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from npdblur import bench, grids, regularizers, solvers, spectral


def max_rise(trace):
    rres = [row.rre for row in trace]
    floor = np.minimum.accumulate(rres)
    return max((r - f) / f for r, f in zip(rres, floor))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/stability")
    ap.add_argument("--lam", type=float, default=4e-3)
    ap.add_argument("--iters", type=int, default=50)
    ap.add_argument("--nus", default="0.1,0.03,0.01")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    x = bench.make_phantom(64, 64)
    psf = bench.gen_psf(bench.PsfSpec("gaussian", sigma=2.0, support=21))
    spec = spectral.psf_to_spectrum(psf, 64, 64)
    b = spectral.conv_apply(spec, x)
    b_delta, _, _ = bench.add_noise(b, bench.NoiseSpec(0.01, 1234))
    prob = solvers.Problem(
        spec, b_delta, regularizers.Regularizer("tv_iso", args.lam), x_true=x
    )

    print(f"{'nu':>8} {'k=1 rise':>10} {'k=10 rise':>10} {'no-inertia':>11}")
    for nu in (float(v) for v in args.nus.split(",")):
        sched = solvers.Scheduler("constant", nu_const=nu)
        rises = []
        for tag, preset, k in (("k1", "pnpd", 1), ("k10", "pnpd", 10),
                               ("ne", "pnpd_ne", 1)):
            cfg = replace(solvers.make_preset(preset), scheduler=sched,
                          k_max=k, max_iter=args.iters)
            _, trace = solvers.run_solver(prob, cfg)
            name = f"nu{nu:g}_{tag}"
            (out / f"trace_{name}.csv").write_bytes(grids.write_trace_csv(trace))
            rises.append(max_rise(trace))
        print(f"{nu:8g} {rises[0]:10.1%} {rises[1]:10.1%} {rises[2]:11.1%}")


if __name__ == "__main__":
    main()
