"""Command line benchmark harness.

    npdblur gen --image PATH --psf gaussian:sigma=2:support=21 \
                --noise level=0.01,seed=7 --out DIR
    npdblur run --problem DIR --config FILE --out DIR
    npdblur compare --problem DIR --configs FILE [FILE ...] --out DIR

``gen`` accepts a PGM path or the literal ``phantom[:SIZE]`` for the
bundled piecewise-constant test image.  Exit codes: 0 success, 1 usage
or file error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench, configio, grids, solvers

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _parse_kv(text: str, sep: str) -> dict[str, str]:
    out = {}
    for part in text.split(sep):
        if not part:
            continue
        if "=" not in part:
            raise ValueError(f"expected key=value, got {part!r}")
        key, value = part.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def parse_psf_arg(text: str) -> bench.PsfSpec:
    """gaussian:sigma=2:support=21 or motion:length=9:angle=45:support=21"""
    kind, _, rest = text.partition(":")
    kv = _parse_kv(rest, ":")
    kind = kind.strip().lower()
    kwargs = {}
    if "support" in kv:
        kwargs["support"] = int(kv.pop("support"))
    if kind == bench.GAUSSIAN:
        if "sigma" in kv:
            kwargs["sigma"] = float(kv.pop("sigma"))
    elif kind == bench.MOTION:
        if "length" in kv:
            kwargs["length"] = int(kv.pop("length"))
        if "angle" in kv:
            kwargs["angle"] = float(kv.pop("angle"))
    if kv:
        raise ValueError(f"unknown psf parameters {sorted(kv)}")
    return bench.PsfSpec(kind=kind, **kwargs)


def parse_noise_arg(text: str) -> bench.NoiseSpec:
    """level=0.01,seed=7"""
    kv = _parse_kv(text, ",")
    if not {"level", "seed"} <= kv.keys() or kv.keys() - {"level", "seed"}:
        raise ValueError("noise spec needs exactly level=...,seed=...")
    return bench.NoiseSpec(level=float(kv["level"]), seed=int(kv["seed"]))


def _load_image(arg: str):
    if arg == "phantom" or arg.startswith("phantom:"):
        size = int(arg.partition(":")[2]) if ":" in arg else 64
        return bench.make_phantom(size, size)
    return grids.read_pgm(Path(arg).read_bytes())


def cmd_gen(args) -> int:
    image = _load_image(args.image)
    psf_spec = parse_psf_arg(args.psf)
    noise_spec = parse_noise_arg(args.noise)
    bench.generate_problem_dir(Path(args.out), image, psf_spec, noise_spec)
    print(f"problem written to {args.out}")
    return EXIT_OK


def _run_one(problem_dir: Path, config_path: Path, out_dir: Path, name: str):
    cfg, reg = configio.load_config(config_path)
    if reg is None:
        raise ValueError(f"{config_path}: config must carry a [regularizer] section")
    problem = bench.load_problem_dir(problem_dir, reg)
    u_final, trace = solvers.run_solver(problem, cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"reconstruction_{name}.pgm").write_bytes(grids.write_pgm(u_final))
    (out_dir / f"trace_{name}.csv").write_bytes(grids.write_trace_csv(trace))
    return trace


def cmd_run(args) -> int:
    name = Path(args.config).stem
    _run_one(Path(args.problem), Path(args.config), Path(args.out), name)
    print(f"reconstruction and trace written to {args.out}")
    return EXIT_OK


def _merge_traces(names, traces) -> bytes:
    header = ["iteration"]
    for name in names:
        header += [f"{name}_elapsed_s", f"{name}_objective",
                   f"{name}_rre", f"{name}_ssim"]
    by_iter: dict[int, dict[str, grids.MetricsRow]] = {}
    for name, trace in zip(names, traces):
        for row in trace:
            by_iter.setdefault(row.iteration, {})[name] = row
    lines = [",".join(header)]
    for it in sorted(by_iter):
        cells = [str(it)]
        for name in names:
            row = by_iter[it].get(name)
            if row is None:
                cells += ["", "", "", ""]
            else:
                cells += [f"{row.elapsed_s:.17g}", f"{row.objective:.17g}",
                          f"{row.rre:.17g}", f"{row.ssim:.17g}"]
        lines.append(",".join(cells))
    return ("\n".join(lines) + "\n").encode()


def cmd_compare(args) -> int:
    if len(args.configs) < 2:
        raise ValueError("compare needs at least two configs")
    out_dir = Path(args.out)
    names = [Path(c).stem for c in args.configs]
    if len(set(names)) != len(names):
        raise ValueError("config file names must be distinct")
    traces = [
        _run_one(Path(args.problem), Path(c), out_dir, name)
        for name, c in zip(names, args.configs)
    ]
    (out_dir / "compare.csv").write_bytes(_merge_traces(names, traces))
    print(f"{len(names)} traces and compare.csv written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="npdblur", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a blurred noisy problem")
    p_gen.add_argument("--image", required=True,
                       help="PGM path or phantom[:SIZE]")
    p_gen.add_argument("--psf", required=True,
                       help="gaussian:sigma=S:support=N or motion:length=L:angle=A:support=N")
    p_gen.add_argument("--noise", required=True, help="level=L,seed=N")
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_gen)

    p_run = sub.add_parser("run", help="run one solver on a problem dir")
    p_run.add_argument("--problem", required=True)
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run several solvers, merge traces")
    p_cmp.add_argument("--problem", required=True)
    p_cmp.add_argument("--configs", required=True, nargs="+")
    p_cmp.add_argument("--out", required=True)
    p_cmp.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except grids.NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
