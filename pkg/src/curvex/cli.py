"""Command line: ``curvex {geodesic,roto,extract,render,dump}``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
A JSON ``--config`` file may hold any flag under its option name
(``inner_steps``, ``energy``, ...); flags given on the command line win.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path


from . import io, pdhg, render, synthetic
from .endpoints import BilevelConfig, run_bilevel
from .energies import Energy, EnergySpec
from .exceptions import ConvergenceError, CurvexError, IncompatibleDataError, NumericalError
from .grid import Grid
from .rototrans import DEFAULT_ANGLES, marginalize
from .tracing import Curve, bundle_curves, trace_curves
from .validation import check_endpoints, check_potential

log = logging.getLogger("curvex")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

SYNTHETIC = {
    "segment": lambda: synthetic.segment()[0],
    "quarter_circle": lambda: synthetic.quarter_circle()[0],
    "comma": lambda: synthetic.comma(),
    "comma100": lambda: synthetic.comma(100),
    "comma32": lambda: synthetic.comma(32, noise=0.05),
    "crossing": lambda: synthetic.crossing_curves()[0],
    "chromosomes": lambda: synthetic.chromosomes(),
    "tubes": lambda: synthetic.tube_volume()[0],
}


class ConfigError(ValueError):
    pass


def load_potential(spec, blur=None):
    """Read ``spec`` (a path, or ``synthetic:<name>``) as a potential in ``[0, 1]``."""
    if spec.startswith("synthetic:"):
        name = spec.split(":", 1)[1]
        if name not in SYNTHETIC:
            raise ConfigError(f"unknown synthetic input {name!r}; choose from {sorted(SYNTHETIC)}")
        g = SYNTHETIC[name]()
        return io.normalize_potential(g, blur) if blur else g
    if not Path(spec).exists():
        raise ConfigError(f"input {spec} does not exist")
    return io.ingest_potential(spec, blur)


def _solver_flags(p):
    p.add_argument("--steps", type=int, default=5000, help="maximum primal-dual steps")
    p.add_argument("--check-every", type=int, default=50)
    p.add_argument("--tau", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--energy-rel-tol", type=float, default=1e-7)


def _common(p):
    p.add_argument("input", help="potential image (PGM/PNG), raw .f32 volume, or synthetic:<name>")
    p.add_argument("--blur", type=float, help="Gaussian blur sigma applied before normalization")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--binary", action="store_true", help="dump fields as raw float64 with a JSON sidecar")
    p.add_argument("--config", help="JSON file with flag values")


def build_parser():
    parser = argparse.ArgumentParser(prog="curvex", description="Curve extraction by minimal flows.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("geodesic", help="curves between fixed endpoints (2D or 3D)")
    _common(p)
    _solver_flags(p)
    p.add_argument("--energy", choices=["l1", "l2f", "l2a"], default="l2a")
    p.add_argument("--endpoint", "-e", action="append", default=[], help="'i,j[,k]:+1' (repeatable)")

    p = sub.add_parser("roto", help="curvature-penalized curves between lifted endpoints (i,j,k)")
    _common(p)
    _solver_flags(p)
    p.add_argument("--energy", choices=["tac", "trl", "el"], default="el")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--n-angles", type=int, default=DEFAULT_ANGLES)
    p.add_argument("--endpoint", "-e", action="append", default=[], help="'i,j,k:+1' (repeatable)")

    p = sub.add_parser("extract", help="find curves automatically (moving endpoint pairs)")
    _common(p)
    p.add_argument("--energy", choices=[e.value for e in Energy], default="l2a")
    p.add_argument("--alpha", type=float)
    p.add_argument("--n-angles", type=int, default=DEFAULT_ANGLES)
    p.add_argument("--gmax", type=float, default=0.5)
    p.add_argument("--pairs", type=int, default=15)
    p.add_argument("--inner-steps", type=int, default=60)
    p.add_argument("--post-steps", type=int, default=5000)
    p.add_argument("--max-outer", type=int, default=500)
    p.add_argument("--tau", type=float)
    p.add_argument("--sigma", type=float)

    p = sub.add_parser("render", help="overlay log |Az| and curves on the potential")
    p.add_argument("input")
    p.add_argument("--field", help="edge field dump (text or binary)")
    p.add_argument("--curves", help="curves JSON written by geodesic/roto/extract")
    p.add_argument("--blur", type=float)
    p.add_argument("--out", default="render.png", help="output image (.png or .ppm)")
    p.add_argument("--config")

    p = sub.add_parser("dump", help="write a potential or re-encode a field dump")
    p.add_argument("input", help="image, synthetic:<name>, or an existing field dump (.cfld)")
    p.add_argument("--blur", type=float)
    p.add_argument("--out", required=True, help="output file")
    p.add_argument("--binary", action="store_true")
    p.add_argument("--config")
    return parser


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        known = set(vars(args))
        unknown = sorted(set(k.replace("-", "_") for k in cfg) - known)
        if unknown:
            raise ConfigError(f"unknown config keys for {args.command}: {unknown}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
        args = parser.parse_args(argv)
    return args


# ----------------------------------------------------------------------


def _solver_config(args):
    return pdhg.SolverConfig(
        tau=args.tau, sigma=args.sigma, max_steps=args.steps, check_every=args.check_every,
        energy_rel_tol=args.energy_rel_tol, seed=args.seed,
    )


def _write_outputs(out, grid, state, curves, g, binary, extra=None):
    out.mkdir(parents=True, exist_ok=True)
    suffix = ".f64" if binary else ".cfld"
    io.save_field(out / f"z{suffix}", grid, state.z, io.EDGE, binary=binary)
    if grid.lifted:
        io.save_field(out / f"z_planar{suffix}", grid.planar, marginalize(grid, state.z), io.EDGE, binary=binary)
    io.write_json(out / "curves.json", [c.to_record() for c in curves])
    (out / "checkpoints.txt").write_text("step energy feas gap wallclock_ms\n" + "\n".join(state.log) + "\n")
    summary = {"steps": state.k, "energy": float(state.log[-1].split()[1]) if state.log else None}
    summary.update(extra or {})
    io.write_json(out / "summary.json", summary)
    if g.ndim == 2:
        render.render(out / "render.png", g, grid, state.z, curves)


def cmd_geodesic(args, lifted=False):
    g = load_potential(args.input, args.blur)
    if lifted:
        g = check_potential(g, ndim=(2,))
        grid = Grid(*g.shape, n_angles=args.n_angles)
        spec = EnergySpec(args.energy, g, alpha=args.alpha)
    else:
        g = check_potential(g)
        grid = Grid.from_dims(g.shape)
        spec = EnergySpec(args.energy, g)
    ends = check_endpoints(args.endpoint, grid.dims)
    state, cps = pdhg.solve(grid, spec, ends, _solver_config(args))
    curves, _ = trace_curves(grid, state.z, ends)
    _write_outputs(Path(args.out), grid, state, curves, g, args.binary, {"energy_family": args.energy})
    print(f"energy {cps[-1].energy:.10g} after {state.k} steps; {len(curves)} curve(s) -> {args.out}")
    return EXIT_OK


def cmd_extract(args):
    g = check_potential(load_potential(args.input, args.blur), ndim=(2,))
    config = BilevelConfig(
        n_pairs=args.pairs, gmax=args.gmax, inner_steps=args.inner_steps, post_steps=args.post_steps,
        max_outer=args.max_outer, seed=args.seed, n_angles=args.n_angles,
    )
    spec = EnergySpec(args.energy, g, alpha=args.alpha, gmax=args.gmax)
    out = Path(args.out)
    snaps = out / "snapshots"
    snaps.mkdir(parents=True, exist_ok=True)

    def dump(snap):
        io.write_json(snaps / f"iter_{snap['iteration']:05d}.json", snap)

    result = run_bilevel(g, config, spec, callback=dump)
    io.write_json(out / "masses.json", [m.to_record() for m in result.masses])
    _write_outputs(out, result.grid, result.state, result.curves, g, args.binary,
                   {"outer_iterations": result.n_outer, "n_masses": len(result.masses)})
    n_full = len(bundle_curves(result.curves, min_flux=0.5))
    print(f"{len(result.masses) // 2} pair(s), {n_full} curve(s) after {result.n_outer} outer iterations -> {out}")
    return EXIT_OK


def cmd_render(args):
    g = check_potential(load_potential(args.input, args.blur), ndim=(2,))
    grid = z = None
    if args.field:
        grid, z, comp = io.load_field(args.field)
        if comp != io.EDGE:
            raise ConfigError(f"{args.field} holds a {comp} field; render needs an edge field")
        if (grid.planar.dims if grid.lifted else grid.dims) != g.shape:
            raise ConfigError(f"field grid {grid.dims} does not match the image {g.shape}")
    curves = []
    if args.curves:
        curves = [Curve.from_record(r) for r in io.read_json(args.curves)]
    render.render(args.out, g, grid, z, curves)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_dump(args):
    src = args.input
    if Path(src).suffix in (".cfld", ".f64"):
        grid, values, comp = io.load_field(src)
    else:
        values = load_potential(src, args.blur)
        grid, comp = Grid.from_dims(values.shape), io.NODE
    io.save_field(args.out, grid, values, comp, binary=args.binary)
    print(f"wrote {comp} field on {grid.dims} -> {args.out}")
    return EXIT_OK


def main(argv=None):
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"curvex: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    handlers = {
        "geodesic": cmd_geodesic,
        "roto": lambda a: cmd_geodesic(a, lifted=True),
        "extract": cmd_extract,
        "render": cmd_render,
        "dump": cmd_dump,
    }
    try:
        return handlers[args.command](args)
    except (NumericalError, ConvergenceError, FloatingPointError) as exc:
        print(f"curvex: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, IncompatibleDataError, ValueError, IndexError, CurvexError, OSError) as exc:
        print(f"curvex: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
