"""Full-size qualitative runs: a single sharp curve on the 200x200 comma, and
automatic extraction on the synthetic chromosome spread.

    python scripts/reproduce_figures.py --out figures

Writes PNG renders and a summary.json. Not part of the test suite: the
chromosome run takes minutes. The curve count it reports should fall
between 30 and 55.
"""
import argparse
import json
import time
from pathlib import Path

from curvex import pdhg, render, synthetic
from curvex.endpoints import BilevelConfig, run_bilevel
from curvex.energies import EnergySpec
from curvex.grid import Grid
from curvex.tracing import bundle_curves, trace_curves


def comma(out, steps):
    g = synthetic.comma(200)
    a, b = synthetic.comma_endpoints(200)
    grid = Grid(200, 200)
    ends = [(a, -1), (b, 1)]
    cfg = pdhg.SolverConfig(max_steps=steps, check_every=100, energy_rel_tol=0)
    state, cps = pdhg.solve(grid, EnergySpec("l2a", g), ends, cfg)
    curves, _ = trace_curves(grid, state.z, ends)
    strong = [c for c in curves if c.flux >= 0.05]
    render.render(out / "comma.png", g, grid, state.z, strong)
    main = max(curves, key=lambda c: c.flux)
    return {"energy": cps[-1].energy, "steps": state.k, "n_paths": len(curves), "n_paths_above_5pct": len(strong),
            "main_path_flux": main.flux, "main_path_length": len(main.nodes)}


def chromosome_spread(out, pairs, outer, inner, post, seed):
    g = synthetic.chromosomes(200)
    cfg = BilevelConfig(n_pairs=pairs, gmax=0.5, inner_steps=inner, post_steps=post, max_outer=outer, seed=seed)
    res = run_bilevel(g, cfg)
    final = bundle_curves(res.curves, min_flux=0.5)
    render.render(out / "chromosomes.png", g, res.grid, res.planar_z, final, res.masses)
    return {"initial_pairs": pairs, "outer_iterations": res.n_outer, "final_pairs": len(res.masses) // 2,
            "final_curves": len(final), "in_expected_range": 30 <= len(final) <= 55}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="figures")
    ap.add_argument("--comma-steps", type=int, default=5000)
    ap.add_argument("--pairs", type=int, default=2000)
    ap.add_argument("--outer", type=int, default=100)
    ap.add_argument("--inner", type=int, default=60)
    ap.add_argument("--post", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    t0 = time.perf_counter()
    summary["comma"] = comma(out, args.comma_steps)
    summary["comma"]["seconds"] = round(time.perf_counter() - t0, 1)
    print("comma:", summary["comma"])
    t0 = time.perf_counter()
    summary["chromosomes"] = chromosome_spread(out, args.pairs, args.outer, args.inner, args.post, args.seed)
    summary["chromosomes"]["seconds"] = round(time.perf_counter() - t0, 1)
    print("chromosomes:", summary["chromosomes"])
    (out / "summary.json").write_text(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
