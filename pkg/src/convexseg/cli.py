"""Batch command line interface.

Subcommands: segment, hull (with --noisy), ring, eval, bench.
Exit codes: 0 ok, 2 input error, 3 validation error, 4 numerical
divergence, 5 outer-iteration cap reached without convergence.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bench import run_benchmark
from .dataterm import PointSet
from .errors import InputError, NumericalDivergenceError, ValidationError
from .fields import Grid2D
from .formats import (
    parse_radii,
    read_config,
    read_image,
    read_mask,
    read_points_csv,
    read_scribbles,
    write_label_map,
    write_mask,
    write_points_csv,
)
from .geometry import shape_distance
from .optimizer import AdmmParams, OuterParams
from .pipelines import component_report, solve_hull, solve_ring, solve_segmentation

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_VALIDATION = 3
EXIT_DIVERGENCE = 4
EXIT_CAP = 5

REPORT_SCHEMA_VERSION = 1


def _add_solver_flags(p):
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--lambda", dest="lam", type=float, help="boundary length weight")
    p.add_argument("--sigma", type=float, help="Gaussian sigma in normalized units")
    p.add_argument("--theta", type=float, help="update belt threshold")
    p.add_argument("--belt-radius", type=int, help="update belt disc radius")
    p.add_argument("--omega", type=float, help="scribble spatial weight")
    p.add_argument("--eps", type=float, help="outer relative-change tolerance")
    p.add_argument("--mu", type=float, help="ADMM penalty")
    p.add_argument("--tau", type=float, help="ADMM step length")
    p.add_argument("--alpha", help="proximal scalar policy: paper, safe, or a number")
    p.add_argument("--inner-budget", type=int, help="inner iterations per outer step")
    p.add_argument("--max-outer", type=int, help="outer iteration cap")
    p.add_argument("--radii", help="comma list overriding the radii schedule")
    p.add_argument("--gamma", type=float, help="noisy-hull inclusion weight")
    p.add_argument("--seed", type=int, help="seed for scribble subsampling")
    p.add_argument("--cold-duals", action="store_true",
                   help="reset inner multipliers every outer step (replication mode)")
    p.add_argument("--belt-literal", action="store_true",
                   help="use the literal < theta belt inequality")
    p.add_argument("--out-dir", default=".", help="output directory")


def _gather(args) -> dict:
    cfg = read_config(args.config) if args.config else {}
    flag_map = {
        "lambda": args.lam, "sigma": args.sigma, "theta": args.theta,
        "belt_radius": args.belt_radius, "omega": args.omega, "eps": args.eps,
        "mu": args.mu, "tau": args.tau, "alpha": args.alpha,
        "inner_budget": args.inner_budget, "max_outer": args.max_outer,
        "radii": args.radii, "gamma": args.gamma, "seed": args.seed,
    }
    for key, val in flag_map.items():
        if val is not None:
            cfg[key] = val
    if args.cold_duals:
        cfg["warm_duals"] = False
    if args.belt_literal:
        cfg["belt_literal"] = True
    return cfg


def _build_params(cfg, schedule) -> tuple:
    outer_kwargs = {"schedule": schedule}
    for key, field in [("lambda", "lam"), ("sigma", "sigma"), ("theta", "theta"),
                       ("belt_radius", "belt_radius"), ("omega", "omega"),
                       ("eps", "eps"), ("inner_budget", "inner_budget"),
                       ("max_outer", "max_outer"), ("check_stride", "check_stride"),
                       ("warm_duals", "warm_duals"), ("belt_literal", "belt_literal")]:
        if key in cfg:
            outer_kwargs[field] = cfg[key]
    if "radii" in cfg:
        outer_kwargs["radii_override"] = parse_radii(cfg["radii"])
    admm_kwargs = {}
    for key in ("mu", "tau", "kkt_tol"):
        if key in cfg:
            admm_kwargs[key] = cfg[key]
    if "alpha" in cfg:
        alpha = cfg["alpha"]
        try:
            alpha = float(alpha)
        except (TypeError, ValueError):
            pass
        admm_kwargs["alpha"] = alpha
    return OuterParams(**outer_kwargs), AdmmParams(**admm_kwargs)


def _write_history(out_dir: Path, state):
    with open(out_dir / "iterations.log", "w") as fh:
        fh.write("k\tobjective\tviolations\tbelt_px\terr\telapsed\n")
        for rec in state.history:
            err = "" if rec.err is None else f"{rec.err:.8e}"
            fh.write(f"{rec.k}\t{rec.objective:.10e}\t{rec.violations}\t"
                     f"{rec.belt_px}\t{err}\t{rec.elapsed:.3f}\n")


def _report_common(state, params, cfg):
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "version": __version__,
        "converged": state.converged,
        "hit_cap": state.hit_cap,
        "outer_iterations": state.k,
        "wall_time": state.history[-1].elapsed if state.history else 0.0,
        "objective_history": [rec.objective for rec in state.history],
        "violation_history": [rec.violations for rec in state.history],
        "err_history": [rec.err for rec in state.history if rec.err is not None],
        "params": {
            "lambda": params.lam, "sigma": params.sigma, "theta": params.theta,
            "belt_radius": params.belt_radius, "omega": params.omega,
            "eps": params.eps, "schedule": params.schedule,
            "inner_budget": params.inner_budget, "max_outer": params.max_outer,
            "radii_override": list(params.radii_override) if params.radii_override else None,
            "warm_duals": params.warm_duals,
            "seed": cfg.get("seed", 0),
        },
    }


def cmd_segment(args) -> int:
    cfg = _gather(args)
    outer, admm = _build_params(cfg, "segment")
    image = read_image(args.image)
    scribbles = read_scribbles(args.scribbles)
    result = solve_segmentation(image, scribbles, outer=outer, admm=admm,
                                seed=cfg.get("seed", 0),
                                max_samples=cfg.get("max_samples", 500))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_label_map(out_dir / "label_map.pgm", result.labels)
    for cid, mask in enumerate(result.masks, start=1):
        write_mask(out_dir / f"mask_class{cid}.pgm", mask)
    _write_history(out_dir, result.state)
    report = _report_common(result.state, outer, cfg)
    report["task"] = "segment"
    report["components"] = {
        str(cid): component_report(mask)
        for cid, mask in enumerate(result.masks, start=1) if mask.any()
    }
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    return EXIT_CAP if result.state.hit_cap else EXIT_OK


def cmd_hull(args) -> int:
    cfg = _gather(args)
    outer, admm = _build_params(cfg, "hull")
    pts = read_points_csv(args.points)
    grid = Grid2D(args.height, args.width)
    result = solve_hull(PointSet(pts, grid), noisy=args.noisy, outer=outer,
                        admm=admm, gamma=cfg.get("gamma", 10.0),
                        lam=cfg.get("lambda"), sigma=cfg.get("sigma"))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_mask(out_dir / "hull_mask.pgm", result.mask)
    write_points_csv(out_dir / "hull_polygon.csv", result.polygon)
    write_points_csv(out_dir / "quickhull_polygon.csv", result.baseline)
    _write_history(out_dir, result.state)
    report = _report_common(result.state, outer, cfg)
    report["task"] = "hull_noisy" if args.noisy else "hull_clean"
    report["sdist_vs_quickhull"] = result.sdist_vs_baseline
    report["excluded_points"] = [[float(x), float(y)] for x, y in result.excluded]
    report["components"] = component_report(result.mask) if result.mask.any() else []
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    return EXIT_CAP if result.state.hit_cap else EXIT_OK


def cmd_ring(args) -> int:
    cfg = _gather(args)
    outer, admm = _build_params(cfg, "segment")
    image = read_image(args.image)
    scribbles_inner = read_scribbles(args.scribbles_inner)
    scribbles_outer = read_scribbles(args.scribbles_outer)
    result = solve_ring(image, scribbles_inner, scribbles_outer,
                        outer=outer, admm=admm, seed=cfg.get("seed", 0))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_mask(out_dir / "inner_mask.pgm", result.inner_mask)
    write_mask(out_dir / "outer_mask.pgm", result.outer_mask)
    write_mask(out_dir / "ring_mask.pgm", result.ring)
    report = _report_common(result.pass2.state, outer, cfg)
    report["task"] = "ring"
    report["pass1_outer_iterations"] = result.pass1.state.k
    report["inner_area"] = int(result.inner_mask.sum())
    report["ring_area"] = int(result.ring.sum())
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    hit_cap = result.pass1.state.hit_cap or result.pass2.state.hit_cap
    return EXIT_CAP if hit_cap else EXIT_OK


def cmd_eval(args) -> int:
    est = read_mask(args.mask_est)
    ref = read_mask(args.mask_ref)
    if est.shape != ref.shape:
        raise ValidationError("masks have different shapes")
    from scipy import ndimage

    to_ref = ndimage.distance_transform_edt(~ref)
    to_est = ndimage.distance_transform_edt(~est)
    d_est_to_ref = float(to_ref[est].max()) if est.any() else float("nan")
    d_ref_to_est = float(to_est[ref].max()) if ref.any() else float("nan")
    sdist = shape_distance(est, ref)
    print(f"directed est->ref: {d_est_to_ref:.4f} px")
    print(f"directed ref->est: {d_ref_to_est:.4f} px")
    print(f"S-dist: {sdist:.6f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    rows = run_benchmark(size=args.size, repeats=args.repeats)
    width = max(len(r["name"]) for r in rows)
    print(f"{'kernel':<{width}}  {'numpy':>10}  {'numba':>10}  speedup")
    for r in rows:
        numba_col = f"{r['numba_ms']:.2f} ms" if r["numba_ms"] is not None else "n/a"
        speed = f"{r['speedup']:.1f}x" if r["speedup"] is not None else "-"
        print(f"{r['name']:<{width}}  {r['numpy_ms']:>7.2f} ms  {numba_col:>10}  {speed}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="convexseg",
                                 description="Convexity-prior segmentation and convex hull solver")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="scribble-driven segmentation with convexity prior")
    p.add_argument("image", help="P5/P6 image")
    p.add_argument("scribbles", help="indexed P5 scribble map")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("hull", help="convex hull of a point set")
    p.add_argument("points", help="two-column CSV of (x, y) coordinates")
    p.add_argument("--noisy", action="store_true", help="tolerate outliers (penalty model)")
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--width", type=int, default=256)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_hull)

    p = sub.add_parser("ring", help="two-pass convex ring segmentation")
    p.add_argument("image")
    p.add_argument("scribbles_inner", help="scribbles for the inner background pass")
    p.add_argument("scribbles_outer", help="scribbles for the ring+inner pass")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_ring)

    p = sub.add_parser("eval", help="shape distance between two masks")
    p.add_argument("mask_est")
    p.add_argument("mask_ref")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="compare numba and numpy kernel backends")
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--repeats", type=int, default=5)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalDivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
