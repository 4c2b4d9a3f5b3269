"""Command-line entry point: ``mixedctrl {optimize,bounds,propagate,validate}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .artifacts import read_field_csv, write_csv, write_json
from .bounds import kinematical_bounds
from .config import RunConfig, load_config
from .errors import ConfigError, InvariantError, MonotonicityError, NumericError, ShapeError
from .models import time_to_fs
from .optimizer import ControlField, Trajectory, check_deltaW_identity, run
from .propagator import propagate
from .validate import run_validation

log = logging.getLogger("mixedctrl")

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2
HARD_ERRORS = (ConfigError, InvariantError, NumericError, ShapeError, OSError)


def _write_trajectory(out: Path, cfg: RunConfig, traj: Trajectory) -> None:
    t_fs = time_to_fs(traj.grid.nodes, cfg.model.omega0)
    pops = traj.populations()
    write_csv(out / "populations.csv", ["t_fs"] + [f"p{k + 1}" for k in range(cfg.model.dim)],
              [t_fs] + [pops[:, k] for k in range(cfg.model.dim)])
    write_csv(out / "expectation.csv", ["t_fs", "expectation"],
              [t_fs, traj.expectations(cfg.observable())])


def cmd_optimize(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.output) if args.output else cfg.output_dir
    grid, tables, rho0, A = cfg.grid(), cfg.tables(), cfg.rho0(), cfg.observable()
    bounds = kinematical_bounds(rho0, A)

    def progress(rec):
        log.info("iteration %3d  W=%.12f  deltaW=%.3e", rec.n, rec.W, rec.deltaW)

    try:
        res = run(cfg.optimizer, rho0, A, tables, grid, callback=progress)
    except MonotonicityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    resid = np.concatenate([[np.nan], check_deltaW_identity(res.records, res.history, cfg.optimizer.lam, grid.dt)])
    recs = res.records
    write_csv(out / "convergence.csv", ["n", "W1", "W3", "W", "deltaW", "identity_residual"],
              [[r.n for r in recs], [r.W1 for r in recs], [r.W3 for r in recs], [r.W for r in recs],
               [r.deltaW for r in recs], resid])
    write_csv(out / "field.csv", ["t_fs", "f"],
              [time_to_fs(grid.midpoints, cfg.model.omega0), res.field.samples])
    _write_trajectory(out, cfg, res.rho_traj)

    final_yield = float(res.rho_traj.expectations(A)[-1])
    summary = {
        "config": cfg.echo(),
        "seed": cfg.optimizer.seed,
        "converged": res.converged,
        "iterations": res.final.n,
        "final": {"W1": res.final.W1, "W3": res.final.W3, "W": res.final.W, "deltaW": res.final.deltaW},
        "yield": final_yield,
        "final_populations": res.rho_traj.populations()[-1].tolist(),
        "bounds": {"lower": bounds.lower, "upper": bounds.upper,
                   "upper_pairing": list(bounds.attaining_assignment)},
        "yield_ratio": bounds.ratio(final_yield),
    }
    write_json(out / "summary.json", summary)
    status = "converged" if res.converged else "not converged"
    print(f"{status} after {res.final.n} iterations: <A(tF)> = {final_yield:.6f} "
          f"({100 * bounds.ratio(final_yield):.2f}% of upper bound {bounds.upper:.4f})")
    print(f"artifacts written to {out}")
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_bounds(args) -> int:
    cfg = load_config(args.config)
    rho0, A = cfg.rho0(), cfg.observable()
    b = kinematical_bounds(rho0, A)
    w = np.sort(rho0.weights())[::-1]
    a = np.sort(np.linalg.eigvalsh(A.matrix))[::-1]
    print(f"lower: {b.lower:.6f}")
    print(f"upper: {b.upper:.6f}")
    print("upper-bound pairing (weight -> eigenvalue of A):")
    for k, r in enumerate(b.attaining_assignment):
        print(f"  w={w[k]:.6f} -> a={a[r]:.6f}")
    if rho0.purity > 1 - 1e-10:
        print("note: for a pure initial state the lower bound is the smallest eigenvalue "
              f"of A ({a[-1]:.6f}); it is reached by leaving the state in that eigenvector.")
    return EXIT_OK


def cmd_propagate(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.output) if args.output else cfg.output_dir
    grid = cfg.grid()
    _, f = read_field_csv(args.field)
    if f.size != grid.steps:
        print(f"error: {args.field} has {f.size} samples but the grid has {grid.steps} steps",
              file=sys.stderr)
        return EXIT_ERROR
    field = ControlField(grid, f, cfg.optimizer.lam)
    traj = Trajectory(grid, propagate(cfg.rho0().matrix, field.samples, grid, cfg.tables()))
    _write_trajectory(out, cfg, traj)
    print(f"<A(tF)> = {traj.expectations(cfg.observable())[-1]:.10f}; artifacts written to {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    checks = run_validation()
    for c in checks:
        print(c.line())
    failed = [c.name for c in checks if not c.ok]
    if failed:
        print(f"failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mixedctrl", description="Mixed-state optimal control of a Morse ladder.")
    p.add_argument("-v", "--verbose", action="store_true", help="log every iteration")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("optimize", help="run the monotone iteration and write artifacts")
    s.add_argument("config", type=Path)
    s.add_argument("-o", "--output", help="override the output directory")
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("bounds", help="print kinematical bounds for the configured rho0 and A")
    s.add_argument("config", type=Path)
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("propagate", help="replay a stored field")
    s.add_argument("config", type=Path)
    s.add_argument("--field", type=Path, required=True, help="CSV with columns t_fs,f")
    s.add_argument("-o", "--output", help="override the output directory")
    s.set_defaults(func=cmd_propagate)

    s = sub.add_parser("validate", help="run built-in self-checks")
    s.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except HARD_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
