"""Command line entry point: ``porohom {cell,macro,direct,compare}``."""
from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, MeshError, ModelError, SolverError
from . import harness

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def build_parser():
    p = argparse.ArgumentParser(prog="porohom", description="Reiterated homogenization of damped wave "
                                "propagation in periodically perforated media.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("cell", "solve the micro and meso cell problems, write effective coefficients"),
        ("macro", "solve the homogenized problem on the plain box"),
        ("direct", "solve the oscillating problem on the perforated box for one epsilon"),
        ("compare", "run the convergence study over the configured epsilons"),
    ]:
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True, help="JSON run configuration")
        s.add_argument("--out", default=None, help="output directory (overrides the config)")
        if name in ("cell", "compare"):
            s.add_argument("--workers", type=int, default=1, help="parallel workers")
        if name == "direct":
            s.add_argument("--epsilon", type=float, default=None,
                           help="scale parameter (default: first configured epsilon)")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = harness.RunConfig.from_json(args.config)
        if args.command == "cell":
            res = harness.run_cell(cfg, args.out, workers=args.workers)
            print("Ahat =", res.ahat.matrix.tolist())
        elif args.command == "macro":
            traj = harness.run_macro(cfg, args.out)
            print(f"macro: {len(traj.step_times) - 1} steps, {traj.dof_count} dofs")
        elif args.command == "direct":
            eps = args.epsilon
            if eps is None:
                if not cfg.disc.epsilons:
                    raise ConfigError("no --epsilon given and the config lists none")
                eps = cfg.disc.epsilons[0]
            if not 0.0 < eps < 1.0:
                raise ConfigError(f"epsilon must lie in (0, 1), got {eps}")
            traj = harness.run_direct(cfg, eps, args.out)
            print(f"direct eps={eps:g}: {len(traj.step_times) - 1} steps, {traj.dof_count} dofs")
        else:
            report = harness.run_compare(cfg, args.out, workers=args.workers)
            for r in report.rows:
                print(f"eps={r.epsilon:.6g} error={r.error:.6e} {r.status}")
            print(f"verdict: {report.verdict}")
    except (ConfigError, ModelError, MeshError) as exc:
        print(f"porohom: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"porohom: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
