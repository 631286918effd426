"""Command line entry point: run scenario files and refinement studies."""

from __future__ import annotations

import argparse
import logging
import sys
from importlib import resources
from pathlib import Path

from .fields import FieldError
from .identities import IdentityError
from .interface import InterfaceError
from .potential import PotentialError
from .scenario import (ScenarioError, all_passed, convergence_study, load_scenario, run_scenario,
                       validate_resolution)
from .solver import SolverError

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3

log = logging.getLogger("vecac")


def bundled_scenario(name: str) -> Path:
    """Path of a scenario file shipped with the package (``planar``, ``cross``, ``triple``)."""
    base = resources.files("vecac") / "scenarios"
    fname = name if name.endswith(".scn") else f"{name}.scn"
    path = Path(str(base / fname))
    if not path.is_file():
        raise ScenarioError(f"no bundled scenario {name!r}")
    return path


def _resolve(arg: str) -> Path:
    p = Path(arg)
    if p.is_file():
        return p
    if not p.suffix or p.suffix == ".scn":
        try:
            return bundled_scenario(p.name)
        except ScenarioError:
            pass
    raise ScenarioError(f"scenario file {arg!r} not found")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vecac", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="solve every eps member of a scenario and run its checks")
    run.add_argument("file", help="scenario file, or the name of a bundled scenario")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--out", default=None, help="output directory (default: ./<scenario name>_out)")
    run.add_argument("--allow-underresolved", action="store_true")

    conv = sub.add_parser("converge", help="exact-identity residuals under h refinement")
    conv.add_argument("file")
    conv.add_argument("--levels", type=int, default=3)
    conv.add_argument("--eps", type=float, default=None)
    conv.add_argument("--out", default=None)
    conv.add_argument("--allow-underresolved", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        sc = load_scenario(_resolve(args.file))
        validate_resolution(sc, args.allow_underresolved)
        out = Path(args.out) if args.out else Path(f"{sc.name}_out")
        if args.cmd == "run":
            if args.threads < 1:
                raise ScenarioError("--threads must be at least 1")
            members, trends = run_scenario(sc, out, threads=args.threads)
            ok = all_passed(members, trends)
            for m in members:
                for r in m.reports:
                    if r.applicable:
                        print(f"eps={m.eps:g} {r.name}: residual={r.residual:.3e} "
                              f"tol={r.tolerance:.1e} {'PASS' if r.passed else 'FAIL'}")
            for r in trends:
                print(f"sweep {r.name}: residual={r.residual:.3e} {'PASS' if r.passed else 'FAIL'}")
            return EXIT_OK if ok else EXIT_CHECK_FAILED
        rows = convergence_study(sc, args.levels, out, eps=args.eps)
        for row in rows:
            print(f"{row['check']} level={row['level']} h={row['h']:.4g} residual={row['residual']:.3e} "
                  f"order={row['observed_order']:.2f}")
        return EXIT_OK
    except (ScenarioError, PotentialError, IdentityError, FieldError, InterfaceError) as exc:
        print(f"vecac: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"vecac: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
