"""``espec`` command line.

Exit codes: 0 when every check is PASS/INFO/SKIP, 1 when any check FAILs,
2 for configuration errors, 3 for solver errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .enclosure import calibrate_constant
from .errors import AllocationTooLarge, ConfigParseError, EspecError, ScenarioFailed, SolverError
from .report import FAIL, _clean, emit_outputs, execute
from .scenario import Scenario, load_scenarios
from .study import Problem

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

log = logging.getLogger("espec")


def _error_code(exc: BaseException) -> int:
    cause = exc.cause if isinstance(exc, ScenarioFailed) else exc
    if isinstance(cause, (SolverError, AllocationTooLarge)):
        return EXIT_SOLVER
    return EXIT_CONFIG


def _run_one(scn: Scenario, out: Optional[str], levels: Optional[int] = None,
             show_checks: bool = False):
    """Worker: run, write artifacts, and return a printable summary."""
    log.info("running %s (%s)", scn.name, scn.mode)
    try:
        report = execute(scn, levels=levels)
    except EspecError as exc:
        return scn.name, _error_code(exc), [f"{scn.name}: ERROR {exc}"], None
    if out is not None:
        emit_outputs(report, Path(out) / scn.name)
    fails = sum(c["status"] == FAIL for c in report.checks)
    lines = [f"{scn.name}: {report.status} ({len(report.checks)} checks, {fails} failed, "
             f"{len(report.eigenvalues)} eigenvalues, "
             f"{sum(p.converged for p in report.eigenvalues)} converged)"]
    if show_checks or fails:
        for c in report.checks:
            if show_checks or c["status"] == FAIL:
                lines.append(f"  {c['status']:4s} {c['name']}: {c['detail']}")
    if "convergence" in report.extra:
        for row in report.extra["convergence"]:
            lines.append(f"  mode {row['index']}: base {row['base']} extrapolated "
                         f"{row['extrapolated']} order {row['observed_order']} "
                         f"L-drift {row['l_drift']} converged {row['converged']}")
    code = EXIT_FAIL if fails else EXIT_OK
    return scn.name, code, lines, report


def _run_all(scns: Sequence[Scenario], out, jobs: int, levels=None, show_checks=False):
    if jobs > 1 and len(scns) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_one, s, out, levels, show_checks) for s in scns]
            results = [f.result()[:3] for f in futures]
    else:
        results = [_run_one(s, out, levels, show_checks)[:3] for s in scns]
    code = EXIT_OK
    for _, c, lines in results:
        for line in lines:
            print(line)
        code = max(code, c)
    return code


def cmd_run(args) -> int:
    return _run_all(load_scenarios(args.config), args.out, args.jobs)


def cmd_converge(args) -> int:
    return _run_all(load_scenarios(args.config), args.out, args.jobs, levels=args.levels)


def cmd_verify(args) -> int:
    return _run_all(load_scenarios(args.config), args.out, args.jobs, show_checks=True)


def cmd_calibrate(args) -> int:
    directory = Path(args.directory)
    if not directory.is_dir():
        raise ConfigParseError(f"{directory} is not a directory")
    scns = [s for path in sorted(directory.glob("*.json")) for s in load_scenarios(path)]
    if not scns:
        raise ConfigParseError(f"no scenario files in {directory}")
    groups = {}
    code = EXIT_OK
    for scn in scns:
        name, c, lines, report = _run_one(scn, args.out)
        for line in lines:
            print(line)
        code = max(code, c)
        if report is None:
            continue
        if scn.grid.dim < 2:
            continue
        a = Problem(scn.params, scn.field_spec).field(scn.grid)
        key = (scn.gamma, scn.grid.dim)
        groups.setdefault(key, []).append((a, report.eigenvalues))
        cal = report.extra.get("calibration")
        if cal:
            groups.setdefault(("extra",) + key, []).append(cal["constant"])
    result = []
    for key, family in sorted((k, v) for k, v in groups.items() if k[0] != "extra"):
        gamma, d = key
        constant = calibrate_constant(family, gamma, d)
        constant = max([constant] + groups.get(("extra", gamma, d), []))
        print(f"gamma={gamma!r} d={d}: calibrated constant {constant!r} "
              f"from {len(family)} scenarios")
        result.append({"gamma": gamma, "dim": d, "constant": constant, "members": len(family)})
    out = Path(args.out) if args.out else directory
    out.mkdir(parents=True, exist_ok=True)
    (out / "calibration.json").write_text(json.dumps(_clean(result), sort_keys=True, indent=1) + "\n")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="espec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"espec {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the scenarios of a config file")
    p.add_argument("config")
    p.add_argument("--out", default="espec-out", help="output directory (default: %(default)s)")
    p.add_argument("--jobs", type=int, default=1, help="scenarios run concurrently")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("converge", help="h-refinement and L-doubling study")
    p.add_argument("config")
    p.add_argument("--levels", type=int, required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("calibrate", help="empirical constants from a directory of configs")
    p.add_argument("directory")
    p.add_argument("--out", default=None, help="where calibration.json goes (default: the directory)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("verify", help="run and print every check")
    p.add_argument("config")
    p.add_argument("--out", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "levels", None) is not None and args.levels < 2:
        parser.error("--levels must be at least 2")
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be at least 1")
    try:
        return args.func(args)
    except ConfigParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EspecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _error_code(exc)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
