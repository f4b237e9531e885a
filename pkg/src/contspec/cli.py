"""Command-line front end: ``contspec run|validate|suite``.

Exit codes: 0 success, 1 unexpected error, 2 configuration error,
3 infeasible physics, 4 invariant violation.  Artifacts go to
``<output root>/<scenario output>/`` where the root is ``--out``, else
``$CONTSPEC_OUT``, else ``./out``.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .config import ConfigError, load
from .errors import DomainTooSmall, InfeasibleTarget
from .pipelines import PIPELINE_FUNCS, Checks, preflight

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_PHYSICS, EXIT_INVARIANT = 0, 1, 2, 3, 4
OUT_ENV = "CONTSPEC_OUT"

log = logging.getLogger("contspec")


def output_root(cli_value: str | None) -> Path:
    return Path(cli_value or os.environ.get(OUT_ENV) or "out")


def validate_config(path) -> tuple[int, str]:
    """Parse and preflight a scenario without running it."""
    try:
        sc = load(path)
        preflight(sc)
    except ConfigError as exc:
        return EXIT_CONFIG, str(exc)
    except (InfeasibleTarget, DomainTooSmall, ValueError) as exc:
        return EXIT_PHYSICS, f"{path}: {exc}"
    return EXIT_OK, f"{path}: ok ({sc.pipeline})"


def run_scenario(path, out_root=None) -> dict:
    """Run one scenario file; always returns a summary dict with ``exit_code``."""
    path = Path(path)
    start = time.perf_counter()
    summary = {"config": str(path), "exit_code": EXIT_ERROR, "invariants": {}, "artifacts": []}
    try:
        sc = load(path)
    except ConfigError as exc:
        summary.update(exit_code=EXIT_CONFIG, error=str(exc), status="fail")
        return summary
    summary.update(scenario=sc.name, pipeline=sc.pipeline, seed=sc.seed)
    out = output_root(out_root) / sc.output
    checks = Checks()
    try:
        preflight(sc)
        files = PIPELINE_FUNCS[sc.pipeline](sc, out, checks)
        summary["artifacts"] = sorted(str(Path(f).relative_to(out)) for f in files)
        failed = checks.failed
        summary["failed"] = failed
        summary["exit_code"] = EXIT_INVARIANT if failed else EXIT_OK
    except (InfeasibleTarget, DomainTooSmall) as exc:
        summary.update(exit_code=EXIT_PHYSICS, error=str(exc))
    except ValueError as exc:
        summary.update(exit_code=EXIT_PHYSICS, error=str(exc))
    except Exception as exc:  # noqa: BLE001 - reported, not swallowed
        log.exception("scenario %s crashed", path)
        summary.update(exit_code=EXIT_ERROR, error=f"{type(exc).__name__}: {exc}")
    summary["invariants"] = checks.items
    summary["status"] = "pass" if summary["exit_code"] == EXIT_OK else "fail"
    # wall time is kept out of the artifact directory so reruns stay byte-identical
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    summary["wall_time_s"] = time.perf_counter() - start
    summary["output_dir"] = str(out)
    return summary


def _run_one(args):
    return run_scenario(*args)


def run_suite(directory, out_root=None, jobs: int = 1) -> list[dict]:
    configs = sorted(Path(directory).glob("*.cfg"))
    if not configs:
        raise FileNotFoundError(f"no *.cfg files in {directory}")
    work = [(c, out_root) for c in configs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_one, work))
    return [_run_one(w) for w in work]


def _print_summary(s: dict) -> None:
    name = s.get("scenario", s["config"])
    print(f"{name}: {s.get('status', 'fail')} (exit {s['exit_code']}, {s.get('wall_time_s', 0):.1f} s)")
    if "error" in s:
        print(f"  error: {s['error']}")
    for key in s.get("failed", []):
        inv = s["invariants"][key]
        print(f"  violated: {key} = {inv['value']} (tol {inv.get('tol')})")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="contspec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one scenario file")
    p_run.add_argument("config")
    p_run.add_argument("--out", help=f"output root (default ${OUT_ENV} or ./out)")
    p_val = sub.add_parser("validate", help="parse and preflight a scenario file")
    p_val.add_argument("config")
    p_suite = sub.add_parser("suite", help="run every *.cfg in a directory")
    p_suite.add_argument("directory")
    p_suite.add_argument("--out")
    p_suite.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    if args.command == "validate":
        code, msg = validate_config(args.config)
        print(msg, file=sys.stderr if code else sys.stdout)
        return code
    if args.command == "run":
        s = run_scenario(args.config, args.out)
        _print_summary(s)
        return s["exit_code"]
    try:
        results = run_suite(args.directory, args.out, max(1, args.jobs))
    except FileNotFoundError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    width = max(len(r.get("scenario", r["config"])) for r in results)
    print(f"{'scenario':<{width}}  status  exit  time_s")
    for r in results:
        print(f"{r.get('scenario', r['config']):<{width}}  {r['status']:<6}  {r['exit_code']:>4}  "
              f"{r.get('wall_time_s', 0):6.1f}")
    root = output_root(args.out)
    root.mkdir(parents=True, exist_ok=True)
    table = [{k: r.get(k) for k in ("scenario", "config", "pipeline", "status", "exit_code", "failed")}
             for r in results]
    (root / "suite_summary.json").write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
    return max(r["exit_code"] for r in results)


if __name__ == "__main__":
    sys.exit(main())
