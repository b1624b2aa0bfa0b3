"""Command-line entry point.

    dbandit run --config fig2 [--out DIR] [--seed N] [--replicates R]
    dbandit verify --level fast|full
    dbandit presets list
"""

import argparse
import json
import logging
import sys
from dataclasses import replace

from ..errors import ConfigError, DbanditError
from .config import load_config, preset_names, preset_path
from .runner import run_experiment
from .verify import as_dicts, verify_suite


def _parser():
    p = argparse.ArgumentParser(prog="dbandit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config or preset")
    r.add_argument("--config", required=True, help="YAML file or preset name")
    r.add_argument("--out", help="output directory (default runs/<name>)")
    r.add_argument("--seed", type=int, help="override the base seed")
    r.add_argument("--replicates", type=int, help="override the replicate count")
    r.add_argument("--horizon", type=int, help="override the horizon")
    r.add_argument("--workers", type=int, help="worker processes")

    v = sub.add_parser("verify", help="run the bound checks")
    v.add_argument("--level", choices=("fast", "full"), default="fast")
    v.add_argument("--json", action="store_true", help="print results as JSON")

    pr = sub.add_parser("presets", help="list or show bundled configs")
    pr.add_argument("action", choices=("list", "show"))
    pr.add_argument("name", nargs="?")
    return p


def _error(kind, message, problems=None):
    report = {"error": kind, "message": message}
    if problems:
        report["problems"] = problems
    print(json.dumps(report), file=sys.stderr)


def _cmd_run(args):
    try:
        exp = load_config(args.config)
        overrides = {k: getattr(args, k) for k in ("seed", "replicates", "horizon")
                     if getattr(args, k) is not None}
        if overrides:
            merged = {**exp.raw, **overrides}
            exp = type(exp).from_mapping(merged)
        if args.workers is not None:
            exp = replace(exp, workers=args.workers)
        summary = run_experiment(exp, out_dir=args.out)
    except ConfigError as exc:
        _error("config", str(exc), getattr(exc, "problems", None))
        return 2
    except DbanditError as exc:
        _error(type(exc).__name__, str(exc))
        return 1
    for est, entry in summary["estimators"].items():
        if "final_mean_regret" in entry:
            print(f"{est:>10}: DR_T = {entry['final_mean_regret']:.6g} "
                  f"+/- {entry['final_se']:.3g}  ({entry['completed']} ok, "
                  f"{len(entry['failed'])} failed)")
        else:
            print(f"{est:>10}: all {len(entry['failed'])} replicates failed")
    return 0


def _cmd_verify(args):
    results = verify_suite(args.level)
    if args.json:
        print(json.dumps(as_dicts(results), indent=2))
    else:
        for r in results:
            print(r.line())
    return 0 if all(r.passed for r in results) else 1


def _cmd_presets(args):
    if args.action == "list":
        for name in preset_names():
            print(name)
        return 0
    if not args.name:
        _error("usage", "presets show needs a name")
        return 2
    try:
        print(preset_path(args.name).read_text(), end="")
    except ConfigError as exc:
        _error("config", str(exc))
        return 2
    return 0


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = _parser().parse_args(argv)
    handler = {"run": _cmd_run, "verify": _cmd_verify, "presets": _cmd_presets}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
