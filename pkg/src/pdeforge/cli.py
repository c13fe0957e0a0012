"""Command-line entry point: `pdeforge <command> ...`."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict

from .config import ConfigError, load_config
from .domain import TaskError, make_grid, registry_get, registry_manifest
from .harness import DEFAULT_COMMAND, ExecutionLimits
from .llm import DEFAULT_PRICES, PriceTable, PricingError
from .metrics import catalog_json
from .pipeline import EXIT_CODES, Run, StageError, evaluate_program
from .reference import BundleError, ReferenceConfig, generate_reference_set
from .report import ReportError, format_costs, write_costs, write_report


def _overrides(args) -> dict:
    over: dict = {}
    if getattr(args, "task", None):
        over["task"] = {"id": args.task}
    if getattr(args, "mode", None):
        over.setdefault("backend", {})["mode"] = args.mode
    if getattr(args, "rounds", None):
        over.setdefault("tournament", {})["rounds"] = args.rounds
    if getattr(args, "feedback", None):
        over.setdefault("tournament", {})["feedback"] = args.feedback
    if getattr(args, "n", None):
        over["n_candidates"] = args.n
    for item in getattr(args, "set", None) or []:
        key, _, raw = item.partition("=")
        if not key or not _:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        try:
            value = json.loads(raw)
        except ValueError:
            value = raw
        node = over
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return over


def _run(args) -> Run:
    config = load_config(args.config, _overrides(args))
    return Run(args.run_dir, config)


def cmd_run(args):
    run = _run(args)
    manifest = run.run()
    syn = manifest["stages"]["synthesis"]
    print(f"best candidate: {syn['best_candidate_id']}  value: {syn['best_value']}  "
          f"evaluations: {syn['evaluations_used']}")
    print(f"report: {run.dir / 'report.md'}")


def cmd_analyze(args):
    run = _run(args)
    run.check_integrity()
    run.save_manifest()
    report = run.analysis()
    print(f"route: {report.route}")
    print(f"classification: {json.dumps(asdict(report.classification), sort_keys=True)}")


def cmd_genesis(args):
    run = _run(args)
    run.check_integrity()
    run.save_manifest()
    pool = run.genesis(run.analysis())
    for c in pool:
        print(f"{c.candidate_id}  {c.strategy}  {c.sha256[:12]}")


def cmd_synthesize(args):
    run = _run(args)
    run.run(until="synthesis")
    syn = run.manifest["stages"]["synthesis"]
    print(json.dumps(syn, indent=2, sort_keys=True))


def cmd_reference(args):
    task = registry_get(args.task)
    grid = make_grid(task, args.N, args.T if task.time_dependent else None, args.t_end) if task.time_dependent \
        else make_grid(task, args.N)
    bundle = generate_reference_set(task, grid, args.batch, args.seed, ReferenceConfig(), args.out)
    print(f"wrote {bundle.path} ({bundle.manifest['scheme']}, hashes {bundle.manifest['hashes']})")


def cmd_evaluate(args):
    limits = ExecutionLimits(wall_clock_seconds=args.timeout)
    out = evaluate_program(args.program, args.bundle, args.feedback, limits, DEFAULT_COMMAND, args.workdir)
    print(json.dumps(out, indent=2, sort_keys=True))
    if out["status"] != "ok":
        return EXIT_CODES["evaluate"]
    return 0


def cmd_report(args):
    text = write_report(args.run_dir)
    if not args.quiet:
        print(text)


def _prices(args) -> PriceTable:
    if args.config:
        p = load_config(args.config)["prices"]
        return PriceTable({k: tuple(v) for k, v in (p.get("prices") or {}).items()},
                          default=tuple(p["default"]) if p.get("default") else None)
    return DEFAULT_PRICES


def cmd_cost(args):
    summary = write_costs(args.run_dir, _prices(args))
    print(format_costs(summary))


def cmd_tasks(args):
    print(registry_manifest())


def cmd_metrics(args):
    print(catalog_json())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pdeforge", description="LLM-driven PDE solver synthesis with a judge tournament.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def pipeline_cmd(name, func, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="run configuration (JSON)")
        sp.add_argument("--run-dir", required=True)
        sp.add_argument("--task", help="override task id")
        sp.add_argument("--mode", choices=("record", "replay", "live"), help="transcript mode")
        sp.add_argument("--rounds", help="round schedule, e.g. 4 or 4+4")
        sp.add_argument("--feedback", choices=("nrmse", "residual", "none"))
        sp.add_argument("--n", type=int, help="number of Genesis candidates (even)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted config override")
        sp.set_defaults(func=func)
        return sp

    pipeline_cmd("run", cmd_run, "run every stage")
    pipeline_cmd("analyze", cmd_analyze, "run the analysis stage")
    pipeline_cmd("genesis", cmd_genesis, "run analysis and genesis")
    pipeline_cmd("synthesize", cmd_synthesize, "run up to and including the tournament")

    sp = sub.add_parser("reference", help="build a reference bundle")
    sp.add_argument("--task", required=True)
    sp.add_argument("--N", type=int, default=64)
    sp.add_argument("--T", type=int, default=10)
    sp.add_argument("--t-end", type=float)
    sp.add_argument("--batch", type=int, default=4)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_reference)

    sp = sub.add_parser("evaluate", help="score a guest program against a reference bundle")
    sp.add_argument("program")
    sp.add_argument("--bundle", required=True)
    sp.add_argument("--feedback", choices=("nrmse", "residual", "none"), default="nrmse")
    sp.add_argument("--timeout", type=float, default=120.0)
    sp.add_argument("--workdir")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("report", help="(re)write report.md from the tournament ledgers")
    sp.add_argument("run_dir")
    sp.add_argument("--quiet", action="store_true")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("cost", help="token costs by purpose")
    sp.add_argument("run_dir")
    sp.add_argument("--config", help="take prices from this run configuration")
    sp.set_defaults(func=cmd_cost)

    sub.add_parser("tasks", help="list the PDE tasks").set_defaults(func=cmd_tasks)
    sub.add_parser("metrics", help="list the metric catalog").set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args) or 0
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ConfigError, TaskError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CODES["config"]
    except BundleError as exc:
        print(f"reference error: {exc}", file=sys.stderr)
        return EXIT_CODES["evaluate"] if args.command == "evaluate" else EXIT_CODES["reference"]
    except ReportError as exc:
        print(f"report error: {exc}", file=sys.stderr)
        return EXIT_CODES["report"]
    except PricingError as exc:
        print(f"cost error: {exc}", file=sys.stderr)
        return EXIT_CODES["report"]


if __name__ == "__main__":
    sys.exit(main())
