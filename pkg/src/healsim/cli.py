"""Command line interface.

    healsim run --seed N --rounds N [options]   run a scenario
    healsim serve-planner --rules PATH          run the planning service
    healsim validate-rules PATH                 check a rule file

Exit codes: 0 success, 1 config/parse error, 2 planner unreachable.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .faults import NoEligibleTarget
from .harness import ConfigError, ScenarioConfig, load_script, run_scenario
from .model import BlueprintError, ModelError, default_blueprint, load_blueprint
from .planner import DEFAULT_PORT, ConnectionFailed, PlanService, RequestTimeout
from .rules import RuleError, load_rules


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="healsim",
                                     description="Self-healing architecture simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a fault injection and repair scenario")
    run.add_argument("--seed", type=int, required=True, help="64-bit random seed")
    run.add_argument("--rounds", type=int, required=True, help="number of rounds")
    run.add_argument("--rules", metavar="PATH", help="rule file (default: bundled policy)")
    run.add_argument("--blueprint", metavar="PATH",
                     help="blueprint JSON (default: bundled single-shop blueprint)")
    run.add_argument("--planner", default="inproc", metavar="MODE",
                     help="inproc or tcp://HOST:PORT (default: inproc)")
    run.add_argument("--exception-threshold", type=int, default=5, metavar="N")
    run.add_argument("--rootcause-threshold", type=int, default=3, metavar="N")
    run.add_argument("--script", metavar="PATH",
                     help="JSON fault list overriding random draws")
    run.add_argument("--out", default="out", metavar="DIR",
                     help="report directory (default: ./out)")

    serve = sub.add_parser("serve-planner", help="serve the rule engine over TCP")
    serve.add_argument("--rules", required=True, metavar="PATH")
    serve.add_argument("--bind", default=f"127.0.0.1:{DEFAULT_PORT}", metavar="HOST:PORT")

    check = sub.add_parser("validate-rules", help="parse a rule file and report errors")
    check.add_argument("path", metavar="PATH")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    blueprint = load_blueprint(args.blueprint) if args.blueprint else default_blueprint()
    config = ScenarioConfig(
        seed=args.seed,
        rounds=args.rounds,
        exception_threshold=args.exception_threshold,
        rootcause_threshold=args.rootcause_threshold,
        planner=args.planner,
        rules_path=args.rules,
        blueprint_path=args.blueprint,
        script_path=args.script,
        script=load_script(args.script, blueprint) if args.script else None,
        out_dir=args.out,
    )
    report = run_scenario(config)
    healed = sum(1 for r in report.rounds if not r.post_violations)
    print(f"rounds: {len(report.rounds)}  healed: {healed}  "
          f"unhandled: {report.unhandled_failures}  suspects: {len(report.suspects)}")
    for suspect in report.suspects:
        print(f"suspect: {suspect.slot} (count {suspect.count})")
    print(f"reports written to {args.out}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    host, sep, port_text = args.bind.rpartition(":")
    if not sep or not port_text.isdigit():
        print(f"error: --bind must be HOST:PORT, got {args.bind!r}", file=sys.stderr)
        return 1
    ruleset = load_rules(args.rules)
    service = PlanService(ruleset, host=host, port=int(port_text))
    print(f"planner listening on {service.address[0]}:{service.address[1]} "
          f"({len(ruleset.rules)} rules)")
    try:
        service.serve_forever()
    except KeyboardInterrupt:
        service.shutdown()
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    try:
        ruleset = load_rules(args.path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"OK: {len(ruleset.rules)} rules")
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "serve-planner":
            return _cmd_serve(args)
        return _cmd_validate(args)
    except RuleError as exc:
        print(f"rule error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, BlueprintError, ModelError, NoEligibleTarget, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConnectionFailed, RequestTimeout) as exc:
        print(f"planner unreachable: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
