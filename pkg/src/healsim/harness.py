"""Scenario harness: drives inject, monitor, analyze, plan, execute, verify
rounds and records everything it saw.

Every round injects exactly one fault (drawn from the seeded generator or
taken from an explicit script), runs one full repair cycle, then validates
the architecture against the blueprint. All randomness flows from the
single splitmix64 seed and the clock is logical, so a config determines
every output byte.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass, replace

from .analyzer import (
    FailureReport,
    RootCauseLedger,
    RootCauseSuspect,
    classify,
    write_suspect_report,
)
from .executor import ExecutionResult, execute
from .faults import FaultInstance, FaultKind, Rng, draw_fault, draw_interval, inject
from .model import (
    Blueprint,
    Violation,
    build_default_model,
    instantiate_blueprint,
    load_blueprint,
    validate,
)
from .monitor import observe, take_snapshot
from .planner import (
    InProcessPlanner,
    NoMatch,
    Planner,
    RemotePlanner,
    request_plan,
)
from .rules import RepairPlan, RuleSet, default_ruleset, load_rules

log = logging.getLogger(__name__)


class ConfigError(Exception):
    """A scenario cannot start: bad config, script, rules, or blueprint."""


@dataclass
class ScenarioConfig:
    seed: int
    rounds: int
    exception_threshold: int = 5
    rootcause_threshold: int = 3
    planner: str = "inproc"  # "inproc" or "tcp://HOST:PORT"
    rules_path: str | None = None
    blueprint_path: str | None = None
    script_path: str | None = None
    script: list[FaultInstance] | None = None
    out_dir: str | None = None

    def __post_init__(self) -> None:
        if self.rounds < 0:
            raise ConfigError("rounds must be non-negative")
        if self.exception_threshold < 1 or self.rootcause_threshold < 1:
            raise ConfigError("thresholds must be at least 1")


@dataclass
class RoundRecord:
    index: int
    fault: FaultInstance
    reports: tuple[FailureReport, ...]
    plans: tuple[RepairPlan | None, ...]  # aligned with reports; None = no match
    executions: tuple[ExecutionResult, ...]
    post_violations: tuple[Violation, ...]
    clock_start: int
    clock_end: int


@dataclass
class ScenarioReport:
    config: ScenarioConfig
    rounds: list[RoundRecord]
    counters: dict[str, int]
    suspects: list[RootCauseSuspect]
    unhandled_failures: int


def parse_planner_spec(spec: str) -> tuple[str, int] | None:
    """None for in-process mode, (host, port) for tcp://HOST:PORT."""
    if spec == "inproc":
        return None
    if spec.startswith("tcp://"):
        rest = spec[len("tcp://"):]
        host, sep, port_text = rest.rpartition(":")
        if sep and host and port_text.isdigit():
            return host, int(port_text)
    raise ConfigError(f"planner must be 'inproc' or 'tcp://HOST:PORT', got {spec!r}")


def load_script(path: str, blueprint: Blueprint) -> list[FaultInstance]:
    """Parse a scripted fault list: ``[{"kind":"CF1","target":"Query Service"},
    {"kind":"CF2","target":...,"magnitude":N},
    {"kind":"CF4","target":{"from":A,"to":B}}, ...]``. Targets must resolve
    against the blueprint."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read script {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"script {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise ConfigError("script must be a JSON list of faults")
    return [script_fault(entry, blueprint, i) for i, entry in enumerate(raw)]


def script_fault(entry: dict, blueprint: Blueprint, index: int = 0) -> FaultInstance:
    where = f"script entry {index}"
    if not isinstance(entry, dict):
        raise ConfigError(f"{where}: expected an object")
    try:
        kind = FaultKind(entry.get("kind"))
    except ValueError:
        raise ConfigError(f"{where}: unknown kind {entry.get('kind')!r}") from None
    target = entry.get("target")
    if kind is FaultKind.CF4:
        if not isinstance(target, dict) or "from" not in target or "to" not in target:
            raise ConfigError(f"{where}: CF4 target must be {{\"from\":..,\"to\":..}}")
        spec = blueprint.find_intended(target["from"], target["to"])
        if spec is None:
            raise ConfigError(
                f"{where}: no intended connector {target['from']}->{target['to']}"
            )
        resolved: object = spec
    else:
        if not isinstance(target, str) or not blueprint.has_slot(target):
            raise ConfigError(f"{where}: unknown slot {target!r}")
        resolved = target
    magnitude = entry.get("magnitude")
    if kind is FaultKind.CF2:
        if not isinstance(magnitude, int) or isinstance(magnitude, bool) or magnitude <= 0:
            raise ConfigError(f"{where}: CF2 needs a positive integer magnitude")
    elif magnitude is not None:
        raise ConfigError(f"{where}: only CF2 takes a magnitude")
    return FaultInstance(kind=kind, target=resolved, magnitude=magnitude)


class ScenarioRunner:
    """Owns the mutable run state (model, rng, ledger, history) and executes
    rounds one at a time. The single writer of the model."""

    def __init__(
        self,
        config: ScenarioConfig,
        *,
        ruleset: RuleSet | None = None,
        blueprint: Blueprint | None = None,
        planner: Planner | None = None,
    ) -> None:
        self.config = config
        if blueprint is not None:
            self.model = instantiate_blueprint(blueprint)
        elif config.blueprint_path:
            self.model = instantiate_blueprint(load_blueprint(config.blueprint_path))
        else:
            self.model = build_default_model()
        if ruleset is None:
            ruleset = load_rules(config.rules_path) if config.rules_path else default_ruleset()
        self.ruleset = ruleset
        if planner is None:
            remote = parse_planner_spec(config.planner)
            planner = (
                InProcessPlanner(ruleset) if remote is None else RemotePlanner(*remote)
            )
        self.planner = planner
        self.rng = Rng(config.seed)
        self.ledger = RootCauseLedger(threshold=config.rootcause_threshold)
        self.history: dict[str, int] = {}
        self.records: list[RoundRecord] = []
        self.unhandled_failures = 0
        self._next_report_id = 0
        self._script = list(config.script) if config.script is not None else None
        if self._script is not None and len(self._script) < config.rounds:
            raise ConfigError(
                f"script has {len(self._script)} faults but the scenario runs "
                f"{config.rounds} rounds"
            )

    def run_round(self) -> RoundRecord:
        """One full cycle: wait, inject, observe, classify, plan, execute,
        verify. Returns (and appends) the round's record."""
        index = len(self.records) + 1
        clock_start = self.model.clock
        self.model.advance_clock(draw_interval(self.rng))
        if self._script is not None:
            fault = replace(self._script[index - 1], injected_at=self.model.clock)
        else:
            fault = draw_fault(self.rng, self.model, self.config.exception_threshold)
        before = take_snapshot(self.model)
        inject(self.model, fault)
        after = take_snapshot(self.model)
        events = observe(before, after)
        reports = classify(
            events, self.model, self.config.exception_threshold, self._next_report_id
        )
        self._next_report_id += len(reports)
        for report in reports:
            if report.kind is not FaultKind.CF4:
                self.ledger.record_failure(report)
        plans: list[RepairPlan | None] = []
        executions: list[ExecutionResult] = []
        for report in reports:
            subject = report.render_subject()
            outcome = request_plan(self.planner, report, self.history)
            self.history[subject] = self.history.get(subject, 0) + 1
            if isinstance(outcome, NoMatch):
                log.info("round %d: no rule handles %s(%s)", index, report.kind.value, subject)
                plans.append(None)
                self.unhandled_failures += 1
            else:
                plans.append(outcome)
                executions.append(execute(self.model, outcome))
        record = RoundRecord(
            index=index,
            fault=fault,
            reports=tuple(reports),
            plans=tuple(plans),
            executions=tuple(executions),
            post_violations=tuple(validate(self.model)),
            clock_start=clock_start,
            clock_end=self.model.clock,
        )
        self.records.append(record)
        return record

    def run(self) -> ScenarioReport:
        for _ in range(self.config.rounds):
            self.run_round()
        return ScenarioReport(
            config=self.config,
            rounds=self.records,
            counters=dict(self.ledger.counters),
            suspects=self.ledger.suspects(),
            unhandled_failures=self.unhandled_failures,
        )

    def close(self) -> None:
        self.planner.close()


def run_scenario(config: ScenarioConfig) -> ScenarioReport:
    """Run a whole scenario; writes report files when out_dir is set."""
    runner = ScenarioRunner(config)
    try:
        report = runner.run()
    finally:
        runner.close()
    if config.out_dir:
        emit_reports(report, config.out_dir)
    return report


# -- report emission ---------------------------------------------------------


def _config_json(config: ScenarioConfig) -> dict:
    # out_dir is where the report lands, not part of what it describes;
    # leaving it out keeps equal runs byte-identical wherever they are written.
    return {
        "seed": config.seed,
        "rounds": config.rounds,
        "exception_threshold": config.exception_threshold,
        "rootcause_threshold": config.rootcause_threshold,
        "planner": config.planner,
        "rules": config.rules_path,
        "blueprint": config.blueprint_path,
        "script": config.script_path,
    }


def _fault_json(fault: FaultInstance) -> dict:
    out = {"kind": fault.kind.value, "target": fault.render_target(),
           "injected_at": fault.injected_at}
    if fault.magnitude is not None:
        out["magnitude"] = fault.magnitude
    return out


def _report_json(report: FailureReport) -> dict:
    return {
        "report_id": report.report_id,
        "kind": report.kind.value,
        "subject": report.render_subject(),
        "exception_count": report.exception_count,
        "detected_at": report.detected_at,
        "dependent_slots": list(report.dependent_slots),
    }


def _plan_json(report: FailureReport, plan: RepairPlan | None) -> dict:
    if plan is None:
        return {"report_id": report.report_id, "no_match": True}
    return {
        "report_id": report.report_id,
        "strategy": plan.strategy.value,
        "subject": plan.subject,
        "fired_rule": plan.fired_rule,
    }


def _execution_json(result: ExecutionResult) -> dict:
    return {
        "strategy": result.plan.strategy.value,
        "subject": result.plan.subject,
        "mutations": list(result.applied_mutations),
        "new_instance_id": result.new_instance_id,
        "completed_at": result.completed_at,
    }


def _round_json(record: RoundRecord) -> dict:
    return {
        "round": record.index,
        "clock_start": record.clock_start,
        "clock_end": record.clock_end,
        "fault": _fault_json(record.fault),
        "reports": [_report_json(r) for r in record.reports],
        "plans": [_plan_json(r, p) for r, p in zip(record.reports, record.plans)],
        "executions": [_execution_json(e) for e in record.executions],
        "post_violations": [
            {"kind": v.kind.value, "subject": v.render_subject()}
            for v in record.post_violations
        ],
    }


def scenario_json(report: ScenarioReport) -> bytes:
    """Canonical JSON bytes for a scenario report (sorted keys, LF-terminated)."""
    doc = {
        "config": _config_json(report.config),
        "rounds": [_round_json(r) for r in report.rounds],
        "root_cause": {
            "threshold": report.config.rootcause_threshold,
            "counters": report.counters,
        },
        "suspects": [
            {
                "component": s.slot,
                "count": s.count,
                "implicated_by": list(s.implicated_by),
                "first_at": s.first_at,
                "last_at": s.last_at,
            }
            for s in report.suspects
        ],
        "unhandled_failures": report.unhandled_failures,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n"


ROUNDS_CSV_HEADER = [
    "round", "clock", "fault_kind", "fault_target", "reports", "plans",
    "strategies", "post_violations", "unhandled",
]


def emit_reports(report: ScenarioReport, out_dir: str) -> dict[str, str]:
    """Write scenario.json, rounds.csv, and suspects.csv; byte-stable for
    equal reports. Returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "scenario": os.path.join(out_dir, "scenario.json"),
        "rounds": os.path.join(out_dir, "rounds.csv"),
        "suspects": os.path.join(out_dir, "suspects.csv"),
    }
    try:
        with open(paths["scenario"], "wb") as fh:
            fh.write(scenario_json(report))
        with open(paths["rounds"], "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(ROUNDS_CSV_HEADER)
            for record in report.rounds:
                fired = [p for p in record.plans if p is not None]
                writer.writerow([
                    record.index,
                    record.clock_end,
                    record.fault.kind.value,
                    record.fault.render_target(),
                    len(record.reports),
                    len(fired),
                    ";".join(p.strategy.value for p in fired),
                    len(record.post_violations),
                    sum(1 for p in record.plans if p is None),
                ])
        write_suspect_report(report.suspects, paths["suspects"])
    except OSError as exc:
        raise ConfigError(f"cannot write reports under {out_dir}: {exc}") from exc
    return paths
