"""Planning service: the rule engine behind a socket, plus an in-process
twin that returns identical answers.

Wire protocol: one request or response per line over TCP. Frames are
canonical JSON (keys sorted, no insignificant whitespace), UTF-8, and end
with a single LF, so equal messages always encode to equal bytes.

    request  {"fact":{"dependent_count":N,"exception_count":N,"kind":"CF1",
              "prior_failures_of_subject":N,"subject":S},
              "request_id":N,"type":"plan_request","version":1}
    response {"outcome":O,"request_id":N,"type":"plan_response","version":1}

with outcome ``{"plan":{"fired_rule":S,"strategy":"AS1","subject":S}}``,
``{"no_match":true}``, or ``{"error":{"code":S,"message":S}}``. A frame the
server cannot decode is answered with an error outcome (code "malformed",
request id 0 when unrecoverable) and the connection stays open.
"""

from __future__ import annotations

import json
import logging
import socket
import socketserver
import threading
from dataclasses import dataclass
from typing import Mapping, Union

from .analyzer import FailureReport
from .faults import FaultKind
from .rules import Fact, NoMatchingRule, RepairPlan, RuleSet, Strategy, evaluate

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
DEFAULT_PORT = 7464
DEFAULT_TIMEOUT = 1.0  # wall-clock seconds per remote round-trip


class MalformedFrame(Exception):
    """Bytes on the wire that do not form a valid protocol message."""


class ConnectionFailed(Exception):
    """The planning service could not be reached."""


class RequestTimeout(Exception):
    """The planning service did not answer within the timeout."""


class RemoteError(Exception):
    """The planning service answered with an error outcome."""

    def __init__(self, code: str, message: str) -> None:
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


@dataclass(frozen=True)
class PlanRequest:
    request_id: int
    fact: Fact


@dataclass(frozen=True)
class NoMatch:
    """Outcome marker: the rule base cannot handle this failure."""


@dataclass(frozen=True)
class ErrorOutcome:
    code: str
    message: str


Outcome = Union[RepairPlan, NoMatch, ErrorOutcome]


@dataclass(frozen=True)
class PlanResponse:
    request_id: int
    outcome: Outcome


Message = Union[PlanRequest, PlanResponse]


# -- framing ----------------------------------------------------------------


def _canonical(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n"


def encode(message: Message) -> bytes:
    """One canonical, LF-terminated frame; equal messages encode identically."""
    if isinstance(message, PlanRequest):
        fact = message.fact
        return _canonical(
            {
                "type": "plan_request",
                "version": PROTOCOL_VERSION,
                "request_id": message.request_id,
                "fact": {
                    "kind": fact.kind.value,
                    "subject": fact.subject,
                    "exception_count": fact.exception_count,
                    "dependent_count": fact.dependent_count,
                    "prior_failures_of_subject": fact.prior_failures_of_subject,
                },
            }
        )
    if isinstance(message, PlanResponse):
        outcome = message.outcome
        if isinstance(outcome, RepairPlan):
            body = {
                "plan": {
                    "strategy": outcome.strategy.value,
                    "subject": outcome.subject,
                    "fired_rule": outcome.fired_rule,
                }
            }
        elif isinstance(outcome, NoMatch):
            body = {"no_match": True}
        elif isinstance(outcome, ErrorOutcome):
            body = {"error": {"code": outcome.code, "message": outcome.message}}
        else:
            raise TypeError(f"not an outcome: {outcome!r}")
        return _canonical(
            {
                "type": "plan_response",
                "version": PROTOCOL_VERSION,
                "request_id": message.request_id,
                "outcome": body,
            }
        )
    raise TypeError(f"not a protocol message: {message!r}")


def _require(obj: dict, key: str, kind: type, where: str):
    if key not in obj:
        raise MalformedFrame(f"{where} is missing field {key!r}")
    value = obj[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise MalformedFrame(f"{where} field {key!r} must be {kind.__name__}")
    return value


def _check_no_extras(obj: dict, allowed: set[str], where: str) -> None:
    extras = set(obj) - allowed
    if extras:
        raise MalformedFrame(f"{where} has unexpected field {sorted(extras)[0]!r}")


def decode(data: bytes) -> Message:
    """Parse one frame back into a message; raises MalformedFrame on bad
    UTF-8, bad JSON, a wrong version, or missing/mistyped/extra fields."""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedFrame(f"frame is not UTF-8: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedFrame(f"frame is not JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise MalformedFrame("frame is not a JSON object")
    msg_type = _require(obj, "type", str, "frame")
    version = _require(obj, "version", int, "frame")
    if version != PROTOCOL_VERSION:
        raise MalformedFrame(f"unsupported protocol version {version}")
    request_id = _require(obj, "request_id", int, "frame")

    if msg_type == "plan_request":
        _check_no_extras(obj, {"type", "version", "request_id", "fact"}, "request")
        fact_obj = _require(obj, "fact", dict, "request")
        _check_no_extras(
            fact_obj,
            {"kind", "subject", "exception_count", "dependent_count",
             "prior_failures_of_subject"},
            "fact",
        )
        kind_text = _require(fact_obj, "kind", str, "fact")
        try:
            kind = FaultKind(kind_text)
        except ValueError:
            raise MalformedFrame(f"unknown fault kind {kind_text!r}") from None
        fact = Fact(
            kind=kind,
            subject=_require(fact_obj, "subject", str, "fact"),
            exception_count=_require(fact_obj, "exception_count", int, "fact"),
            dependent_count=_require(fact_obj, "dependent_count", int, "fact"),
            prior_failures_of_subject=_require(
                fact_obj, "prior_failures_of_subject", int, "fact"
            ),
        )
        return PlanRequest(request_id=request_id, fact=fact)

    if msg_type == "plan_response":
        _check_no_extras(obj, {"type", "version", "request_id", "outcome"}, "response")
        outcome_obj = _require(obj, "outcome", dict, "response")
        if "plan" in outcome_obj:
            _check_no_extras(outcome_obj, {"plan"}, "outcome")
            plan_obj = _require(outcome_obj, "plan", dict, "outcome")
            _check_no_extras(plan_obj, {"strategy", "subject", "fired_rule"}, "plan")
            strategy_text = _require(plan_obj, "strategy", str, "plan")
            try:
                strategy = Strategy(strategy_text)
            except ValueError:
                raise MalformedFrame(f"unknown strategy {strategy_text!r}") from None
            outcome: Outcome = RepairPlan(
                strategy=strategy,
                subject=_require(plan_obj, "subject", str, "plan"),
                fired_rule=_require(plan_obj, "fired_rule", str, "plan"),
            )
        elif "no_match" in outcome_obj:
            _check_no_extras(outcome_obj, {"no_match"}, "outcome")
            if outcome_obj["no_match"] is not True:
                raise MalformedFrame("no_match must be true")
            outcome = NoMatch()
        elif "error" in outcome_obj:
            _check_no_extras(outcome_obj, {"error"}, "outcome")
            err_obj = _require(outcome_obj, "error", dict, "outcome")
            _check_no_extras(err_obj, {"code", "message"}, "error")
            outcome = ErrorOutcome(
                code=_require(err_obj, "code", str, "error"),
                message=_require(err_obj, "message", str, "error"),
            )
        else:
            raise MalformedFrame("outcome must be plan, no_match, or error")
        return PlanResponse(request_id=request_id, outcome=outcome)

    raise MalformedFrame(f"unknown message type {msg_type!r}")


# -- service ----------------------------------------------------------------


def _best_effort_request_id(line: bytes) -> int:
    try:
        obj = json.loads(line.decode("utf-8"))
        rid = obj.get("request_id") if isinstance(obj, dict) else None
        return rid if isinstance(rid, int) and not isinstance(rid, bool) else 0
    except Exception:
        return 0


class _PlanHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        for line in self.rfile:
            try:
                message = decode(line.rstrip(b"\n"))
                if not isinstance(message, PlanRequest):
                    raise MalformedFrame("server expects plan_request frames")
            except MalformedFrame as exc:
                response = PlanResponse(
                    request_id=_best_effort_request_id(line),
                    outcome=ErrorOutcome("malformed", str(exc)),
                )
                self.wfile.write(encode(response))
                continue
            try:
                outcome: Outcome = evaluate(self.server.ruleset, message.fact)
            except NoMatchingRule:
                outcome = NoMatch()
            except Exception as exc:  # pragma: no cover - defensive
                log.exception("plan evaluation failed")
                outcome = ErrorOutcome("internal", str(exc))
            self.wfile.write(encode(PlanResponse(message.request_id, outcome)))


class _PlanServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], ruleset: RuleSet) -> None:
        super().__init__(address, _PlanHandler)
        self.ruleset = ruleset


class PlanService:
    """TCP planning service. Stateless across requests: every response is a
    pure function of (ruleset, request). Rules are loaded once at start;
    changing them means restarting the service."""

    def __init__(self, ruleset: RuleSet, host: str = "127.0.0.1", port: int = DEFAULT_PORT):
        try:
            self._server = _PlanServer((host, port), ruleset)
        except OSError as exc:
            raise OSError(f"cannot bind {host}:{port}: {exc}") from exc
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    def start(self) -> "PlanService":
        """Serve on a background thread; returns self once accepting."""
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        log.info("plan service listening on %s:%d", *self.address)
        return self

    def serve_forever(self) -> None:
        log.info("plan service listening on %s:%d", *self.address)
        self._server.serve_forever()

    def shutdown(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)


# -- planner handles ---------------------------------------------------------


class InProcessPlanner:
    """Runs the rule engine directly; the transparent twin of RemotePlanner."""

    def __init__(self, ruleset: RuleSet) -> None:
        self.ruleset = ruleset

    def plan(self, fact: Fact) -> RepairPlan | NoMatch:
        try:
            return evaluate(self.ruleset, fact)
        except NoMatchingRule:
            return NoMatch()

    def close(self) -> None:
        pass


class RemotePlanner:
    """One request/response round-trip per fact over a persistent TCP
    connection. Returns exactly what InProcessPlanner would for the same
    rules and fact."""

    def __init__(self, host: str, port: int, timeout: float = DEFAULT_TIMEOUT) -> None:
        self.host = host
        self.port = port
        self.timeout = timeout
        self._sock: socket.socket | None = None
        self._reader = None
        self._next_request_id = 1

    def _connect(self) -> None:
        if self._sock is not None:
            return
        try:
            self._sock = socket.create_connection((self.host, self.port), timeout=self.timeout)
        except OSError as exc:
            raise ConnectionFailed(f"cannot reach planner at {self.host}:{self.port}: {exc}") from exc
        self._reader = self._sock.makefile("rb")

    def plan(self, fact: Fact) -> RepairPlan | NoMatch:
        self._connect()
        request = PlanRequest(request_id=self._next_request_id, fact=fact)
        self._next_request_id += 1
        try:
            self._sock.sendall(encode(request))
            line = self._reader.readline()
        except socket.timeout as exc:
            raise RequestTimeout(f"planner did not answer within {self.timeout}s") from exc
        except OSError as exc:
            raise ConnectionFailed(f"planner connection lost: {exc}") from exc
        if not line:
            raise ConnectionFailed("planner closed the connection")
        response = decode(line.rstrip(b"\n"))
        if not isinstance(response, PlanResponse):
            raise MalformedFrame("expected a plan_response frame")
        if response.request_id != request.request_id:
            raise RemoteError("protocol", f"response for request {response.request_id}, "
                                          f"expected {request.request_id}")
        if isinstance(response.outcome, ErrorOutcome):
            raise RemoteError(response.outcome.code, response.outcome.message)
        return response.outcome

    def close(self) -> None:
        if self._reader is not None:
            self._reader.close()
            self._reader = None
        if self._sock is not None:
            self._sock.close()
            self._sock = None


Planner = Union[InProcessPlanner, RemotePlanner]


def fact_from_report(report: FailureReport, prior_failures: int) -> Fact:
    return Fact(
        kind=report.kind,
        subject=report.render_subject(),
        exception_count=report.exception_count,
        dependent_count=len(report.dependent_slots),
        prior_failures_of_subject=prior_failures,
    )


def request_plan(
    planner: Planner,
    report: FailureReport,
    history: Mapping[str, int] | None = None,
) -> RepairPlan | NoMatch:
    """Ask a planner for the repair of one failure report. ``history`` maps
    subject strings to how many times they have already failed this run."""
    prior = (history or {}).get(report.render_subject(), 0)
    return planner.plan(fact_from_report(report, prior))
