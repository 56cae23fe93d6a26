"""Repair rule language: parser, pretty-printer, and forward evaluator.

Rules live in plain text so the repair policy can be changed without
touching program code. The grammar (line comments start with ``#``):

    ruleset  := rule*
    rule     := "rule" STRING ["salience" INT] "when" cond "then" STRATEGY
    cond     := term (("and" | "or") term)*    # "and" binds tighter
    term     := ["not"] (FIELD OP literal | "(" cond ")")
    FIELD    := kind | subject | exception_count | dependent_count
                | prior_failures_of_subject
    OP       := == | != | > | >= | < | <=      # ordering only on integers
    STRATEGY := AS1 | AS2 | AS3 | AS4

``kind`` compares against the bare tokens CF1..CF4, ``subject`` against a
quoted string, and the three counter fields against integer literals.
Evaluation picks the matching rule with the highest salience, ties broken
by file position, and is free of side effects.
"""

from __future__ import annotations

import operator
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources

from .faults import FaultKind


class Strategy(Enum):
    AS1 = "AS1"  # restart the component in place
    AS2 = "AS2"  # redeploy the component into its slot
    AS3 = "AS3"  # reestablish the connector
    AS4 = "AS4"  # replace with a fresh instance of the same type


class RuleError(Exception):
    """A problem in a rule file, positioned at line and column (1-based)."""

    def __init__(self, message: str, line: int, col: int) -> None:
        super().__init__(f"line {line}, col {col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class RuleSyntaxError(RuleError):
    pass


class DuplicateRuleName(RuleError):
    def __init__(self, name: str, line: int, col: int) -> None:
        super().__init__(f"duplicate rule name {name!r}", line, col)
        self.name = name


class UnknownStrategy(RuleError):
    def __init__(self, token: str, line: int, col: int) -> None:
        super().__init__(f"unknown strategy {token!r}", line, col)
        self.token = token


class UnknownField(RuleError):
    def __init__(self, token: str, line: int, col: int) -> None:
        super().__init__(f"unknown field {token!r}", line, col)
        self.token = token


class NoMatchingRule(Exception):
    """No rule condition matched the fact; the failure is unhandled."""

    def __init__(self, fact: "Fact") -> None:
        super().__init__(f"no rule matches {fact}")
        self.fact = fact


@dataclass(frozen=True)
class Fact:
    """The planner's view of one failure report plus run history."""

    kind: FaultKind
    subject: str
    exception_count: int = 0
    dependent_count: int = 0
    prior_failures_of_subject: int = 0


@dataclass(frozen=True)
class Comparison:
    field: str
    op: str
    value: object  # FaultKind, str, or int depending on the field


@dataclass(frozen=True)
class Not:
    term: object


@dataclass(frozen=True)
class And:
    parts: tuple


@dataclass(frozen=True)
class Or:
    parts: tuple


@dataclass(frozen=True)
class Rule:
    name: str
    salience: int
    condition: object
    strategy: Strategy


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...]

    def __post_init__(self) -> None:
        names = [r.name for r in self.rules]
        if len(set(names)) != len(names):
            raise ValueError("rule names must be unique")


@dataclass(frozen=True)
class RepairPlan:
    """The selected adaptation: strategy, subject, and the rule that fired."""

    strategy: Strategy
    subject: str
    fired_rule: str


INT_FIELDS = ("exception_count", "dependent_count", "prior_failures_of_subject")
FIELDS = ("kind", "subject") + INT_FIELDS
_EQUALITY_OPS = ("==", "!=")
_OPS = {
    "==": operator.eq,
    "!=": operator.ne,
    ">": operator.gt,
    ">=": operator.ge,
    "<": operator.lt,
    "<=": operator.le,
}


# -- tokenizer ------------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    kind: str  # STRING, INT, IDENT, OP, LPAREN, RPAREN, EOF
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""(?P<string>"(?:[^"\\\n]|\\.)*")
      | (?P<int>-?\d+)
      | (?P<op>==|!=|>=|<=|>|<)
      | (?P<lparen>\()
      | (?P<rparen>\))
      | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)


def _unescape(raw: str, line: int, col: int) -> str:
    body = raw[1:-1]
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\":
            nxt = body[i + 1] if i + 1 < len(body) else ""
            if nxt not in ('"', "\\"):
                raise RuleSyntaxError(f"unsupported escape \\{nxt}", line, col)
            out.append(nxt)
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line = 1
    line_start = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            i += 1
            line_start = i
            continue
        if ch in " \t\r":
            i += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        col = i - line_start + 1
        m = _TOKEN_RE.match(text, i)
        if m is None:
            if ch == '"':
                raise RuleSyntaxError("unterminated string literal", line, col)
            raise RuleSyntaxError(f"unexpected character {ch!r}", line, col)
        kind = m.lastgroup.upper()
        tokens.append(_Token(kind, m.group(), line, col))
        i = m.end()
    tokens.append(_Token("EOF", "", line, (n - line_start) + 1))
    return tokens


# -- parser ---------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[_Token]) -> None:
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def expect_keyword(self, word: str) -> _Token:
        tok = self.peek()
        if tok.kind != "IDENT" or tok.text != word:
            raise RuleSyntaxError(f"expected {word!r}, found {tok.text or 'end of file'!r}",
                                  tok.line, tok.col)
        return self.advance()

    def parse_ruleset(self) -> RuleSet:
        rules: list[Rule] = []
        seen: dict[str, Rule] = {}
        while self.peek().kind != "EOF":
            name_tok, rule = self.parse_rule()
            if rule.name in seen:
                raise DuplicateRuleName(rule.name, name_tok.line, name_tok.col)
            seen[rule.name] = rule
            rules.append(rule)
        return RuleSet(tuple(rules))

    def parse_rule(self) -> tuple[_Token, Rule]:
        self.expect_keyword("rule")
        name_tok = self.peek()
        if name_tok.kind != "STRING":
            raise RuleSyntaxError("expected rule name string", name_tok.line, name_tok.col)
        self.advance()
        name = _unescape(name_tok.text, name_tok.line, name_tok.col)
        if not name:
            raise RuleSyntaxError("rule name must be non-empty", name_tok.line, name_tok.col)
        salience = 0
        tok = self.peek()
        if tok.kind == "IDENT" and tok.text == "salience":
            self.advance()
            int_tok = self.peek()
            if int_tok.kind != "INT":
                raise RuleSyntaxError("expected integer salience", int_tok.line, int_tok.col)
            self.advance()
            salience = int(int_tok.text)
        self.expect_keyword("when")
        condition = self.parse_or()
        self.expect_keyword("then")
        strat_tok = self.peek()
        if strat_tok.kind != "IDENT":
            raise RuleSyntaxError("expected strategy", strat_tok.line, strat_tok.col)
        self.advance()
        try:
            strategy = Strategy(strat_tok.text)
        except ValueError:
            raise UnknownStrategy(strat_tok.text, strat_tok.line, strat_tok.col) from None
        return name_tok, Rule(name, salience, condition, strategy)

    def parse_or(self):
        parts = [self.parse_and()]
        while self.peek().kind == "IDENT" and self.peek().text == "or":
            self.advance()
            parts.append(self.parse_and())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def parse_and(self):
        parts = [self.parse_term()]
        while self.peek().kind == "IDENT" and self.peek().text == "and":
            self.advance()
            parts.append(self.parse_term())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def parse_term(self):
        tok = self.peek()
        if tok.kind == "IDENT" and tok.text == "not":
            self.advance()
            return Not(self.parse_atom())
        return self.parse_atom()

    def parse_atom(self):
        tok = self.peek()
        if tok.kind == "LPAREN":
            self.advance()
            inner = self.parse_or()
            closing = self.peek()
            if closing.kind != "RPAREN":
                raise RuleSyntaxError("expected ')'", closing.line, closing.col)
            self.advance()
            return inner
        if tok.kind != "IDENT":
            raise RuleSyntaxError(
                f"expected a field or '(', found {tok.text or 'end of file'!r}",
                tok.line, tok.col,
            )
        if tok.text not in FIELDS:
            raise UnknownField(tok.text, tok.line, tok.col)
        self.advance()
        op_tok = self.peek()
        if op_tok.kind != "OP":
            raise RuleSyntaxError("expected a comparison operator", op_tok.line, op_tok.col)
        self.advance()
        if tok.text not in INT_FIELDS and op_tok.text not in _EQUALITY_OPS:
            raise RuleSyntaxError(
                f"operator {op_tok.text!r} needs an integer field", op_tok.line, op_tok.col
            )
        value = self.parse_literal(tok.text)
        return Comparison(tok.text, op_tok.text, value)

    def parse_literal(self, fieldname: str):
        tok = self.peek()
        if fieldname == "kind":
            if tok.kind == "IDENT":
                try:
                    self.advance()
                    return FaultKind(tok.text)
                except ValueError:
                    pass
            raise RuleSyntaxError(
                f"kind compares against CF1..CF4, found {tok.text or 'end of file'!r}",
                tok.line, tok.col,
            )
        if fieldname == "subject":
            if tok.kind != "STRING":
                raise RuleSyntaxError("subject compares against a quoted string",
                                      tok.line, tok.col)
            self.advance()
            return _unescape(tok.text, tok.line, tok.col)
        if tok.kind != "INT":
            raise RuleSyntaxError(f"{fieldname} compares against an integer",
                                  tok.line, tok.col)
        self.advance()
        return int(tok.text)


def parse_rules(text: str) -> RuleSet:
    """Parse a rule file into a RuleSet, preserving file order."""
    return _Parser(_tokenize(text)).parse_ruleset()


def load_rules(path: str) -> RuleSet:
    with open(path, encoding="utf-8") as fh:
        return parse_rules(fh.read())


def default_ruleset() -> RuleSet:
    """The bundled policy: CF1>AS1, CF2>AS4, CF3>AS2, CF4>AS3."""
    text = resources.files(__package__).joinpath("data/default.rules").read_text("utf-8")
    return parse_rules(text)


# -- pretty printer -------------------------------------------------------


def _quote(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _fmt_condition(cond, prec: int = 1) -> str:
    if isinstance(cond, Or):
        text = " or ".join(_fmt_condition(p, 2) for p in cond.parts)
        return f"({text})" if prec > 1 else text
    if isinstance(cond, And):
        text = " and ".join(_fmt_condition(p, 3) for p in cond.parts)
        return f"({text})" if prec > 2 else text
    if isinstance(cond, Not):
        return "not " + _fmt_condition(cond.term, 4)
    if isinstance(cond.value, FaultKind):
        literal = cond.value.value
    elif isinstance(cond.value, str):
        literal = _quote(cond.value)
    else:
        literal = str(cond.value)
    return f"{cond.field} {cond.op} {literal}"


def format_rules(ruleset: RuleSet) -> str:
    """Render a RuleSet back to rule-file text; reparsing yields an equal set."""
    lines = []
    for rule in ruleset.rules:
        salience = f" salience {rule.salience}" if rule.salience != 0 else ""
        lines.append(
            f"rule {_quote(rule.name)}{salience} "
            f"when {_fmt_condition(rule.condition)} then {rule.strategy.value}"
        )
    return "\n".join(lines) + ("\n" if lines else "")


# -- evaluation -----------------------------------------------------------


def _eval_condition(cond, fact: Fact) -> bool:
    if isinstance(cond, Or):
        return any(_eval_condition(p, fact) for p in cond.parts)
    if isinstance(cond, And):
        return all(_eval_condition(p, fact) for p in cond.parts)
    if isinstance(cond, Not):
        return not _eval_condition(cond.term, fact)
    return _OPS[cond.op](getattr(fact, cond.field), cond.value)


def evaluate(ruleset: RuleSet, fact: Fact) -> RepairPlan:
    """Pick the plan for a fact: highest salience among matching rules,
    earliest file position on ties. Raises NoMatchingRule when nothing
    matches."""
    best: Rule | None = None
    best_key: tuple[int, int] | None = None
    for idx, rule in enumerate(ruleset.rules):
        if _eval_condition(rule.condition, fact):
            key = (-rule.salience, idx)
            if best_key is None or key < best_key:
                best, best_key = rule, key
    if best is None:
        raise NoMatchingRule(fact)
    return RepairPlan(strategy=best.strategy, subject=fact.subject, fired_rule=best.name)
