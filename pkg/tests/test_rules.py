import pytest
from hypothesis import given, strategies as st

from healsim.faults import FaultKind
from healsim.rules import (
    And,
    Comparison,
    DuplicateRuleName,
    Fact,
    NoMatchingRule,
    Not,
    Or,
    RepairPlan,
    Rule,
    RuleSet,
    RuleSyntaxError,
    Strategy,
    UnknownField,
    UnknownStrategy,
    default_ruleset,
    evaluate,
    format_rules,
    parse_rules,
)


def fact(kind=FaultKind.CF1, subject="Query Service", **kw):
    return Fact(kind=kind, subject=subject, **kw)


# -- parsing ------------------------------------------------------------------


def test_parse_single_rule():
    ruleset = parse_rules('rule "r1" when kind == CF4 then AS3')
    assert len(ruleset.rules) == 1
    rule = ruleset.rules[0]
    assert rule.name == "r1"
    assert rule.salience == 0
    assert rule.condition == Comparison("kind", "==", FaultKind.CF4)
    assert rule.strategy is Strategy.AS3


def test_parse_salience_and_comments():
    text = """
    # escalation policy
    rule "hot" salience 10 when prior_failures_of_subject >= 2 then AS4
    rule "cold" when kind != CF2 then AS1  # trailing comment
    """
    ruleset = parse_rules(text)
    assert [r.salience for r in ruleset.rules] == [10, 0]


def test_parse_empty_file_is_empty_ruleset():
    assert parse_rules("") == RuleSet(())
    assert parse_rules("# nothing but comments\n") == RuleSet(())


def test_parse_precedence_and_binds_tighter():
    ruleset = parse_rules(
        'rule "r" when kind == CF1 or kind == CF2 and exception_count > 5 then AS1'
    )
    condition = ruleset.rules[0].condition
    assert isinstance(condition, Or)
    assert condition.parts[0] == Comparison("kind", "==", FaultKind.CF1)
    assert isinstance(condition.parts[1], And)


def test_parse_parens_and_not():
    ruleset = parse_rules(
        'rule "r" when not (kind == CF1 or kind == CF2) and dependent_count > 0 then AS2'
    )
    condition = ruleset.rules[0].condition
    assert isinstance(condition, And)
    assert isinstance(condition.parts[0], Not)
    assert isinstance(condition.parts[0].term, Or)


def test_parse_subject_string_with_escapes():
    ruleset = parse_rules(r'rule "r" when subject == "A \"big\" slot\\" then AS1')
    assert ruleset.rules[0].condition.value == 'A "big" slot\\'


def test_duplicate_rule_name():
    text = 'rule "same" when kind == CF1 then AS1\nrule "same" when kind == CF2 then AS2'
    with pytest.raises(DuplicateRuleName) as err:
        parse_rules(text)
    assert err.value.name == "same"
    assert err.value.line == 2


def test_unknown_strategy():
    with pytest.raises(UnknownStrategy) as err:
        parse_rules('rule "r" when kind == CF1 then AS9')
    assert err.value.token == "AS9"


def test_unknown_field():
    with pytest.raises(UnknownField) as err:
        parse_rules('rule "r" when kin == CF1 then AS1')
    assert err.value.token == "kin"


@pytest.mark.parametrize(
    "text,fragment",
    [
        ('rule r1 when kind == CF1 then AS1', "rule name"),
        ('rule "r" when kind == CF1', "then"),
        ('rule "r" when kind > CF1 then AS1', "integer field"),
        ('rule "r" when subject > "x" then AS1', "integer field"),
        ('rule "r" when kind == "CF1" then AS1', "CF1..CF4"),
        ('rule "r" when subject == CF1 then AS1', "quoted string"),
        ('rule "r" when exception_count == "5" then AS1', "integer"),
        ('rule "r" when (kind == CF1 then AS1', "')'"),
        ('rule "r" salience x when kind == CF1 then AS1', "salience"),
        ('rule "r" when kind == CF1 then AS1 garbage', "rule"),
        ('rule "unterminated when kind == CF1 then AS1', "unterminated"),
    ],
)
def test_syntax_errors_have_positions(text, fragment):
    with pytest.raises(RuleSyntaxError) as err:
        parse_rules(text)
    assert fragment in str(err.value)
    assert err.value.line >= 1 and err.value.col >= 1


def test_error_position_points_at_token():
    with pytest.raises(UnknownField) as err:
        parse_rules('rule "r" when\n    bogus == CF1 then AS1')
    assert (err.value.line, err.value.col) == (2, 5)


# -- defaults -----------------------------------------------------------------


def test_default_ruleset_mappings():
    ruleset = default_ruleset()
    assert [r.name for r in ruleset.rules] == [
        "restart-on-cf1", "replace-on-cf2", "redeploy-on-cf3", "reconnect-on-cf4",
    ]
    expected = {
        FaultKind.CF1: Strategy.AS1,
        FaultKind.CF2: Strategy.AS4,
        FaultKind.CF3: Strategy.AS2,
        FaultKind.CF4: Strategy.AS3,
    }
    for kind, strategy in expected.items():
        plan = evaluate(ruleset, fact(kind=kind))
        assert plan.strategy is strategy


def test_default_cf4_plan_names_its_rule():
    plan = evaluate(default_ruleset(), fact(kind=FaultKind.CF4, subject="Query Service->Reputation Service"))
    assert plan == RepairPlan(Strategy.AS3, "Query Service->Reputation Service",
                              "reconnect-on-cf4")


# -- evaluation ---------------------------------------------------------------


def test_salience_wins_over_position():
    text = (
        'rule "first" when kind == CF1 then AS1\n'
        'rule "second" salience 10 when kind == CF1 then AS4\n'
    )
    plan = evaluate(parse_rules(text), fact())
    assert plan.fired_rule == "second"
    assert plan.strategy is Strategy.AS4


def test_equal_salience_falls_back_to_file_order():
    text = (
        'rule "a" when kind == CF1 then AS2\n'
        'rule "b" when kind == CF1 then AS4\n'
    )
    assert evaluate(parse_rules(text), fact()).fired_rule == "a"


def test_no_matching_rule():
    with pytest.raises(NoMatchingRule):
        evaluate(RuleSet(()), fact())
    ruleset = parse_rules('rule "r" when kind == CF2 then AS4')
    with pytest.raises(NoMatchingRule):
        evaluate(ruleset, fact(kind=FaultKind.CF3))


def test_evaluate_is_pure():
    ruleset = default_ruleset()
    one = evaluate(ruleset, fact())
    two = evaluate(ruleset, fact())
    assert one == two


def test_condition_fields_evaluate():
    text = (
        'rule "busy" when exception_count > 5 and dependent_count >= 1 then AS4\n'
        'rule "quiet" when not exception_count > 5 then AS1\n'
    )
    ruleset = parse_rules(text)
    busy = fact(kind=FaultKind.CF2, exception_count=9, dependent_count=2)
    assert evaluate(ruleset, busy).fired_rule == "busy"
    quiet = fact(kind=FaultKind.CF2, exception_count=3)
    assert evaluate(ruleset, quiet).fired_rule == "quiet"


def test_subject_comparison():
    ruleset = parse_rules('rule "qs" when subject == "Query Service" then AS4')
    assert evaluate(ruleset, fact()).strategy is Strategy.AS4
    with pytest.raises(NoMatchingRule):
        evaluate(ruleset, fact(subject="Bid Service"))


# -- round trip ---------------------------------------------------------------


def test_format_then_parse_identity_default():
    ruleset = default_ruleset()
    assert parse_rules(format_rules(ruleset)) == ruleset


def test_format_then_parse_identity_rich():
    text = (
        'rule "complex" salience -5 when '
        'not (kind == CF1 or subject == "A \\"x\\"") and exception_count <= 7 then AS2\n'
        'rule "plain" when prior_failures_of_subject != 0 then AS4\n'
    )
    ruleset = parse_rules(text)
    printed = format_rules(ruleset)
    assert parse_rules(printed) == ruleset
    # stable: printing again gives the same text
    assert format_rules(parse_rules(printed)) == printed


# -- properties ---------------------------------------------------------------

_conditions = st.sampled_from(
    [
        Comparison("kind", "==", FaultKind.CF1),
        Comparison("kind", "!=", FaultKind.CF2),
        Comparison("exception_count", ">=", 0),
        Comparison("dependent_count", ">=", 0),
        Comparison("prior_failures_of_subject", "<=", 100),
    ]
)


@given(
    salience_a=st.integers(min_value=-100, max_value=100),
    salience_b=st.integers(min_value=-100, max_value=100),
    cond_a=_conditions,
    cond_b=_conditions,
)
def test_salience_dominance_property(salience_a, salience_b, cond_a, cond_b):
    # both rules match every generated fact-free condition above
    ruleset = RuleSet(
        (
            Rule("a", salience_a, cond_a, Strategy.AS1),
            Rule("b", salience_b, cond_b, Strategy.AS2),
        )
    )
    # every sampled condition is true for a default CF1 fact, so both match
    plan = evaluate(ruleset, fact(kind=FaultKind.CF1))
    if salience_a > salience_b:
        assert plan.fired_rule == "a"
    elif salience_b > salience_a:
        assert plan.fired_rule == "b"
    else:
        assert plan.fired_rule == "a"  # file order on ties
