"""Text formats: parsing, serialization, round-trip stability."""

from fractions import Fraction

import pytest

from pomparity import (ExactnessError, FiniteMemoryStrategy, Objective,
                       ParseError, parse_model, parse_strategy,
                       serialize_model, serialize_strategy,
                       stationary_strategy, uniform)
from pomparity.modelio import fixture_text
from conftest import alternating


MINI = """\
states: s0 s1
actions: a
observations: o0 o1
obs: s0 : o0
obs: s1 : o1
init: s0
trans: s0 a -> s1 1
trans: s1 a -> s1 1
"""


def test_ex1_fixture_is_canonical_and_round_trips():
    text = fixture_text("ex1")
    pomdp, objective = parse_model(text)
    assert serialize_model(pomdp, objective) == text
    again, obj2 = parse_model(serialize_model(pomdp, objective))
    assert again == pomdp and obj2 == objective


def test_ex2_fixture_is_canonical_and_round_trips():
    text = fixture_text("ex2")
    pomdp, objective = parse_model(text)
    assert serialize_model(pomdp, objective) == text


def test_model_without_objective_round_trips():
    pomdp, objective = parse_model(MINI)
    assert objective is None
    assert serialize_model(pomdp) == MINI


def test_weights_parse_as_exact_rationals():
    doc = MINI.replace("trans: s0 a -> s1 1",
                       "trans: s0 a -> s1 0.5, s0 1/2")
    pomdp, _ = parse_model(doc)
    assert pomdp.dist("s0", "a") == {"s1": Fraction(1, 2),
                                     "s0": Fraction(1, 2)}


def test_decimal_weights_failing_to_sum_raise_exactness_error():
    doc = MINI.replace("trans: s0 a -> s1 1", "trans: s0 a -> s1 0.999")
    with pytest.raises(ExactnessError) as err:
        parse_model(doc)
    assert "999/1000" in str(err.value)


def test_empty_states_section_errors_at_the_header():
    doc = MINI.replace("states: s0 s1", "states:")
    with pytest.raises(ParseError) as err:
        parse_model(doc)
    assert "states" in str(err.value) and "line 1" in str(err.value)


def test_unknown_identifiers_are_named():
    doc = MINI + "objective: buchi s7\n"
    with pytest.raises(ParseError) as err:
        parse_model(doc)
    assert "s7" in str(err.value)


def test_unknown_keyword_reports_line_number():
    doc = MINI + "frobnicate: yes\n"
    with pytest.raises(ParseError) as err:
        parse_model(doc)
    assert "line 9" in str(err.value)


def test_duplicate_transition_line_is_rejected():
    doc = MINI + "trans: s1 a -> s1 1\n"
    with pytest.raises(ParseError):
        parse_model(doc)


def test_availability_restriction_round_trips():
    doc = (MINI.replace("actions: a", "actions: a b")
           .replace("trans: s1 a -> s1 1",
                    "available: o1 : a\ntrans: s1 a -> s1 1")
           .replace("trans: s0 a -> s1 1",
                    "trans: s0 a -> s1 1\ntrans: s0 b -> s0 1"))
    pomdp, _ = parse_model(doc)
    assert pomdp.available_at("o1") == frozenset({"a"})
    assert pomdp.available_at("o0") == frozenset({"a", "b"})
    text = serialize_model(pomdp)
    again, _ = parse_model(text)
    assert again == pomdp


def test_parity_objective_round_trips():
    doc = MINI + "objective: parity\npriority: s0 1\npriority: s1 2\n"
    pomdp, objective = parse_model(doc)
    assert objective.priority_map == {"s0": 1, "s1": 2}
    text = serialize_model(pomdp, objective)
    _, obj2 = parse_model(text)
    assert obj2 == objective


# -- strategies --

def test_alternating_strategy_round_trips(ex1):
    pomdp, _ = ex1
    sigma = alternating(pomdp)
    text = serialize_strategy(sigma)
    assert parse_strategy(text) == sigma
    assert serialize_strategy(parse_strategy(text)) == text


def test_stationary_strategy_round_trips(ex1):
    pomdp, _ = ex1
    sigma = stationary_strategy(pomdp, ["a"])
    assert parse_strategy(serialize_strategy(sigma)) == sigma


def test_strategy_with_fractional_weights_round_trips():
    sigma = FiniteMemoryStrategy(
        memories=("m",),
        action_select={"m": {"a": Fraction(1, 3), "b": Fraction(2, 3)}},
        memory_update={("m", "o", "a"): {"m": Fraction(1)},
                       ("m", "o", "b"): {"m": Fraction(1)}},
        initial_memory="m")
    assert parse_strategy(serialize_strategy(sigma)) == sigma


def test_strategy_duplicate_memory_name_is_rejected():
    text = "memories: m m\ninit: m\nact: m -> a 1\n"
    with pytest.raises(ParseError):
        parse_strategy(text)


def test_strategy_unknown_memory_reference_is_rejected():
    text = "memories: m\ninit: m\nact: m -> a 1\nupdate: m o a -> q 1\n"
    with pytest.raises(ParseError) as err:
        parse_strategy(text)
    assert "q" in str(err.value)


def test_strategy_float_free_guarantee():
    sigma = FiniteMemoryStrategy(
        memories=("m",), action_select={"m": uniform(["a", "b", "c"])},
        memory_update={("m", "o", a): {"m": Fraction(1)}
                       for a in ("a", "b", "c")},
        initial_memory="m")
    parsed = parse_strategy(serialize_strategy(sigma))
    for dist in parsed.action_select.values():
        for w in dist.values():
            assert isinstance(w, Fraction)
