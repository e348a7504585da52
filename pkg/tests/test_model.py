"""Model types: validation, belief updates, objective conversion."""

import random
from fractions import Fraction

import pytest

from pomparity import (ExactnessError, Objective, Pomdp,
                       UnsupportedConversionError, belief_update,
                       make_absorbing, objective_as_parity, validate,
                       validate_objective)
from conftest import random_pomdp


def tiny(transitions=None, **kw):
    base = dict(
        states=("s0", "s1"), actions=("a",), observations=("o0", "o1"),
        obs_map={"s0": "o0", "s1": "o1"},
        transitions=transitions or {
            ("s0", "a"): {"s1": Fraction(1)},
            ("s1", "a"): {"s1": Fraction(1)},
        },
        initial_state="s0")
    base.update(kw)
    return Pomdp(**base)


def test_fixture_ex1_validates_cleanly(ex1):
    pomdp, _ = ex1
    assert validate(pomdp) == []


def test_fixture_ex2_validates_cleanly(ex2):
    pomdp, _ = ex2
    assert validate(pomdp) == []


def test_half_weight_row_names_the_pair():
    p = tiny(transitions={
        ("s0", "a"): {"s1": Fraction(1, 2)},
        ("s1", "a"): {"s1": Fraction(1)},
    })
    report = validate(p)
    assert any("'s0'" in line and "'a'" in line and "1/2" in line
               for line in report)


def test_shared_initial_observation_names_the_observation():
    p = tiny(obs_map={"s0": "o0", "s1": "o0"}, observations=("o0",))
    report = validate(p)
    assert any("o0" in line and "initial" in line for line in report)


def test_float_weight_is_rejected_at_construction():
    with pytest.raises(ExactnessError):
        tiny(transitions={
            ("s0", "a"): {"s1": 0.5, "s0": 0.5},
            ("s1", "a"): {"s1": 1},
        })


def test_unavailable_action_with_transition_row_is_flagged():
    p = tiny(available={"o1": frozenset()})
    report = validate(p)
    assert any("allows no actions" in line for line in report)


def test_objective_validation_catches_unknown_targets(ex1):
    pomdp, _ = ex1
    bad = Objective.buchi({"nope"})
    assert validate_objective(pomdp, bad)
    good = Objective.buchi({"X"})
    assert validate_objective(pomdp, good) == []


# -- belief updates --

def test_belief_update_keeps_full_class_on_ex1(ex1):
    pomdp, _ = ex1
    u = frozenset({"X", "X'", "Y", "Y'", "Z", "Z'"})
    for a in ("a", "b"):
        assert belief_update(pomdp, u, a, "o_U") == u


def test_belief_update_self_loop_fixed_point():
    p = tiny()
    assert belief_update(p, {"s1"}, "a", "o1") == frozenset({"s1"})


def test_belief_update_can_be_empty():
    p = tiny()
    assert belief_update(p, {"s0"}, "a", "o0") == frozenset()


def test_belief_update_matches_direct_enumeration():
    rng = random.Random(4021)
    for _ in range(60):
        pomdp = random_pomdp(rng)
        states = list(pomdp.states)
        belief = frozenset(rng.sample(states, rng.randint(1, len(states))))
        # restrict to one observation class, as the operation requires
        o = pomdp.obs_map[next(iter(belief))]
        belief = frozenset(s for s in belief if pomdp.obs_map[s] == o)
        a = rng.choice(pomdp.actions)
        o2 = rng.choice(pomdp.observations)
        expected = frozenset(
            t for s in belief for t in pomdp.supp(s, a)
            if pomdp.obs_map[t] == o2)
        assert belief_update(pomdp, belief, a, o2) == expected


def test_belief_update_is_monotone():
    rng = random.Random(4022)
    for _ in range(60):
        pomdp = random_pomdp(rng)
        o = rng.choice(pomdp.observations)
        cls = list(pomdp.states_with_obs(o))
        small = frozenset(rng.sample(cls, rng.randint(1, len(cls))))
        big = small | frozenset(rng.sample(cls, rng.randint(1, len(cls))))
        a = rng.choice(pomdp.actions)
        o2 = rng.choice(pomdp.observations)
        assert belief_update(pomdp, small, a, o2) <= belief_update(pomdp, big, a, o2)


# -- objective conversion --

def test_cobuchi_conversion_priorities_on_ex1(ex1):
    pomdp, objective = ex1
    base, parity = objective_as_parity(pomdp, objective)
    pm = parity.priority_map
    assert base is pomdp
    for s in ("X", "X'", "Z", "Z'"):
        assert pm[s] == 2
    assert pm["Y"] == 1 and pm["Y'"] == 1


def test_parity_conversion_is_identity(ex1):
    pomdp, _ = ex1
    parity = Objective.parity({s: 1 for s in pomdp.states})
    assert objective_as_parity(pomdp, parity) == (pomdp, parity)


def test_empty_buchi_target_gives_all_odd():
    p = tiny()
    _, parity = objective_as_parity(p, Objective.buchi(set()))
    assert set(parity.priority_map.values()) == {1}


def test_reach_conversion_makes_targets_absorbing():
    p = tiny()
    base, parity = objective_as_parity(p, Objective.reach({"s1"}))
    assert base.dist("s1", "a") == {"s1": Fraction(1)}
    assert parity.priority_map == {"s0": 1, "s1": 0}


def test_safe_conversion_absorbs_the_complement():
    p = tiny(transitions={
        ("s0", "a"): {"s0": Fraction(1, 2), "s1": Fraction(1, 2)},
        ("s1", "a"): {"s0": Fraction(1)},
    })
    base, parity = objective_as_parity(p, Objective.safe({"s0"}))
    assert base.dist("s1", "a") == {"s1": Fraction(1)}
    assert parity.priority_map == {"s0": 2, "s1": 1}


def test_muller_conversion_is_refused():
    p = tiny()
    muller = Objective.muller({"s0": 0, "s1": 1}, [{0}])
    with pytest.raises(UnsupportedConversionError):
        objective_as_parity(p, muller)


def test_make_absorbing_only_touches_targets(ex2):
    pomdp, _ = ex2
    fixed = make_absorbing(pomdp, {"B"})
    assert fixed.dist("B", "a") == {"B": Fraction(1)}
    assert fixed.dist("B", "b") == {"B": Fraction(1)}
    for s in pomdp.states:
        if s == "B":
            continue
        for a in pomdp.actions:
            assert fixed.dist(s, a) == pomdp.dist(s, a)
