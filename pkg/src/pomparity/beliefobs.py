"""Belief-observation rewriting of two-priority POMDPs.

A finite-memory strategy, projected onto its recurrence summaries, walks a
graph of memory elements: (belief, committed set, class-set table) triples
(``strategy.MemoryElement``).  This module materializes the POMDP whose
states pair an unobserved model state with such an element, whose
observations reveal exactly the element, and whose extra actions pick the
next element.  On the result the belief always equals the observation
class (``is_belief_observation``), so memoryless strategies suffice and
the observation-set fixpoints of the solve module decide it.

Two variants share the skeleton:

* ``almost_cobuchi_red`` for priorities {1,2} — almost-sure co-Buchi
  analysis; initial elements certify that only all-priority-2 recurrences
  are reachable, and "winning pseudo-recurrent" states (committed, class
  table {{2}}, priority 2) are the reachability targets downstream.
* ``positive_buchi_red`` for priorities {0,1} — the Buchi analyses; the
  downstream target is simply the priority-0 states.

Element moves are generated, not enumerated from the astronomically large
full alphabet.  In co-Buchi mode, out-of-belief components are completed
canonically (the committed bit exactly on states a committed belief state
can reach; the class table as the intersection cap inherited from all
predecessors), and on-belief states choose between an "explore" move
(uncommitted, maximal cap) and a "commit" move (committed with class set
{{2}}).  Every generated move passes the verbatim
``memory_action_allowed`` predicate, and every summary a real strategy
could carry is dominated by a generated one, so the reachable winning
structure is preserved.  Where no move at all is generatable the play is
routed to the losing sink by a dedicated reject action, mirroring how
disallowed moves behave.  In Buchi mode the downstream analyses target
raw priority-0 states and never read certificates, and a committed
element's continuations are always mirrored by its uncommitted
counterpart, so elements carry no commitments at all: the construction
is the plain belief-support automaton under maximal class tables, one
successor element per branch.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .model import (
    ContractError,
    Objective,
    Pomdp,
    ResourceLimitError,
    StructuralError,
    belief_update,
)
from .strategy import MemoryElement, uniform

COBUCHI_MODE = "cobuchi"
BUCHI_MODE = "buchi"

_PRIORITY_SETS = {COBUCHI_MODE: (1, 2), BUCHI_MODE: (0, 1)}

DEFAULT_STATE_BUDGET = 10 ** 6


def _all_subsets(values: tuple[int, ...]) -> frozenset[frozenset[int]]:
    out = [frozenset()]
    for v in values:
        out += [zs | {v} for zs in out]
    return frozenset(out)


_TOP = {mode: _all_subsets(prios) for mode, prios in _PRIORITY_SETS.items()}
_GOOD2 = frozenset({frozenset({2})})


def _priority_table(pomdp: Pomdp, priority: Mapping[str, int],
                    allowed: tuple[int, ...]) -> dict[str, int]:
    table = dict(priority)
    missing = [s for s in pomdp.states if s not in table]
    if missing:
        raise ContractError(
            "priority map misses states: " + ", ".join(missing))
    bad = sorted(s for s in pomdp.states if table[s] not in allowed)
    if bad:
        raise ContractError(
            f"priorities must lie in {set(allowed)}; offending states: "
            + ", ".join(bad))
    return table


def action_allowed(element: MemoryElement, action: str, pomdp: Pomdp,
                   priority: Mapping[str, int]) -> bool:
    """May ``action`` be played without breaking a certified recurrence?

    A belief state that is committed with a definite class set containing
    its own priority claims the play is inside a recurrent class with
    exactly those priorities; the action is allowed only if every
    successor of such a state keeps its priority inside the claimed set.
    """
    for s in element.belief:
        if s not in element.brec:
            continue
        zs = element.srec_of(s)
        if len(zs) != 1:
            continue
        (zinf,) = zs
        if priority[s] not in zinf:
            continue
        for t in pomdp.supp(s, action):
            if priority[t] not in zinf:
                return False
    return True


def memory_action_allowed(candidate: MemoryElement,
                          context: tuple[Iterable[str], MemoryElement, str],
                          pomdp: Pomdp) -> bool:
    """May the play adopt ``candidate`` after ``action`` from ``previous``?

    ``context`` is the (new belief, previous element, action) triple that
    identifies a memory-selection observation.  Two conditions: committed
    belief states only reach committed states (commitment is permanent),
    and along every model edge the class table may only shrink.
    """
    new_belief, previous, action = context
    if candidate.belief != frozenset(new_belief):
        return False
    for s in previous.belief & previous.brec:
        for t in pomdp.supp(s, action):
            if t not in candidate.brec:
                return False
    for s in pomdp.states:
        if action not in pomdp.available_at(pomdp.obs_map[s]):
            continue
        ls = previous.srec_of(s)
        for t in pomdp.supp(s, action):
            if not candidate.srec_of(t) <= ls:
                return False
    return True


def _initial_elements(pomdp: Pomdp, priority: Mapping[str, int], mode: str,
                      root: str) -> tuple[MemoryElement, ...]:
    """Element moves available before the first action, knowing the root.

    Co-Buchi elements must certify that only {2}-recurrences are reachable
    from the root; commitment is offered when the root's own priority fits.
    Buchi mode starts from the single maximal-table element.
    """
    top = _TOP[mode]
    base = {t: top for t in pomdp.states}
    out: list[MemoryElement] = []
    if mode == COBUCHI_MODE:
        base[root] = _GOOD2
        out.append(MemoryElement.make({root}, (), base))
        if priority[root] == 2:
            out.append(MemoryElement.make({root}, {root}, base))
    else:
        out.append(MemoryElement.make({root}, (), base))
    return tuple(out)


def _successor_elements(pomdp: Pomdp, priority: Mapping[str, int], mode: str,
                        element: MemoryElement, action: str, obs: str,
                        limit: int | None = None) -> tuple[MemoryElement, ...]:
    """All generated element moves for one (element, action, observation).

    Buchi mode yields the single belief-support successor under maximal
    tables.  In co-Buchi mode, out-of-belief components are canonical
    (forced commitments, cap tables); each new belief state contributes
    an explore and/or commit option, and the options multiply out.  The
    empty tuple means the branch is dead: no element move is compatible
    with the commitments already made.  ``limit`` bounds the number of
    moves one branch may multiply out to.
    """
    top = _TOP[mode]
    new_belief = belief_update(pomdp, element.belief, action, obs)
    if not new_belief:
        return ()
    if mode == BUCHI_MODE:
        return (MemoryElement.make(
            new_belief, (), {t: top for t in pomdp.states}),)

    caps: dict[str, frozenset[frozenset[int]]] = {}
    forced: set[str] = set()
    for s in pomdp.states:
        if action not in pomdp.available_at(pomdp.obs_map[s]):
            continue
        ls = element.srec_of(s)
        committed = s in element.brec and s in element.belief
        for t in pomdp.supp(s, action):
            caps[t] = caps.get(t, top) & ls
            if committed:
                forced.add(t)

    base_srec = {t: caps.get(t, top) for t in pomdp.states
                 if t not in new_belief}
    base_brec = forced - new_belief

    per_state: list[tuple[str, list[tuple[bool, frozenset]]]] = []
    combinations = 1
    for t in sorted(new_belief, key=pomdp.state_index.__getitem__):
        cap = caps[t]
        options: list[tuple[bool, frozenset]] = []
        if t not in forced:
            options.append((False, cap))
        if priority[t] == 2 and frozenset({2}) in cap:
            options.append((True, _GOOD2))
        if not options:
            return ()
        per_state.append((t, options))
        combinations *= len(options)
    if limit is not None and combinations > limit:
        raise ResourceLimitError(
            f"one memory-selection branch multiplies out to {combinations} "
            f"element moves, past the {limit}-state budget")

    out: list[MemoryElement] = []
    for combo in itertools.product(*(opts for _, opts in per_state)):
        brec = set(base_brec)
        srec = dict(base_srec)
        for (t, _), (committed, table) in zip(per_state, combo):
            if committed:
                brec.add(t)
            srec[t] = table
        out.append(MemoryElement.make(new_belief, brec, srec))
    return tuple(out)


@dataclass
class BeliefObsPomdp:
    """A materialized belief-observation POMDP plus its bookkeeping.

    ``pomdp`` is the playable model (uniform exact weights); observations
    named in ``elements`` correspond one-to-one to memory elements and
    double as the element-move action names.  ``memsel`` maps
    (element name, model action, model observation) to the intermediate
    observation where the next element is chosen, and ``moves`` lists the
    element names offered there (empty = routed to the sink by the reject
    action).  ``priority`` assigns every new state its two-priority value
    and ``objective`` packages it for the chain module.
    """

    mode: str
    pomdp: Pomdp
    objective: Objective
    priority: dict[str, int]
    root: str
    init_state: str
    sink_state: str
    init_obs: str
    sink_obs: str
    reject_action: str
    initial_moves: tuple[str, ...]
    elements: dict[str, MemoryElement]
    memsel: dict[tuple[str, str, str], str]
    moves: dict[str, tuple[str, ...]] = field(default_factory=dict)
    actionsel: dict[str, tuple[str, str]] = field(default_factory=dict)

    def element_observations(self) -> tuple[str, ...]:
        return tuple(self.elements)

    def certified_recurrent(self) -> frozenset[str]:
        """Action-selection states whose element certifies a won recurrence.

        Co-Buchi: committed, class table {{2}}, priority 2.  Buchi:
        committed with a definite class set containing 0 and the state's
        own priority.
        """
        out: set[str] = set()
        for name, (s, elem_name) in self.actionsel.items():
            elem = self.elements[elem_name]
            if s not in elem.brec:
                continue
            zs = elem.srec_map[s]
            if len(zs) != 1:
                continue
            (zinf,) = zs
            if self.priority[name] not in zinf:
                continue
            if self.mode == COBUCHI_MODE and zinf == frozenset({2}):
                out.add(name)
            elif self.mode == BUCHI_MODE and 0 in zinf:
                out.add(name)
        return frozenset(out)


def _materialize(pomdp: Pomdp, priority: Mapping[str, int], mode: str,
                 root: str | None, budget: int) -> BeliefObsPomdp:
    prio = _priority_table(pomdp, priority, _PRIORITY_SETS[mode])
    if root is None:
        root = pomdp.initial_state
    if root not in pomdp.state_index:
        raise StructuralError(f"unknown root state {root!r}")

    taken_actions = set(pomdp.actions)
    reject = "reject"
    while reject in taken_actions:
        reject += "_"
    taken_actions.add(reject)

    elem_name: dict[MemoryElement, str] = {}
    elements: dict[str, MemoryElement] = {}

    def name_of(elem: MemoryElement) -> str:
        got = elem_name.get(elem)
        if got is not None:
            return got
        name = f"m{len(elem_name)}"
        while name in taken_actions:
            name += "_"
        taken_actions.add(name)
        elem_name[elem] = name
        elements[name] = elem
        return name

    init_state, sink_state = "start", "dead"
    init_obs, sink_obs = "o_start", "o_dead"

    def act_state(s: str, ename: str) -> str:
        return f"A~{s}~{ename}"

    states: list[str] = [init_state, sink_state]
    observations: list[str] = [init_obs, sink_obs]
    obs_map: dict[str, str] = {init_state: init_obs, sink_state: sink_obs}
    transitions: dict[tuple[str, str], dict[str, Fraction]] = {}
    available: dict[str, frozenset[str]] = {}
    priority_out: dict[str, int] = {
        init_state: 2 if mode == COBUCHI_MODE else 1, sink_state: 1}
    actionsel: dict[str, tuple[str, str]] = {}
    memsel: dict[tuple[str, str, str], str] = {}
    moves: dict[str, tuple[str, ...]] = {}

    def guard_budget() -> None:
        if len(states) > budget:
            raise ResourceLimitError(
                f"belief-observation construction exceeded its {budget}-state "
                f"budget ({len(states)} states constructed)")

    def add_element(elem: MemoryElement) -> str:
        """Register an element and its action-selection states; queue it."""
        known = elem_name.get(elem)
        if known is not None:
            return known
        ename = name_of(elem)
        observations.append(ename)
        for s in sorted(elem.belief, key=pomdp.state_index.__getitem__):
            name = act_state(s, ename)
            states.append(name)
            obs_map[name] = ename
            priority_out[name] = prio[s]
            actionsel[name] = (s, ename)
        guard_budget()
        frontier.append(ename)
        return ename

    frontier: list[str] = []
    initial = _initial_elements(pomdp, prio, mode, root)
    initial_moves = tuple(add_element(e) for e in initial)
    available[init_obs] = frozenset(initial_moves)
    for ename in initial_moves:
        transitions[(init_state, ename)] = {act_state(root, ename): Fraction(1)}

    cursor = 0
    while cursor < len(frontier):
        ename = frontier[cursor]
        cursor += 1
        elem = elements[ename]
        model_obs = pomdp.obs_map[next(iter(elem.belief))]
        acts = sorted(pomdp.available_at(model_obs),
                      key=pomdp.action_index.__getitem__)
        available[ename] = frozenset(acts)
        for a in acts:
            if not action_allowed(elem, a, pomdp, prio):
                for s in elem.belief:
                    transitions[(act_state(s, ename), a)] = {
                        sink_state: Fraction(1)}
                continue
            reached = sorted(
                {t for s in elem.belief for t in pomdp.supp(s, a)},
                key=pomdp.state_index.__getitem__)
            branch_obs = sorted({pomdp.obs_map[t] for t in reached},
                                key=pomdp.obs_index.__getitem__)
            qname_of: dict[str, str] = {}
            for o in branch_obs:
                qname = f"q{len(memsel)}"
                memsel[(ename, a, o)] = qname
                qname_of[o] = qname
                observations.append(qname)
                succs = _successor_elements(pomdp, prio, mode, elem, a, o,
                                            limit=budget)
                move_names = tuple(add_element(e2) for e2 in succs)
                moves[qname] = move_names
                available[qname] = (frozenset(move_names) if move_names
                                    else frozenset({reject}))
                for t in reached:
                    if pomdp.obs_map[t] != o:
                        continue
                    mname = f"M~{t}~{qname}"
                    states.append(mname)
                    obs_map[mname] = qname
                    priority_out[mname] = prio[t]
                    if move_names:
                        for e2name in move_names:
                            transitions[(mname, e2name)] = {
                                act_state(t, e2name): Fraction(1)}
                    else:
                        transitions[(mname, reject)] = {
                            sink_state: Fraction(1)}
                guard_budget()
            for s in elem.belief:
                succ = pomdp.supp(s, a)
                transitions[(act_state(s, ename), a)] = uniform(
                    f"M~{t}~{qname_of[pomdp.obs_map[t]]}" for t in succ)

    all_actions = tuple(pomdp.actions) + (reject,) + tuple(elements)
    for a in all_actions:
        transitions[(sink_state, a)] = {sink_state: Fraction(1)}

    built = Pomdp(states=tuple(states), actions=all_actions,
                  observations=tuple(observations), obs_map=obs_map,
                  transitions=transitions, initial_state=init_state,
                  available=available)
    if mode == COBUCHI_MODE:
        objective = Objective.cobuchi(
            s for s in built.states if priority_out[s] == 2)
    else:
        objective = Objective.buchi(
            s for s in built.states if priority_out[s] == 0)
    return BeliefObsPomdp(
        mode=mode, pomdp=built, objective=objective, priority=priority_out,
        root=root, init_state=init_state, sink_state=sink_state,
        init_obs=init_obs, sink_obs=sink_obs, reject_action=reject,
        initial_moves=initial_moves, elements=elements, memsel=memsel,
        moves=moves, actionsel=actionsel)


def almost_cobuchi_red(pomdp: Pomdp, priority: Mapping[str, int],
                       root: str | None = None,
                       budget: int = DEFAULT_STATE_BUDGET) -> BeliefObsPomdp:
    """Belief-observation rewrite for almost-sure co-Buchi (priorities {1,2}).

    ``root`` defaults to the model's initial state; passing another state
    analyses the model as if started there with the controller knowing it.
    Construction is a forward closure from the initial element moves and
    aborts with a resource error beyond ``budget`` constructed states.
    """
    return _materialize(pomdp, priority, COBUCHI_MODE, root, budget)


def positive_buchi_red(pomdp: Pomdp, priority: Mapping[str, int],
                       root: str | None = None,
                       budget: int = DEFAULT_STATE_BUDGET) -> BeliefObsPomdp:
    """Belief-observation rewrite for the Buchi analyses (priorities {0,1}).

    Same skeleton as ``almost_cobuchi_red``, but elements are plain belief
    supports under maximal class tables: the Buchi analyses target raw
    priority-0 states and read no certificates.  Used re-rooted: positive
    Buchi winning holds iff some state reachable from the initial state
    admits an almost-sure win from there.
    """
    return _materialize(pomdp, priority, BUCHI_MODE, root, budget)


def is_belief_observation(pomdp: Pomdp, depth: int = 10 ** 6) -> bool:
    """Does the belief always equal the full observation class?

    Explores beliefs breadth-first from the initial state, memoizing, for
    up to ``depth`` layers; once the belief set saturates before the bound
    the answer is exact, otherwise it covers all plays of length ``depth``.
    """
    if depth < 1:
        raise ContractError("exploration depth must be at least 1")
    start = frozenset({pomdp.initial_state})
    if set(pomdp.states_with_obs(pomdp.obs_map[pomdp.initial_state])) != start:
        return False
    seen = {start}
    layer = [start]
    for _ in range(depth):
        if not layer:
            return True
        nxt: list[frozenset[str]] = []
        for belief in layer:
            here = pomdp.obs_map[next(iter(belief))]
            for a in sorted(pomdp.available_at(here)):
                union = {t for s in belief for t in pomdp.supp(s, a)}
                for o in sorted({pomdp.obs_map[t] for t in union}):
                    b2 = frozenset(t for t in union if pomdp.obs_map[t] == o)
                    if b2 in seen:
                        continue
                    if set(pomdp.states_with_obs(o)) != b2:
                        return False
                    seen.add(b2)
                    nxt.append(b2)
        layer = nxt
    return True
