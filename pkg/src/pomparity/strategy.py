"""Finite-memory strategies and the projection machinery.

A finite-memory strategy is a pair of stochastic maps: action selection
(memory -> actions) and memory update ((memory, new observation, action) ->
memories), plus an initial memory.  Memories may optionally be annotated
with a ``MemoryElement`` — a triple of a belief, a boolean-recurrence
vector and a set-recurrence vector — which is how strategies produced by
the projection and the solver carry their own explanation.

The projection collapses an arbitrary finite-memory strategy onto the
graph of triples (belief, BoolRec, SetRec): vertices whose recurrence
summaries agree are merged, and the projected strategy plays uniformly
over the union of the merged memories' moves.  The resulting strategy has
boundedly many memories (independent of the original memory count) and
reaches recurrent classes with exactly the same colour sets from the
initial situation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping

from .chain import compute_rec_functions
from .model import (MULLER, PARITY, ContractError, ExactnessError, Objective,
                    Pomdp, StructuralError)


def uniform(items: Iterable) -> dict:
    """Uniform distribution over a non-empty collection, as exact fractions."""
    items = tuple(items)
    if not items:
        raise ContractError("uniform distribution over an empty collection")
    w = Fraction(1, len(items))
    return {x: w for x in items}


@dataclass(frozen=True)
class MemoryElement:
    """A belief plus recurrence summaries, the currency of projection.

    ``belief`` is the set of states the play may currently be in;
    ``brec`` the set of states s whose pair (s, m) is recurrent under the
    originating strategy; ``srec`` maps every state to the colour sets of
    the recurrent classes reachable from (s, m).  ``srec`` is stored as a
    name-sorted tuple of pairs so elements hash and compare structurally.
    """

    belief: frozenset[str]
    brec: frozenset[str]
    srec: tuple[tuple[str, frozenset[frozenset[int]]], ...]

    @classmethod
    def make(cls, belief: Iterable[str], brec: Iterable[str],
             srec: Mapping[str, Iterable[Iterable[int]]]) -> "MemoryElement":
        canon = tuple(sorted(
            (s, frozenset(frozenset(z) for z in zs)) for s, zs in srec.items()))
        return cls(belief=frozenset(belief), brec=frozenset(brec), srec=canon)

    @cached_property
    def srec_map(self) -> dict[str, frozenset[frozenset[int]]]:
        return dict(self.srec)

    def srec_of(self, state: str) -> frozenset[frozenset[int]]:
        return self.srec_map[state]


def validate_element(pomdp: Pomdp, element: MemoryElement) -> list[str]:
    """Report memory-element invariant violations (empty list = fine)."""
    problems: list[str] = []
    states = set(pomdp.states)
    for s in sorted(element.belief - states):
        problems.append(f"belief contains unknown state {s!r}")
    for s in sorted(element.brec - states):
        problems.append(f"brec contains unknown state {s!r}")
    for s in sorted(set(element.srec_map) - states):
        problems.append(f"srec assigned to unknown state {s!r}")
    if not element.belief:
        problems.append("belief is empty")
    else:
        obs_here = {pomdp.obs_map[s] for s in element.belief if s in states}
        if len(obs_here) > 1:
            problems.append(
                f"belief mixes observations: {', '.join(sorted(obs_here))}")
    for s in pomdp.states:
        if s not in element.srec_map:
            problems.append(f"srec missing for state {s!r}")
    for s in sorted(element.belief & states):
        if not element.srec_map.get(s, frozenset()):
            problems.append(f"srec empty for belief state {s!r}")
    return problems


@dataclass
class FiniteMemoryStrategy:
    """A randomized finite-memory strategy with exact-rational weights.

    ``action_select[m]`` is a distribution over actions, and
    ``memory_update[(m, obs, action)]`` a distribution over next memories.
    Missing entries mean empty support — such branches contribute no
    behaviour (they can only concern situations the strategy never faces).
    ``elements`` optionally annotates memories with MemoryElements.
    """

    memories: tuple[str, ...]
    action_select: dict[str, dict[str, Fraction]]
    memory_update: dict[tuple[str, str, str], dict[str, Fraction]]
    initial_memory: str
    elements: dict[str, MemoryElement] = field(default_factory=dict)

    def __post_init__(self):
        self.memories = tuple(self.memories)
        self.action_select = {m: _coerce_dist(d) for m, d in self.action_select.items()}
        self.memory_update = {k: _coerce_dist(d) for k, d in self.memory_update.items()}

    def action_support(self, memory: str) -> tuple[str, ...]:
        dist = self.action_select.get(memory, {})
        return tuple(sorted(a for a, w in dist.items() if w > 0))

    def memory_support(self, memory: str, obs: str, action: str) -> tuple[str, ...]:
        dist = self.memory_update.get((memory, obs, action), {})
        return tuple(sorted(m for m, w in dist.items() if w > 0))


def _coerce_dist(dist: Mapping) -> dict:
    out = {}
    for key, w in dist.items():
        if isinstance(w, float):
            raise ExactnessError(
                f"float weight {w!r} in a strategy distribution; "
                f"use Fraction, int or a numeric string")
        out[key] = Fraction(w)
    return out


def stationary_strategy(pomdp: Pomdp, support: Iterable[str],
                        name: str = "m") -> FiniteMemoryStrategy:
    """Single-memory strategy playing uniformly over a fixed action set."""
    support = tuple(sorted(support))
    unknown = sorted(set(support) - set(pomdp.actions))
    if unknown:
        raise StructuralError(f"unknown actions: {', '.join(unknown)}")
    update = {}
    for o in pomdp.observations:
        for a in support:
            update[(name, o, a)] = {name: Fraction(1)}
    return FiniteMemoryStrategy(
        memories=(name,), action_select={name: uniform(support)},
        memory_update=update, initial_memory=name)


# -- projection graph --

@dataclass
class ProjectionGraph:
    """Graph over MemoryElements induced by a strategy's recurrence summaries.

    Vertices are the elements forward-reachable from the initial element
    ({s0}, BoolRec(m0), SetRec(m0)); ``edges[v][a]`` are the action-a
    successors.  A successor exists for every observation compatible with
    the belief's image (empty successor beliefs denote probability-zero
    observation branches and are omitted).
    """

    pomdp: Pomdp
    initial: MemoryElement
    vertices: tuple[MemoryElement, ...]
    edges: dict[MemoryElement, dict[str, tuple[MemoryElement, ...]]]


def element_sort_key(pomdp: Pomdp, element: MemoryElement):
    """Total, deterministic order on elements (belief, brec, srec encoding)."""
    sidx = pomdp.state_index
    belief = tuple(sorted(sidx[s] for s in element.belief))
    brec = tuple(sorted(sidx[s] for s in element.brec))
    srec = tuple((s, tuple(sorted(tuple(sorted(z)) for z in zs)))
                 for s, zs in element.srec)
    return (belief, brec, srec)


def build_projection_graph(pomdp: Pomdp, strategy,
                           colors: Mapping[str, int]) -> ProjectionGraph:
    """Build the projection graph of a strategy, lazily from the start vertex.

    Memories whose (BoolRec, SetRec) summaries coincide are merged: a
    vertex's outgoing edges are contributed by every matching memory.
    """
    rec = compute_rec_functions(pomdp, strategy, colors)
    keys: dict[str, tuple] = {}
    reps: dict[tuple, list[str]] = {}
    for m in strategy.memories:
        brec = frozenset(s for s in pomdp.states if rec.bool_rec[m][s])
        srec = tuple(sorted((s, rec.set_rec[m][s]) for s in pomdp.states))
        key = (brec, srec)
        keys[m] = key
        reps.setdefault(key, []).append(m)

    def vertex(belief: frozenset[str], key: tuple) -> MemoryElement:
        return MemoryElement(belief=belief, brec=key[0], srec=key[1])

    sort_key = lambda v: element_sort_key(pomdp, v)
    initial = vertex(frozenset({pomdp.initial_state}), keys[strategy.initial_memory])
    edges: dict[MemoryElement, dict[str, tuple[MemoryElement, ...]]] = {}
    seen = {initial}
    frontier = [initial]
    while frontier:
        v = frontier.pop()
        out: dict[str, set[MemoryElement]] = {}
        obs_here = pomdp.obs_map[next(iter(v.belief))]
        avail = pomdp.available_at(obs_here)
        for m in reps[(v.brec, v.srec)]:
            for a in strategy.action_support(m):
                if a not in avail:
                    continue
                image: set[str] = set()
                for s in v.belief:
                    image.update(pomdp.supp(s, a))
                by_obs: dict[str, set[str]] = {}
                for t in image:
                    by_obs.setdefault(pomdp.obs_map[t], set()).add(t)
                for o, succ_belief in by_obs.items():
                    for m2 in strategy.memory_support(m, o, a):
                        v2 = vertex(frozenset(succ_belief), keys[m2])
                        out.setdefault(a, set()).add(v2)
                        if v2 not in seen:
                            seen.add(v2)
                            frontier.append(v2)
        edges[v] = {a: tuple(sorted(vs, key=sort_key))
                    for a, vs in sorted(out.items())}
    vertices = tuple(sorted(seen, key=sort_key))
    return ProjectionGraph(pomdp=pomdp, initial=initial, vertices=vertices,
                           edges=edges)


def project_strategy(pomdp: Pomdp, strategy,
                     colors: Mapping[str, int]) -> FiniteMemoryStrategy:
    """Collapse a strategy onto its projection graph.

    The projected strategy's memories are the graph's vertices; it plays
    uniformly over the actions labelling outgoing edges, and updates
    uniformly over the successors whose belief matches the received
    observation.  Memories carry their MemoryElement annotations.
    """
    pg = build_projection_graph(pomdp, strategy, colors)
    names = {v: f"v{i}" for i, v in enumerate(pg.vertices)}
    action_select: dict[str, dict[str, Fraction]] = {}
    memory_update: dict[tuple[str, str, str], dict[str, Fraction]] = {}
    elements: dict[str, MemoryElement] = {}
    for v in pg.vertices:
        nm = names[v]
        elements[nm] = v
        per_action = pg.edges.get(v, {})
        acts = tuple(sorted(per_action))
        if acts:
            action_select[nm] = uniform(acts)
        for a in acts:
            by_obs: dict[str, list[str]] = {}
            for v2 in per_action[a]:
                o = pomdp.obs_map[next(iter(v2.belief))]
                by_obs.setdefault(o, []).append(names[v2])
            for o, targets in sorted(by_obs.items()):
                memory_update[(nm, o, a)] = uniform(targets)
    return FiniteMemoryStrategy(
        memories=tuple(names[v] for v in pg.vertices),
        action_select=action_select,
        memory_update=memory_update,
        initial_memory=names[pg.initial],
        elements=elements)


def memory_bound(pomdp: Pomdp, objective: Objective) -> int:
    """Sufficient memory size for finite-memory winning strategies.

    Muller with d colours: 2^(2|S|) * (2^(2^d))^|S| (the projection-graph
    vertex count).  Parity with d priorities: 2^(3 d |S|).  The two-priority
    special cases (reach/safe/Buchi/co-Buchi) use the parity figure with
    d = 2.  Exact big integers.
    """
    n = len(pomdp.states)
    if objective.kind == MULLER:
        d = len(set(objective.color_map.values()))
        return 2 ** (2 * n) * (2 ** (2 ** d)) ** n
    if objective.kind == PARITY:
        d = objective.max_priority + 1
    else:
        d = 2
    return 2 ** (3 * d * n)
