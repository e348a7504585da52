"""Product Markov chains of a POMDP under a finite-memory strategy.

Fixing a finite-memory strategy sigma = (sigma_n, sigma_u, M, m0) in a POMDP
induces a finite Markov chain on S x M: first an action is sampled from
sigma_n(m), then a successor state from delta(s, a), then the new memory
from sigma_u(m, obs(s'), a).  Qualitative questions about the strategy
reduce to graph questions about this chain:

* a parity/Muller objective holds almost-surely iff every bottom SCC
  (recurrent class) reachable from (s0, m0) satisfies it, and with positive
  probability iff some reachable bottom SCC does;
* the recurrence summaries SetRec/BoolRec tabulate, for every pair (s, m)
  of the *full* product graph, the colour sets of the recurrent classes
  reachable from (s, m) and whether (s, m) itself is recurrent.

Everything here reads supports only; weights never matter for these
questions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .model import (MULLER, PARITY, ContractError, Objective, Pomdp,
                    StructuralError, WinningMode)

Node = tuple[str, str]  # (state, memory)


def validate_strategy(pomdp: Pomdp, strategy) -> list[str]:
    """Report references in a strategy that do not exist in the model.

    Works for any strategy object exposing ``memories``, ``initial_memory``,
    ``action_select`` (memory -> weighted or plain action collection) and
    ``memory_update`` ((memory, observation, action) -> weighted or plain
    memory collection).
    """
    problems: list[str] = []
    memories = set(strategy.memories)
    actions = set(pomdp.actions)
    observations = set(pomdp.observations)
    if len(memories) != len(tuple(strategy.memories)):
        problems.append("duplicate memory names")
    if strategy.initial_memory not in memories:
        problems.append(f"initial memory {strategy.initial_memory!r} is not declared")
    for m, acts in strategy.action_select.items():
        if m not in memories:
            problems.append(f"action selection for unknown memory {m!r}")
        for a in sorted(acts):
            if a not in actions:
                problems.append(f"memory {m!r} selects unknown action {a!r}")
    for (m, o, a), succs in strategy.memory_update.items():
        if m not in memories:
            problems.append(f"memory update for unknown memory {m!r}")
        if o not in observations:
            problems.append(f"memory update of {m!r} on unknown observation {o!r}")
        if a not in actions:
            problems.append(f"memory update of {m!r} on unknown action {a!r}")
        for m2 in sorted(succs):
            if m2 not in memories:
                problems.append(f"memory update of {m!r} targets unknown memory {m2!r}")
    return problems


def _product_successors(pomdp: Pomdp, strategy, node: Node,
                        state_index: Mapping[str, int],
                        memory_index: Mapping[str, int]) -> tuple[Node, ...]:
    """One-step successors of (state, memory), deduplicated and ordered.

    Actions the strategy selects but that are unavailable at the current
    observation contribute no edges (they cannot be played there; this only
    matters for junk pairs of the full product graph).
    """
    s, m = node
    available = pomdp.available_at(pomdp.obs_map[s])
    out: set[Node] = set()
    for a in strategy.action_support(m):
        if a not in available:
            continue
        for s2 in pomdp.supp(s, a):
            for m2 in strategy.memory_support(m, pomdp.obs_map[s2], a):
                out.add((s2, m2))
    return tuple(sorted(out, key=lambda n: (state_index[n[0]], memory_index[n[1]])))


@dataclass
class ProductChain:
    """Support digraph of the product chain, restricted to the reachable part.

    ``nodes`` lists every (state, memory) pair reachable from the initial
    pair, sorted by (state index, memory index); ``succ`` maps each node to
    its deduplicated, equally-sorted successor tuple.
    """

    pomdp: Pomdp
    memories: tuple[str, ...]
    initial: Node
    nodes: tuple[Node, ...]
    succ: dict[Node, tuple[Node, ...]]

    @property
    def memory_index(self) -> dict[str, int]:
        return {m: i for i, m in enumerate(self.memories)}

    def bottom_sccs(self) -> tuple[tuple[Node, ...], ...]:
        """Recurrent classes: bottom SCCs of the reachable support digraph.

        Deterministic order: classes sorted by their least node in
        (state index, memory index) order, members likewise sorted.
        """
        if not hasattr(self, "_bottom"):
            self._bottom = _bottom_sccs(self.nodes, self.succ,
                                        self.pomdp.state_index,
                                        self.memory_index)
        return self._bottom

    def rec_of(self, node: Node) -> tuple[int, ...]:
        """Indices (into bottom_sccs()) of the classes reachable from node."""
        if not hasattr(self, "_rec_of"):
            self._rec_of = _reachable_bottoms(self.nodes, self.succ,
                                              self.bottom_sccs())
        return self._rec_of[node]


def build_product_chain(pomdp: Pomdp, strategy) -> ProductChain:
    """Build the part of the product chain reachable from (s0, m0)."""
    problems = validate_strategy(pomdp, strategy)
    if problems:
        raise StructuralError("; ".join(problems))
    state_index = pomdp.state_index
    memories = tuple(strategy.memories)
    memory_index = {m: i for i, m in enumerate(memories)}
    initial: Node = (pomdp.initial_state, strategy.initial_memory)
    succ: dict[Node, tuple[Node, ...]] = {}
    frontier = [initial]
    seen = {initial}
    while frontier:
        node = frontier.pop()
        nxt = _product_successors(pomdp, strategy, node, state_index, memory_index)
        succ[node] = nxt
        for n in nxt:
            if n not in seen:
                seen.add(n)
                frontier.append(n)
    nodes = tuple(sorted(seen, key=lambda n: (state_index[n[0]], memory_index[n[1]])))
    return ProductChain(pomdp=pomdp, memories=memories, initial=initial,
                        nodes=nodes, succ=succ)


def full_product_graph(pomdp: Pomdp, strategy) -> dict[Node, tuple[Node, ...]]:
    """Successor map over all of S x M, not just the reachable part."""
    state_index = pomdp.state_index
    memory_index = {m: i for i, m in enumerate(strategy.memories)}
    succ: dict[Node, tuple[Node, ...]] = {}
    for s in pomdp.states:
        for m in strategy.memories:
            node = (s, m)
            succ[node] = _product_successors(pomdp, strategy, node,
                                             state_index, memory_index)
    return succ


# -- strongly connected components (iterative Tarjan) --

def _sccs(nodes: Iterable[Node], succ: Mapping[Node, tuple[Node, ...]]) -> list[list[Node]]:
    index: dict[Node, int] = {}
    low: dict[Node, int] = {}
    on_stack: set[Node] = set()
    stack: list[Node] = []
    out: list[list[Node]] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work: list[tuple[Node, int]] = [(root, 0)]
        while work:
            node, child_i = work.pop()
            if child_i == 0:
                index[node] = low[node] = counter
                counter += 1
                stack.append(node)
                on_stack.add(node)
            children = succ.get(node, ())
            advanced = False
            for i in range(child_i, len(children)):
                child = children[i]
                if child not in index:
                    work.append((node, i + 1))
                    work.append((child, 0))
                    advanced = True
                    break
                if child in on_stack:
                    low[node] = min(low[node], index[child])
            if advanced:
                continue
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                out.append(comp)
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
        # root finished
    return out


def _bottom_sccs(nodes, succ, state_index, memory_index) -> tuple[tuple[Node, ...], ...]:
    key = lambda n: (state_index[n[0]], memory_index[n[1]])
    bottoms = []
    for comp in _sccs(nodes, succ):
        members = set(comp)
        is_bottom = all(t in members for n in comp for t in succ.get(n, ()))
        if is_bottom:
            bottoms.append(tuple(sorted(comp, key=key)))
    bottoms.sort(key=lambda comp: key(comp[0]))
    return tuple(bottoms)


def _reachable_bottoms(nodes, succ, bottoms) -> dict[Node, tuple[int, ...]]:
    """For every node, the sorted indices of bottom SCCs reachable from it."""
    comp_of: dict[Node, int] = {}
    comps = _sccs(nodes, succ)
    for ci, comp in enumerate(comps):
        for n in comp:
            comp_of[n] = ci
    bottom_id: dict[Node, int] = {}
    for bi, comp in enumerate(bottoms):
        for n in comp:
            bottom_id[n] = bi
    # Tarjan emits components in reverse topological order: successors first.
    reach: list[set[int]] = [set() for _ in comps]
    for ci, comp in enumerate(comps):
        got: set[int] = set()
        rep = comp[0]
        if rep in bottom_id:
            got.add(bottom_id[rep])
        for n in comp:
            for t in succ.get(n, ()):
                if comp_of[t] != ci:
                    got |= reach[comp_of[t]]
        reach[ci] = got
    return {n: tuple(sorted(reach[comp_of[n]])) for n in nodes}


# -- qualitative evaluation --

def objective_colors(objective: Objective) -> dict[str, int]:
    """The colour map a chain evaluation reads: priorities or Muller colours."""
    if objective.kind == PARITY:
        return dict(objective.priority_map)
    if objective.kind == MULLER:
        return dict(objective.color_map)
    raise ContractError(
        f"chain evaluation needs a parity or Muller objective, got {objective.kind}")


def _class_good(comp: tuple[Node, ...], objective: Objective,
                colors: Mapping[str, int]) -> bool:
    seen = {colors[s] for s, _ in comp}
    if objective.kind == PARITY:
        return min(seen) % 2 == 0
    return frozenset(seen) in objective.family


def evaluate_qualitative(chain: ProductChain, objective: Objective,
                         mode: WinningMode) -> bool:
    """Does the chained strategy win the objective in the given mode?

    Almost-sure: every reachable recurrent class satisfies the objective
    (its minimal priority is even / its colour set is accepting).
    Positive: at least one does.
    """
    colors = objective_colors(objective)
    missing = sorted({s for s, _ in chain.nodes} - set(colors))
    if missing:
        raise StructuralError(
            f"objective assigns nothing to states: {', '.join(missing)}")
    bottoms = chain.bottom_sccs()
    if mode == WinningMode.ALMOST_SURE:
        return all(_class_good(c, objective, colors) for c in bottoms)
    return any(_class_good(c, objective, colors) for c in bottoms)


# -- recurrence summaries --

@dataclass
class RecFunctions:
    """SetRec / BoolRec tables over the full product graph.

    ``set_rec[m][s]`` is the set of colour sets of recurrent classes
    reachable from (s, m); ``bool_rec[m][s]`` is 1 iff (s, m) itself lies in
    a recurrent class.  BoolRec = 1 forces SetRec to be the singleton of the
    colour set of the class containing (s, m).
    """

    set_rec: dict[str, dict[str, frozenset[frozenset[int]]]]
    bool_rec: dict[str, dict[str, int]]


def compute_rec_functions(pomdp: Pomdp, strategy,
                          colors: Mapping[str, int]) -> RecFunctions:
    """Tabulate SetRec and BoolRec for every pair (s, m) of S x M."""
    problems = validate_strategy(pomdp, strategy)
    if problems:
        raise StructuralError("; ".join(problems))
    missing = sorted(set(pomdp.states) - set(colors))
    if missing:
        raise StructuralError(f"no colour for states: {', '.join(missing)}")
    succ = full_product_graph(pomdp, strategy)
    nodes = tuple(succ)
    comps = _sccs(nodes, succ)
    comp_of: dict[Node, int] = {}
    for ci, comp in enumerate(comps):
        for n in comp:
            comp_of[n] = ci
    is_bottom: list[bool] = []
    comp_colors: list[frozenset[int]] = []
    for ci, comp in enumerate(comps):
        members = set(comp)
        is_bottom.append(all(t in members for n in comp for t in succ.get(n, ())))
        comp_colors.append(frozenset(colors[s] for s, _ in comp))
    # components arrive successors-first, so one pass suffices
    reach: list[frozenset[frozenset[int]]] = []
    for ci, comp in enumerate(comps):
        got: set[frozenset[int]] = set()
        if is_bottom[ci]:
            got.add(comp_colors[ci])
        for n in comp:
            for t in succ.get(n, ()):
                tc = comp_of[t]
                if tc != ci:
                    got |= reach[tc]
        reach.append(frozenset(got))
    set_rec: dict[str, dict[str, frozenset[frozenset[int]]]] = {}
    bool_rec: dict[str, dict[str, int]] = {}
    for m in strategy.memories:
        set_rec[m] = {}
        bool_rec[m] = {}
        for s in pomdp.states:
            ci = comp_of[(s, m)]
            set_rec[m][s] = reach[ci]
            bool_rec[m][s] = 1 if is_bottom[ci] else 0
    return RecFunctions(set_rec=set_rec, bool_rec=bool_rec)


def dump_chain(chain: ProductChain) -> str:
    """Plain-text dump of the chain: edges then bottom SCCs, stable order."""
    lines = [f"initial: ({chain.initial[0]}, {chain.initial[1]})",
             f"nodes: {len(chain.nodes)}"]
    for node in chain.nodes:
        targets = " ".join(f"({s}, {m})" for s, m in chain.succ[node])
        lines.append(f"({node[0]}, {node[1]}) -> {targets}")
    for i, comp in enumerate(chain.bottom_sccs()):
        members = " ".join(f"({s}, {m})" for s, m in comp)
        lines.append(f"bottom scc {i}: {members}")
    return "\n".join(lines) + "\n"
