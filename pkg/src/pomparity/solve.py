"""Decision procedures for finite-memory almost-sure and positive winning.

The pipelines answer whether a finite-memory strategy can win a parity
objective almost-surely or with positive probability, and on yes extract a
witness strategy that is independently re-verified on the input model via
the chain module before the answer is returned.

The workhorses are observation-set fixpoints on belief-observation POMDPs
(where the belief always equals the observation class, so memoryless
strategies suffice):

* ``almost_safe``  -- greatest fixpoint  Y* = nu Y.(ObsCover(F) & Pre(Y));
* ``almost_buchi`` -- nested fixpoint
  Z* = nu Z. ObsCover(mu X.((T & inv(Z) & inv(Pre(Z))) | Apre(Z,X)));
* ``almost_reach`` -- Buchi after making the targets absorbing.

``solve_almost_cobuchi_fm`` rewrites a {1,2}-priority POMDP with the
belief-observation construction, restricts it to its almost-surely safe
part (the losing sink becomes unreachable), and asks for almost-sure
reachability of the states whose element certifies a won recurrence.
``solve_positive_buchi_fm`` reduces positive winning to almost-sure
winning from some reachable state: a strategy wins with positive
probability exactly when it can, after some finite prefix, win almost
surely from wherever that prefix ends.  ``solve_parity_fm`` routes any
parity objective through the reductions module into those two pipelines
and lifts the witness back (the reductions preserve strategies verbatim).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping

from .beliefobs import (
    BeliefObsPomdp,
    DEFAULT_STATE_BUDGET,
    almost_cobuchi_red,
    positive_buchi_red,
)
from .chain import build_product_chain, evaluate_qualitative
from .model import (
    ContractError,
    Objective,
    Pomdp,
    WinningMode,
    make_absorbing,
    objective_as_parity,
)
from .reductions import almost_parity_to_cobuchi, positive_parity_to_buchi
from .strategy import FiniteMemoryStrategy, uniform


# -- observation-set operators -------------------------------------------

def allow(o: str, obs_set: Iterable[str], pomdp: Pomdp) -> frozenset[str]:
    """Actions available at ``o`` whose every successor observation stays in the set."""
    obs_set = frozenset(obs_set)
    out = []
    for a in pomdp.available_at(o):
        ok = True
        for s in pomdp.states_with_obs(o):
            for t in pomdp.supp(s, a):
                if pomdp.obs_map[t] not in obs_set:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            out.append(a)
    return frozenset(out)


def pre(obs_set: Iterable[str], pomdp: Pomdp) -> frozenset[str]:
    """Observations of the set retaining at least one set-preserving action."""
    obs_set = frozenset(obs_set)
    return frozenset(o for o in obs_set if allow(o, obs_set, pomdp))


def apre(y_obs: Iterable[str], x_states: Iterable[str],
         pomdp: Pomdp) -> frozenset[str]:
    """States that can keep the observation in Y while hitting X with positive probability."""
    y_obs = frozenset(y_obs)
    x_states = frozenset(x_states)
    domain = {s for o in y_obs for s in pomdp.states_with_obs(o)}
    stray = x_states - domain
    if stray:
        raise ContractError(
            "apre requires X inside the observation classes of Y; outside: "
            + ", ".join(sorted(stray)))
    out = set()
    for o in y_obs:
        acts = allow(o, y_obs, pomdp)
        if not acts:
            continue
        for s in pomdp.states_with_obs(o):
            if any(x_states.intersection(pomdp.supp(s, a)) for a in acts):
                out.add(s)
    return frozenset(out)


def obs_cover(states: Iterable[str], pomdp: Pomdp) -> frozenset[str]:
    """Observations whose entire class lies inside the state set."""
    states = frozenset(states)
    return frozenset(o for o in pomdp.observations
                     if set(pomdp.states_with_obs(o)) <= states)


def _obs_strategy(pomdp: Pomdp, plays: Mapping[str, Iterable[str]],
                  initial_obs: str) -> FiniteMemoryStrategy:
    """Memoryless observation-based strategy as a finite-memory strategy.

    One memory per observation in the play table; the memory simply tracks
    the last observation.
    """
    order = pomdp.obs_index
    memories = tuple(sorted(plays, key=order.__getitem__))
    action_select = {o: uniform(sorted(plays[o])) for o in memories}
    memory_update = {}
    for o in memories:
        for a in sorted(plays[o]):
            succ_obs = {pomdp.obs_map[t] for s in pomdp.states_with_obs(o)
                        for t in pomdp.supp(s, a)}
            for o2 in succ_obs:
                if o2 in plays:
                    memory_update[(o, o2, a)] = {o2: Fraction(1)}
    return FiniteMemoryStrategy(
        memories=memories, action_select=action_select,
        memory_update=memory_update, initial_memory=initial_obs)


def _initial_in(pomdp: Pomdp, obs_set: frozenset[str]) -> str:
    o0 = pomdp.obs_map[pomdp.initial_state]
    if o0 in obs_set:
        return o0
    return min(obs_set, key=pomdp.obs_index.__getitem__)


def _safe_obs(pomdp: Pomdp, safe_states: Iterable[str],
              stats: dict | None = None) -> frozenset[str]:
    """Fixpoint core of ``almost_safe``: just the winning observation set."""
    y = obs_cover(safe_states, pomdp)
    rounds = 0
    while True:
        rounds += 1
        y2 = pre(y, pomdp)
        if y2 == y:
            break
        y = y2
    if stats is not None:
        stats["safety_iterations"] = stats.get("safety_iterations", 0) + rounds
    return y


def almost_safe(pomdp: Pomdp, safe_states: Iterable[str],
                stats: dict | None = None,
                ) -> tuple[frozenset[str], FiniteMemoryStrategy | None]:
    """Observations from which staying inside the state set wins surely.

    Greatest fixpoint: start from the observations fully covered by the
    set, repeatedly drop observations with no covering-preserving action.
    The companion strategy plays every preserving action uniformly.
    """
    y = _safe_obs(pomdp, safe_states, stats)
    if not y:
        return y, None
    plays = {o: allow(o, y, pomdp) for o in y}
    return y, _obs_strategy(pomdp, plays, _initial_in(pomdp, y))


def _buchi_obs(pomdp: Pomdp, targets: Iterable[str],
               stats: dict | None = None) -> frozenset[str]:
    """Fixpoint core of ``almost_buchi``: just the winning observation set."""
    targets = frozenset(targets)
    z = frozenset(pomdp.observations)
    outer = inner = 0
    while True:
        outer += 1
        pre_z = pre(z, pomdp)
        allowed = {o: allow(o, z, pomdp) for o in z}
        base = {s for s in targets
                if pomdp.obs_map[s] in z and pomdp.obs_map[s] in pre_z}
        # mu X: backward closure of the base through allowed actions
        rev: dict[str, list[str]] = {}
        for o in z:
            for s in pomdp.states_with_obs(o):
                for a in allowed[o]:
                    for t in pomdp.supp(s, a):
                        rev.setdefault(t, []).append(s)
        x = set(base)
        frontier = list(base)
        while frontier:
            inner += 1
            nxt = []
            for t in frontier:
                for s in rev.get(t, ()):
                    if s not in x:
                        x.add(s)
                        nxt.append(s)
            frontier = nxt
        z2 = frozenset(o for o in z if set(pomdp.states_with_obs(o)) <= x)
        if z2 == z:
            break
        z = z2
    if stats is not None:
        stats["buchi_outer_iterations"] = stats.get(
            "buchi_outer_iterations", 0) + outer
        stats["buchi_inner_steps"] = stats.get("buchi_inner_steps", 0) + inner
    return z


def almost_buchi(pomdp: Pomdp, targets: Iterable[str],
                 stats: dict | None = None,
                 ) -> tuple[frozenset[str], FiniteMemoryStrategy | None]:
    """Observations from which the targets are hit infinitely often surely.

    Nested fixpoint: the outer set Z shrinks to the observations whose
    classes are fully contained in the inner limit X, where X grows from
    the in-Z targets by positive-probability attraction (``apre``) that
    never risks leaving Z.  The companion strategy plays allow(o, Z*)
    uniformly; its recurrent classes all intersect the targets.
    """
    z = _buchi_obs(pomdp, targets, stats)
    if not z:
        return z, None
    plays = {o: allow(o, z, pomdp) for o in z}
    return z, _obs_strategy(pomdp, plays, _initial_in(pomdp, z))


def almost_reach(pomdp: Pomdp, targets: Iterable[str],
                 stats: dict | None = None,
                 ) -> tuple[frozenset[str], FiniteMemoryStrategy | None]:
    """Observations from which the targets are reached with probability one.

    Reaching is the Buchi question on the model with absorbing targets:
    once reached, staying counts as visiting forever.
    """
    targets = frozenset(targets)
    return almost_buchi(make_absorbing(pomdp, targets), targets, stats)


def _restrict_to(pomdp: Pomdp, obs_set: frozenset[str]) -> Pomdp:
    """The sub-POMDP on an observation set, actions cut to allow(o, set)."""
    keep_obs = tuple(o for o in pomdp.observations if o in obs_set)
    keep_states = tuple(s for s in pomdp.states
                        if pomdp.obs_map[s] in obs_set)
    available = {o: allow(o, obs_set, pomdp) for o in keep_obs}
    transitions = {}
    for s in keep_states:
        for a in available[pomdp.obs_map[s]]:
            transitions[(s, a)] = dict(pomdp.dist(s, a))
    return Pomdp(states=keep_states, actions=pomdp.actions,
                 observations=keep_obs,
                 obs_map={s: pomdp.obs_map[s] for s in keep_states},
                 transitions=transitions,
                 initial_state=pomdp.initial_state,
                 available=available)


# -- decisions -------------------------------------------------------------

@dataclass
class Decision:
    """Outcome of a solve pipeline.

    ``winning`` answers the decision problem; on yes, ``witness`` is a
    finite-memory strategy on the input model that has already passed
    independent chain verification.  ``diagnostics`` carries per-stage
    observation sets, construction sizes and fixpoint iteration counts.
    """

    winning: bool
    mode: WinningMode
    witness: FiniteMemoryStrategy | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "yes" if self.winning else "no"


def _merge_initial(strategy: FiniteMemoryStrategy,
                   first_moves: Iterable[str]) -> FiniteMemoryStrategy:
    """Collapse a randomized initial memory choice into one memory state.

    The auxiliary memory unions the action supports of the candidate
    initial memories and, per (observation, action), the union of their
    update supports.  Every recurrent class of the merged chain is one of
    some candidate's chain and vice versa, so verdicts are preserved.
    """
    first_moves = tuple(dict.fromkeys(first_moves))
    if len(first_moves) == 1:
        return replace(strategy, initial_memory=first_moves[0])
    name = "m_init"
    while name in strategy.memories:
        name += "_"
    action_select = dict(strategy.action_select)
    memory_update = dict(strategy.memory_update)
    acts: set[str] = set()
    for m in first_moves:
        acts.update(strategy.action_support(m))
    action_select[name] = uniform(sorted(acts))
    keys = {(o, a) for (m, o, a) in strategy.memory_update
            if m in first_moves}
    for (o, a) in sorted(keys):
        union: set[str] = set()
        for m in first_moves:
            if a in strategy.action_support(m):
                union.update(strategy.memory_support(m, o, a))
        if union:
            memory_update[(name, o, a)] = uniform(sorted(union))
    return FiniteMemoryStrategy(
        memories=strategy.memories + (name,),
        action_select=action_select, memory_update=memory_update,
        initial_memory=name, elements=dict(strategy.elements))


def _witness_from_plays(pomdp: Pomdp, bo: BeliefObsPomdp,
                        plays: Mapping[str, Iterable[str]],
                        first_moves: Iterable[str]) -> FiniteMemoryStrategy:
    """Back-translate an observation play table on the rewrite into a strategy.

    Memories are the element observations in the table's domain; the
    action choice replays the table, and the memory update at (element,
    model observation, action) replays the table at the corresponding
    intermediate observation.  The initial randomization over element
    moves is merged into a single auxiliary memory.
    """
    element_memories = tuple(e for e in bo.elements if e in plays)
    action_select = {}
    memory_update = {}
    for e in element_memories:
        action_select[e] = uniform(sorted(plays[e]))
        for a in sorted(plays[e]):
            for o in pomdp.observations:
                q = bo.memsel.get((e, a, o))
                if q is None or q not in plays:
                    continue
                nxt = sorted(m for m in plays[q] if m in bo.elements)
                if nxt:
                    memory_update[(e, o, a)] = uniform(nxt)
    strategy = FiniteMemoryStrategy(
        memories=element_memories, action_select=action_select,
        memory_update=memory_update, initial_memory=element_memories[0],
        elements={e: bo.elements[e] for e in element_memories})
    return _merge_initial(strategy, first_moves)


def _verify(pomdp: Pomdp, objective: Objective, mode: WinningMode,
            witness: FiniteMemoryStrategy) -> None:
    chain = build_product_chain(pomdp, witness)
    if not evaluate_qualitative(chain, objective, mode):
        raise ContractError(
            "internal error: extracted witness failed independent "
            "chain verification; refusing to answer yes")


def solve_almost_cobuchi_fm(pomdp: Pomdp, priority: Mapping[str, int],
                            root: str | None = None,
                            budget: int = DEFAULT_STATE_BUDGET) -> Decision:
    """Decide finite-memory almost-sure winning for co-Buchi priorities {1,2}.

    Pipeline: belief-observation rewrite; almost-sure safety restriction
    (the losing sink must be avoidable surely); almost-sure reachability
    of the certified-recurrence states.  On yes the witness is rebuilt on
    the input model and chain-verified before returning.
    """
    stats: dict = {}
    bo = almost_cobuchi_red(pomdp, priority, root=root, budget=budget)
    stats["states_constructed"] = len(bo.pomdp.states)
    mode = WinningMode.ALMOST_SURE
    safe_set = frozenset(bo.pomdp.states) - {bo.sink_state}
    y_safe = _safe_obs(bo.pomdp, safe_set, stats)
    stats["safe_observations"] = y_safe
    if bo.init_obs not in y_safe:
        stats["failed_stage"] = "safety"
        return Decision(False, mode, diagnostics=stats)
    restricted = _restrict_to(bo.pomdp, y_safe)
    wpr = bo.certified_recurrent() & set(restricted.states)
    reach_absorbed = make_absorbing(restricted, wpr)
    w2 = _buchi_obs(reach_absorbed, wpr, stats)
    stats["winning_observations"] = w2
    if bo.init_obs not in w2:
        stats["failed_stage"] = "reachability"
        return Decision(False, mode, diagnostics=stats)

    plays: dict[str, frozenset[str]] = {}
    for o in y_safe:
        if o in (bo.init_obs, bo.sink_obs):
            continue
        if o in w2:
            plays[o] = allow(o, w2, reach_absorbed)
        else:
            plays[o] = restricted.available_at(o)
    first = sorted(m for m in allow(bo.init_obs, w2, reach_absorbed)
                   if m in bo.elements)
    witness = _witness_from_plays(pomdp, bo, plays, first)
    objective = Objective.parity(dict(priority))
    _verify(pomdp, objective, mode, witness)
    return Decision(True, mode, witness=witness, diagnostics=stats)


def _support_reachable(pomdp: Pomdp) -> tuple[str, ...]:
    """States reachable from the initial state under available actions."""
    seen = {pomdp.initial_state}
    frontier = [pomdp.initial_state]
    while frontier:
        s = frontier.pop()
        for a in pomdp.available_at(pomdp.obs_map[s]):
            for t in pomdp.supp(s, a):
                if t not in seen:
                    seen.add(t)
                    frontier.append(t)
    return tuple(s for s in pomdp.states if s in seen)


def _path_to(pomdp: Pomdp, target: str) -> tuple[tuple[str, str], ...]:
    """A (state, action) path witnessing support reachability of target."""
    parent: dict[str, tuple[str, str] | None] = {pomdp.initial_state: None}
    queue = [pomdp.initial_state]
    while queue:
        s = queue.pop(0)
        if s == target:
            break
        for a in sorted(pomdp.available_at(pomdp.obs_map[s]),
                        key=pomdp.action_index.__getitem__):
            for t in pomdp.supp(s, a):
                if t not in parent:
                    parent[t] = (s, a)
                    queue.append(t)
    steps: list[tuple[str, str]] = []
    cur = target
    while parent[cur] is not None:
        s, a = parent[cur]          # type: ignore[misc]
        steps.append((s, a))
        cur = s
    steps.reverse()
    return tuple(steps)


def _prefix_then(pomdp: Pomdp, steps: tuple[tuple[str, str], ...],
                 strategy: FiniteMemoryStrategy) -> FiniteMemoryStrategy:
    """Play a fixed action sequence, then hand over to a strategy.

    The prefix memories count steps; each plays its action surely and
    advances on any observation.  Handing over means the last prefix
    update targets the strategy's initial memory.
    """
    if not steps:
        return strategy
    taken = set(strategy.memories)
    names = []
    for i in range(len(steps)):
        name = f"p{i}"
        while name in taken:
            name += "_"
        taken.add(name)
        names.append(name)
    action_select = dict(strategy.action_select)
    memory_update = dict(strategy.memory_update)
    for i, (_, a) in enumerate(steps):
        action_select[names[i]] = {a: Fraction(1)}
        nxt = names[i + 1] if i + 1 < len(steps) else strategy.initial_memory
        for o in pomdp.observations:
            memory_update[(names[i], o, a)] = {nxt: Fraction(1)}
    return FiniteMemoryStrategy(
        memories=tuple(names) + strategy.memories,
        action_select=action_select, memory_update=memory_update,
        initial_memory=names[0], elements=dict(strategy.elements))


def solve_positive_buchi_fm(pomdp: Pomdp, priority: Mapping[str, int],
                            budget: int = DEFAULT_STATE_BUDGET) -> Decision:
    """Decide finite-memory positive winning for Buchi priorities {0,1}.

    A strategy wins with positive probability exactly when some state
    reachable through transition supports admits an almost-sure win from
    there (knowing the state): sufficiency follows by playing any
    positive-probability path first, necessity by restarting a positive
    winner inside one of its winning recurrent classes.  Each candidate
    root is checked with the belief-observation rewrite and the
    almost-sure Buchi fixpoint.
    """
    stats: dict = {"states_constructed": 0, "roots_tried": 0}
    mode = WinningMode.POSITIVE
    objective = Objective.parity(dict(priority))
    for t in _support_reachable(pomdp):
        stats["roots_tried"] += 1
        bo = positive_buchi_red(pomdp, priority, root=t, budget=budget)
        stats["states_constructed"] += len(bo.pomdp.states)
        targets = frozenset(s for s in bo.pomdp.states
                            if bo.priority[s] == 0)
        z = _buchi_obs(bo.pomdp, targets, stats)
        if bo.init_obs not in z:
            continue
        stats["winning_root"] = t
        stats["winning_observations"] = z
        plays = {o: allow(o, z, bo.pomdp) for o in z
                 if o not in (bo.init_obs, bo.sink_obs)}
        first = sorted(m for m in allow(bo.init_obs, z, bo.pomdp)
                       if m in bo.elements)
        tail = _witness_from_plays(pomdp, bo, plays, first)
        witness = _prefix_then(pomdp, _path_to(pomdp, t), tail)
        _verify(pomdp, objective, mode, witness)
        return Decision(True, mode, witness=witness, diagnostics=stats)
    stats["failed_stage"] = "no almost-sure root"
    return Decision(False, mode, diagnostics=stats)


def solve_parity_fm(pomdp: Pomdp, objective: Objective,
                    mode: WinningMode,
                    budget: int = DEFAULT_STATE_BUDGET) -> Decision:
    """Decide finite-memory winning for any parity-expressible objective.

    Reach/safe/Buchi/co-Buchi objectives are first expressed as parity
    (rewriting targets absorbing where that is sound).  Priorities
    already in co-Buchi shape {1,2} (almost-sure) or Buchi shape {0,1}
    (positive) run their pipeline directly.  Other almost-sure parity
    runs through the co-Buchi rewrite chain, positive parity through
    the Buchi rewrite; both preserve strategies verbatim, so the
    witness found on the reduced model is replayed (and re-verified) on
    the input model, dropping only bookkeeping for observations the input
    model does not have.
    """
    if mode not in (WinningMode.ALMOST_SURE, WinningMode.POSITIVE):
        raise ContractError(f"unsupported winning mode {mode!r}")
    base, parity = objective_as_parity(pomdp, objective)
    values = set(parity.priority_map.values())
    if mode is WinningMode.ALMOST_SURE and values <= {1, 2}:
        return solve_almost_cobuchi_fm(base, parity.priority_map,
                                       budget=budget)
    if mode is WinningMode.POSITIVE and values <= {0, 1}:
        return solve_positive_buchi_fm(base, parity.priority_map,
                                       budget=budget)
    if mode is WinningMode.ALMOST_SURE:
        red = almost_parity_to_cobuchi(base, parity)
        prio = {s: (2 if s in red.objective.targets else 1)
                for s in red.pomdp.states}
        inner = solve_almost_cobuchi_fm(red.pomdp, prio, budget=budget)
    else:
        red = positive_parity_to_buchi(base, parity)
        prio = {s: (0 if s in red.objective.targets else 1)
                for s in red.pomdp.states}
        inner = solve_positive_buchi_fm(red.pomdp, prio, budget=budget)
    diagnostics = dict(inner.diagnostics)
    diagnostics["reduced_states"] = len(red.pomdp.states)
    if not inner.winning:
        return Decision(False, mode, diagnostics=diagnostics)
    witness = _lift_through(inner.witness, base)
    _verify(base, parity, mode, witness)
    return Decision(True, mode, witness=witness, diagnostics=diagnostics)


def _lift_through(strategy: FiniteMemoryStrategy,
                  pomdp: Pomdp) -> FiniteMemoryStrategy:
    """Replay a strategy from a reduced model on the model it reduces.

    Observations are preserved by the reductions, so only update entries
    for observations the target model lacks are dropped (they concern
    auxiliary states that do not exist there).  Element annotations
    describe the reduced state space and are dropped with them.
    """
    keep = set(pomdp.observations)
    memory_update = {k: dict(v) for k, v in strategy.memory_update.items()
                     if k[1] in keep}
    return FiniteMemoryStrategy(
        memories=strategy.memories,
        action_select={m: dict(d) for m, d in strategy.action_select.items()},
        memory_update=memory_update,
        initial_memory=strategy.initial_memory)
