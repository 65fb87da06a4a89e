"""Plan execution and verification, exhaustive optimal search, and bounded
planning for instances with negative goals."""

from __future__ import annotations

import logging
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import combinations
from typing import Iterable, Optional

from .graph import CommGraph, complete_bipartite, connected_components, reachable_from
from .knowledge import (
    MODES,
    Change,
    DepthOverflowError,
    Fluent,
    KnowledgeState,
    OneWayCall,
    ParallelStep,
    Plan,
    SignedGoal,
    TwoWayCall,
    _apply_rows,
    _index,
    initial_state,
    is_self_evident,
)

log = logging.getLogger(__name__)


class PlanError(ValueError):
    """An illegal plan item; ``index`` is its 0-based position in the plan."""

    def __init__(self, index: int, message: str):
        super().__init__(f"item {index}: {message}")
        self.index = index


class SearchBudgetExceeded(RuntimeError):
    """The node budget ran out before the search could decide."""

    def __init__(self, nodes: int, proven_upto: int = -1):
        msg = f"search budget exhausted after {nodes} nodes"
        if proven_upto >= 0:
            msg += f" (no plan of length <= {proven_upto})"
        super().__init__(msg)
        self.nodes = nodes
        self.proven_upto = proven_upto


@dataclass(frozen=True)
class ProblemInstance:
    graph: CommGraph
    mode: str = "two-way"
    goals: frozenset[SignedGoal] = frozenset()
    depth_cap: int = 1
    allow_change: bool = False

    def __post_init__(self):
        object.__setattr__(self, "goals", frozenset(self.goals))
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.graph.directed != (self.mode == "one-way"):
            raise ValueError(f"mode {self.mode} does not match a {'directed' if self.graph.directed else 'undirected'} graph")
        if self.depth_cap < 1:
            raise ValueError("depth_cap must be >= 1")
        cap, n = self.depth_cap, self.graph.n
        for g in self.goals:
            ks, s = g.fluent.knowers, g.fluent.secret
            if len(ks) > cap:
                raise DepthOverflowError(f"goal {g} deeper than depth cap {cap}")
            if not (1 <= min(ks) and max(ks) <= n and 1 <= s <= n):
                bad = next(a for a in ks + (s,) if not 1 <= a <= n)
                raise ValueError(f"goal {g} mentions agent {bad} outside 1..{n}")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def goal_depth(self) -> int:
        return max((g.fluent.depth for g in self.goals), default=0)

    def sorted_goals(self) -> list[SignedGoal]:
        return sorted(self.goals, key=lambda g: (not g.positive, g.fluent.depth, g.fluent))

    @cached_property
    def _masks(self):
        return _compile_goals(self.graph.n, self.depth_cap, self.goals)


@dataclass
class VerificationReport:
    success: bool
    failing_goal: Optional[SignedGoal] = None
    state_trace: Optional[list[int]] = None

    def __str__(self):
        if self.success:
            return "success: all goals hold"
        kind = "positive" if self.failing_goal.positive else "negative"
        return f"failure: {kind} goal {self.failing_goal} does not hold"


@dataclass
class SearchResult:
    """Outcome of an exhaustive search.

    ``certificate`` is the largest length for which the search proved that no
    plan exists (``-1`` when a plan of length 0 works).
    """

    plan: Optional[Plan]
    certificate: int
    nodes: int = 0

    @property
    def found(self) -> bool:
        return self.plan is not None

    @property
    def optimum(self) -> Optional[int]:
        return len(self.plan) if self.plan is not None else None


# ---------------------------------------------------------------------------
# Goal masks


def _compile_goals(n: int, cap: int, goals: Iterable[SignedGoal]):
    # gather bit positions first; OR-ing into wide ints one goal at a time is quadratic
    found: dict[tuple[bool, int, int], list[int]] = {}
    for g in goals:
        ks, s = g.fluent.knowers, g.fluent.secret
        idx = 0
        for k in ks[1:]:
            idx = idx * n + k - 1
        found.setdefault((g.positive, len(ks) - 1, ks[0] - 1), []).append(idx * n + s - 1)
    pos = [[0] * n for _ in range(cap)]
    neg = [[0] * n for _ in range(cap)]
    for (positive, r, x), idxs in found.items():
        buf = bytearray(n ** (r + 1) // 8 + 1)
        for i in idxs:
            buf[i >> 3] |= 1 << (i & 7)
        (pos if positive else neg)[r][x] = int.from_bytes(buf, "little")
    return tuple(tuple(r) for r in pos), tuple(tuple(r) for r in neg)


def _holds(rows, masks) -> bool:
    pos, neg = masks
    for level, p, q in zip(rows, pos, neg):
        for v, pm, nm in zip(level, p, q):
            if v & pm != pm or v & nm:
                return False
    return True


def _violates_negative(rows, neg) -> bool:
    for level, q in zip(rows, neg):
        for v, nm in zip(level, q):
            if v & nm:
                return True
    return False


def goal_holds(st: KnowledgeState, g: SignedGoal) -> bool:
    return st.is_true(g.fluent) == g.positive


# ---------------------------------------------------------------------------
# Execution


def _check_item(instance: ProblemInstance, index: int, item):
    g = instance.graph
    n = g.n
    for a in getattr(item, "agents", ()):
        if not 1 <= a <= n:
            raise PlanError(index, f"agent {a} outside 1..{n}")
    if isinstance(item, Change):
        if not instance.allow_change:
            raise PlanError(index, f"{item} not allowed in this instance")
        return
    mode = instance.mode
    if mode == "two-way":
        if not isinstance(item, TwoWayCall):
            raise PlanError(index, f"{item} is not a two-way call")
        if not g.has_edge(item.i, item.j):
            raise PlanError(index, f"no edge {item.i}-{item.j}")
    elif mode == "one-way":
        if not isinstance(item, OneWayCall):
            raise PlanError(index, f"{item} is not a one-way call")
        if not g.has_edge(item.sender, item.receiver):
            raise PlanError(index, f"no arc {item.sender}->{item.receiver}")
    else:
        if not isinstance(item, ParallelStep):
            raise PlanError(index, f"{item} is not a parallel step")
        for c in item.calls:
            if not isinstance(c, TwoWayCall):
                raise PlanError(index, f"{c} inside a step is not a two-way call")
            if not g.has_edge(c.i, c.j):
                raise PlanError(index, f"no edge {c.i}-{c.j}")


def _states(instance: ProblemInstance, plan: Plan):
    if plan.mode != instance.mode:
        raise PlanError(0, f"plan mode {plan.mode} does not match instance mode {instance.mode}")
    st = initial_state(instance.graph.n, instance.depth_cap)
    yield st
    for k, item in enumerate(plan.items):
        _check_item(instance, k, item)
        st = st.apply(item)
        yield st


def execute(instance: ProblemInstance, plan: Plan) -> KnowledgeState:
    st = None
    for st in _states(instance, plan):
        pass
    return st


def verify(instance: ProblemInstance, plan: Plan, trace: bool = False) -> VerificationReport:
    """Run ``plan`` from the initial state and check every goal.

    With ``trace`` the report lists the number of stored truths after each
    item (the first entry is the initial state).
    """
    counts = [] if trace else None
    st = None
    for st in _states(instance, plan):
        if trace:
            counts.append(len(st.truths))
    if _holds(st.rows, instance._masks):
        return VerificationReport(True, None, counts)
    for g in instance.sorted_goals():
        if not goal_holds(st, g):
            return VerificationReport(False, g, counts)
    raise AssertionError("goal masks disagree with goal-by-goal check")


# ---------------------------------------------------------------------------
# Necessary conditions


def _walk_exists(g: CommGraph, f: Fluent) -> bool:
    """A walk from the secret owner through the knowers, innermost first."""
    chain = [f.secret] + list(reversed(f.knowers))
    if g.directed:
        return all(b in reachable_from(g, a) for a, b in zip(chain, chain[1:]))
    comp = {}
    for k, c in enumerate(connected_components(g)):
        for v in c:
            comp[v] = k
    return len({comp[a] for a in chain}) == 1


def quick_infeasible(instance: ProblemInstance) -> Optional[str]:
    """A reason the instance cannot be solved, or None if none is found.

    Exact for purely positive goals; for mixed goals only sound.
    """
    positives = {g.fluent for g in instance.goals if g.positive}
    for g in instance.sorted_goals():
        f = g.fluent
        if g.positive:
            if not is_self_evident(f) and not _walk_exists(instance.graph, f):
                return f"no walk carries s{f.secret} through the knowers of goal {f}"
        else:
            if is_self_evident(f):
                return f"negative goal {g} is on a self-evident fluent"
            if f in positives:
                return f"goal {f} is required both true and false"
    return None


# ---------------------------------------------------------------------------
# Search support


def _kind_rank(a) -> int:
    return {TwoWayCall: 0, OneWayCall: 1, Change: 2}[type(a)]


def _action_key(a):
    if isinstance(a, ParallelStep):
        return (0, tuple((min(c.agents), max(c.agents)) for c in a.calls))
    ag = a.agents
    return (min(ag), max(ag), _kind_rank(a), ag)


def matchings(g: CommGraph) -> list[ParallelStep]:
    """All nonempty matchings of an undirected graph, as parallel steps."""
    edges = g.sorted_edges()
    out = []

    def grow(start, used, chosen):
        for k in range(start, len(edges)):
            u, v = edges[k]
            if u in used or v in used:
                continue
            chosen.append(TwoWayCall(u, v))
            out.append(ParallelStep(tuple(chosen)))
            grow(k + 1, used | {u, v}, chosen)
            chosen.pop()

    grow(0, frozenset(), [])
    return sorted(out, key=_action_key)


def instance_actions(instance: ProblemInstance) -> list:
    g = instance.graph
    if instance.mode == "two-way":
        acts = [TwoWayCall(u, v) for u, v in g.sorted_edges()]
    elif instance.mode == "one-way":
        acts = [OneWayCall(u, v) for u, v in g.sorted_edges()]
    else:
        acts = matchings(g)
    if instance.allow_change:
        acts += [Change(i) for i in range(1, g.n + 1)]
    return sorted(acts, key=_action_key)


@lru_cache(maxsize=None)
def _secret_filter(n: int, r: int, secrets: frozenset) -> int:
    block = 0
    for s in secrets:
        block |= 1 << (s - 1)
    rep = 0
    for t in range(n**r):
        rep |= 1 << (t * n)
    return block * rep


class _Space:
    """Search space over states truncated to the goal depth and restricted to
    the secrets that goals mention.

    Both reductions are exact: truths at depth r only depend on truths at
    depth <= r, and no action mixes fluents about different secrets.
    """

    def __init__(self, instance: ProblemInstance, project: bool = True):
        self.instance = instance
        self.n = n = instance.graph.n
        self.cap = max(1, instance.goal_depth)
        rows = initial_state(n, self.cap).rows
        if project and instance.goals:
            secrets = frozenset(g.fluent.secret for g in instance.goals)
            rows = tuple(
                tuple(v & _secret_filter(n, r, secrets) for v in level) for r, level in enumerate(rows)
            )
        self.root = rows
        self.masks = _compile_goals(n, self.cap, instance.goals)
        self.actions = instance_actions(instance)

    def step(self, rows, action):
        return _apply_rows(rows, self.n, action)

    def satisfied(self, rows) -> bool:
        return _holds(rows, self.masks)


def _dfs(space: _Space, rows, rem: int, table: dict, prune: bool, counter: list, budget: int):
    if space.satisfied(rows):
        return []
    if rem == 0:
        return None
    if prune and table.get(rows, -1) >= rem:
        return None
    counter[0] += 1
    if counter[0] > budget:
        raise SearchBudgetExceeded(counter[0])
    for a in space.actions:
        child = space.step(rows, a)
        if prune and child == rows:
            continue
        res = _dfs(space, child, rem - 1, table, prune, counter, budget)
        if res is not None:
            return [a] + res
    if prune:
        table[rows] = rem
    return None


def _branch_task(args):
    instance, action_index, rem, prune, budget = args
    space = _Space(instance)
    child = space.step(space.root, space.actions[action_index])
    counter = [0]
    res = _dfs(space, child, rem, {}, prune, counter, budget)
    return res, counter[0]


def _iddfs(instance: ProblemInstance, max_len: int, prune: bool, node_budget: int, workers: int) -> SearchResult:
    space = _Space(instance)
    if space.satisfied(space.root):
        return SearchResult(Plan(instance.mode, ()), -1, 0)
    table: dict = {}
    counter = [0]
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for length in range(1, max_len + 1):
            try:
                if pool is None:
                    res = _dfs(space, space.root, length, table, prune, counter, node_budget)
                else:
                    res = _fan_out(pool, space, instance, length, prune, node_budget, counter)
            except SearchBudgetExceeded as exc:
                raise SearchBudgetExceeded(exc.nodes, length - 1) from None
            log.debug("length %d: %d nodes so far", length, counter[0])
            if res is not None:
                return SearchResult(Plan(instance.mode, res), length - 1, counter[0])
    finally:
        if pool is not None:
            pool.shutdown()
    return SearchResult(None, max_len, counter[0])


def _fan_out(pool, space, instance, length, prune, budget, counter):
    tasks = []
    for k, a in enumerate(space.actions):
        if prune and space.step(space.root, a) == space.root:
            continue
        tasks.append((k, (instance, k, length - 1, prune, budget)))
    results = list(pool.map(_branch_task, [t[1] for t in tasks]))
    for (k, _), (res, nodes) in zip(tasks, results):
        counter[0] += nodes
    for (k, _), (res, _nodes) in zip(tasks, results):
        if res is not None:
            return [space.actions[k]] + res
    return None


def search_optimal(
    instance: ProblemInstance,
    max_len: int,
    *,
    prune: bool = True,
    node_budget: int = 20_000_000,
    workers: int = 1,
) -> SearchResult:
    """Shortest plan of at most ``max_len`` sequential actions, by iterative deepening.

    The returned plan is the least one in action order among the shortest,
    whatever ``workers`` is.  ``certificate`` is the longest length proven
    to admit no plan.  Raises :class:`SearchBudgetExceeded` when the node
    budget runs out, which is distinct from proven absence.
    """
    if instance.mode == "parallel":
        raise ValueError("use min_parallel_steps for parallel instances")
    return _iddfs(instance, max_len, prune, node_budget, workers)


def min_parallel_steps(
    instance: ProblemInstance,
    max_steps: int,
    *,
    prune: bool = True,
    node_budget: int = 20_000_000,
    workers: int = 1,
) -> SearchResult:
    """Fewest parallel steps (each a matching of the graph), by iterative deepening."""
    if instance.mode != "parallel":
        raise ValueError("min_parallel_steps needs a parallel instance")
    return _iddfs(instance, max_steps, prune, node_budget, workers)


# ---------------------------------------------------------------------------
# Negative goals


def neg_length_bound(instance: ProblemInstance) -> int:
    """Length within which a solvable instance always has a plan."""
    m = len(instance.goals)
    d = max(1, instance.goal_depth)
    bound = m * d * (instance.graph.n - 1)
    if instance.allow_change:
        bound += instance.graph.n
    return bound


def _innermost_false(rows, n: int, f: Fluent) -> int:
    """Largest k (1-based) with ``K_{i_k} ... s`` false; 0 if the fluent holds."""
    for k in range(f.depth, 0, -1):
        sub = f.knowers[k - 1 :]
        bit = _index(n, [a - 1 for a in sub[1:]] + [f.secret - 1])
        if not rows[len(sub) - 1][sub[0] - 1] >> bit & 1:
            return k
    return 0


def _dead(space: _Space, rows, allowed: list[tuple[int, int]]) -> bool:
    """Some unmet positive goal can no longer be reached over the allowed edges.

    Sound because knowledge of started secrets never shrinks, so an edge whose
    call already breaks a negative goal stays forbidden in every later state.
    """
    n = space.n
    parent = list(range(n + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for u, v in allowed:
        parent[find(u)] = find(v)
    for g in space.instance.goals:
        if not g.positive:
            continue
        f = g.fluent
        k = _innermost_false(rows, n, f)
        if k == 0:
            continue
        chain = f.knowers[:k]
        root = find(chain[-1])
        if any(find(a) != root for a in chain):
            return True
        if k < f.depth:
            sources = [f.knowers[k]]
        else:
            sources = [x for x in range(1, n + 1) if rows[0][x - 1] >> (f.secret - 1) & 1]
        if all(find(s) != root for s in sources):
            return True
    return False


def _dead_carrying(space: _Space, rows, allowed: list[tuple[int, int]], live: int) -> bool:
    """Depth-1 dead-state test that tracks what travels along a route.

    For ``x`` to learn ``s``, a route of allowed edges must lead from a
    current knower of ``s`` to ``x``.  Each agent on it passes on at least
    everything it and the agents before it know now, so nobody down the line,
    ``x`` included, may be forbidden any of that.  Only live (started)
    secrets count, plus ``s`` itself.  The last agent on such a route is a
    candidate final sender for the goal.

    Final senders also exclude each other.  If ``y`` must deliver ``s`` to
    ``x`` and ``s'`` to ``x'``, it knows both at whichever delivery comes
    second, so that cannot work when ``x`` is forbidden ``s'`` and ``x'`` is
    forbidden ``s``.  Goals left with one candidate pin it, which strikes it
    from the conflicting goals, until nothing changes.
    """
    level = rows[0]
    forbidden = space.masks[1][0]
    want = space.masks[0][0]
    directed = space.instance.mode == "one-way"
    adj: dict[int, list[int]] = {}
    for u, v in allowed:
        adj.setdefault(u - 1, []).append(v - 1)
        if not directed:
            adj.setdefault(v - 1, []).append(u - 1)
    n = space.n
    goals = []
    for x in range(n):
        missing = want[x] & ~level[x]
        while missing:
            bit = missing & -missing
            missing ^= bit
            senders = _final_senders(level, forbidden, adj, live, bit, x, n)
            if not senders:
                return True
            goals.append((x, bit, senders))
    changed = True
    while changed:
        changed = False
        pinned: dict[int, list[tuple[int, int]]] = {}
        for x, bit, senders in goals:
            if len(senders) == 1:
                pinned.setdefault(next(iter(senders)), []).append((x, bit))
        for x, bit, senders in goals:
            for y in list(senders):
                for x2, bit2 in pinned.get(y, ()):
                    if (x2, bit2) != (x, bit) and forbidden[x] & bit2 and forbidden[x2] & bit:
                        senders.discard(y)
                        changed = True
                        break
            if not senders:
                return True
    return False


def _final_senders(level, forbidden, adj, live: int, bit: int, x: int, n: int) -> set[int]:
    senders: set[int] = set()
    # carried sets already explored at each agent; a superset adds nothing
    masks: list[list[int]] = [[] for _ in range(n)]
    stack = []
    for w in range(n):
        if level[w] & bit and w != x:
            c = (level[w] & live) | bit
            masks[w].append(c)
            stack.append((w, c))
    while stack:
        u, carried = stack.pop()
        for v in adj.get(u, ()):
            if forbidden[v] & carried:
                continue
            if v == x:
                senders.add(u)
                continue
            c = carried | (level[v] & live)
            if any(m & c == m for m in masks[v]):
                continue
            masks[v] = [m for m in masks[v] if m & c != c] + [c]
            stack.append((v, c))
    return senders


class _Relevance:
    """Filters calls that cannot belong to a minimal plan (depth-1 goals).

    Dropping a call from a plan only removes knowledge, so in a minimal plan
    every call is the first link of some time-respecting path that hands a
    secret ``s`` to an agent that did not know it and on to an agent with an
    unmet positive goal on ``s``.  The later links are calls that are still
    allowed now, go through agents not yet knowing ``s``, and each of them
    hands on at least what the first receiver knew right after the call, so
    none of those agents may be forbidden any of it.
    """

    def __init__(self, space: _Space, allowed: list[tuple[int, int]], rows):
        n = space.n
        self.level = level = rows[0]
        self.forbidden = space.masks[1][0]
        directed = space.instance.mode == "one-way"
        self.back: dict[int, list[int]] = {a: [] for a in range(1, n + 1)}
        for u, v in allowed:
            self.back[v].append(u)
            if not directed:
                self.back[u].append(v)
        self.targets: dict[int, list[int]] = {}
        for g in space.instance.goals:
            if g.positive:
                x, s = g.fluent.knowers[0], g.fluent.secret
                if not level[x - 1] >> (s - 1) & 1:
                    self.targets.setdefault(s, []).append(x)

    def _reaches(self, w: int, s: int, carried: int) -> bool:
        bit = 1 << (s - 1)
        goal = set(self.targets[s])
        if w in goal:
            return True
        # search backwards from the goal agents towards w
        seen = set(goal)
        stack = [x for x in goal if not carried & self.forbidden[x - 1]]
        while stack:
            y = stack.pop()
            for u in self.back[y]:
                if u == w:
                    return True
                if u in seen or self.level[u - 1] & bit or carried & self.forbidden[u - 1]:
                    continue
                seen.add(u)
                stack.append(u)
        return False

    def useful(self, child, agents, live: int = -1) -> bool:
        """``live`` masks out secrets that cannot spread yet."""
        before, after = self.level, child[0]
        for a in agents:
            gained = after[a - 1] & ~before[a - 1]
            while gained:
                low = gained & -gained
                s = low.bit_length()
                if s in self.targets and self._reaches(a, s, after[a - 1] & live):
                    return True
                gained ^= low
        return False


def solve_neg(
    instance: ProblemInstance,
    *,
    node_budget: int = 5_000_000,
    seed: Optional[int] = None,
) -> Optional[Plan]:
    """A plan for a mixed-sign instance, or None if there is none.

    Without CHANGE knowledge only grows, so a call that breaks a negative
    goal can never be repaired and the reachable states form a finite
    acyclic graph.  That graph is searched depth-first, exhaustively, after
    dropping states where some positive goal has become unreachable and
    calls that cannot be part of a minimal plan.

    CHANGE is brought back to the same shape.  Fluents about one secret
    evolve independently of all others, so only the last CHANGE of each
    secret matters, and before it the secret might as well not spread at
    all.  The search therefore keeps each goal secret "pending" (frozen at
    its initial knowledge) until it chooses to start it, which is where the
    plan puts that CHANGE; secrets still pending at the end get a final
    CHANGE.  Started secrets only grow, so the search stays acyclic and the
    same pruning applies.  Either way None is a proof of unsolvability.

    ``seed`` shuffles the action order, which only changes which plan is
    returned.  Raises :class:`SearchBudgetExceeded` if more than
    ``node_budget`` states would be expanded.
    """
    space = _Space(instance)
    if space.satisfied(space.root):
        return Plan(instance.mode, ())
    actions = [a for a in space.actions if not isinstance(a, Change)]
    if seed is not None:
        random.Random(seed).shuffle(actions)
    if space.cap == 1 and instance.mode != "parallel":
        return _neg_flat(instance, space, actions, node_budget)
    return _neg_dfs(instance, space, actions, node_budget)


class _Freezer:
    """Resets pending secrets to their initial knowledge."""

    def __init__(self, space: _Space, secrets):
        self.space = space
        self.masks = {}
        self.one = {s: tuple(_secret_filter(space.n, r, frozenset({s})) for r in range(space.cap)) for s in secrets}

    def mask(self, pending: frozenset) -> tuple[int, ...]:
        m = self.masks.get(pending)
        if m is None:
            m = [0] * self.space.cap
            for s in pending:
                for r, bits in enumerate(self.one[s]):
                    m[r] |= bits
            m = self.masks[pending] = tuple(m)
        return m

    def __call__(self, rows, pending: frozenset):
        if not pending:
            return rows
        return tuple(
            tuple((v & ~m) | (v0 & m) for v, v0 in zip(level, root))
            for level, root, m in zip(rows, self.space.root, self.mask(pending))
        )

    def touched(self, before, after, pending) -> list[int]:
        """Pending secrets whose knowledge differs between the two row sets."""
        out = []
        for s in sorted(pending):
            if any((a ^ b) & m for lb, la, m in zip(before, after, self.one[s]) for a, b in zip(la, lb)):
                out.append(s)
        return out


def _subsets(items: list) -> list[frozenset]:
    out = []
    for k in range(1, len(items) + 1):
        out.extend(frozenset(c) for c in combinations(items, k))
    return out


def _neg_dfs(instance: ProblemInstance, space: _Space, actions: list, node_budget: int) -> Optional[Plan]:
    n = space.n
    neg = space.masks[1]
    edge_of = {}
    for a in actions:
        if isinstance(a, ParallelStep):
            if len(a.calls) == 1:
                edge_of[a] = a.calls[0].agents
        else:
            edge_of[a] = a.agents
    relevance = space.cap == 1 and instance.mode != "parallel"
    secrets = sorted({g.fluent.secret for g in instance.goals}) if instance.allow_change else []
    freeze = _Freezer(space, secrets)
    acts = [(a, edge_of.get(a)) for a in actions]
    full = (1 << n) - 1

    def live_of(pending) -> int:
        live = full
        for s in pending:
            live &= ~(1 << (s - 1))
        return live

    def expand(state):
        rows, pending = state
        children, allowed = [], []
        for a, edge in acts:
            raw = space.step(rows, a)
            child = freeze(raw, pending)
            ok = not _violates_negative(child, neg)
            if ok and edge is not None:
                # a no-op now is still usable later
                allowed.append(edge)
            if ok and child != rows:
                children.append((a, frozenset(), (child, pending)))
            if ok and pending:
                for started in _subsets(freeze.touched(rows, raw, pending)):
                    rest = pending - started
                    c2 = freeze(raw, rest)
                    if not _violates_negative(c2, neg):
                        children.append((a, started, (c2, rest)))
        children = [c for c in children if c[2] not in seen]
        if _dead(space, rows, allowed):
            return []
        if space.cap == 1 and _dead_carrying(space, rows, allowed, live_of(pending)):
            return []
        if relevance:
            rel = _Relevance(space, allowed, rows)
            keep = []
            for a, started, (child, rest) in children:
                if rel.useful(child, a.agents, live_of(rest)):
                    keep.append((a, started, (child, rest)))
            children = keep
        return children

    root = (space.root, frozenset(secrets))
    seen = {root}
    path: list = []
    stack = [iter(expand(root))]
    expanded = 1
    while stack:
        for a, started, child in stack[-1]:
            if child in seen:
                continue
            seen.add(child)
            path.append((a, started))
            if space.satisfied(child[0]):
                return Plan(instance.mode, _real_items(space, path, child[1]))
            expanded += 1
            if expanded > node_budget:
                raise SearchBudgetExceeded(expanded)
            stack.append(iter(expand(child)))
            break
        else:
            stack.pop()
            if path:
                path.pop()
    return None


def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low)
        mask ^= low
    return out


def _neg_flat(instance: ProblemInstance, space: _Space, actions: list, node_budget: int) -> Optional[Plan]:
    """:func:`_neg_dfs` specialised to depth-1 goals and sequential calls.

    A state is then one mask of known secrets per agent plus the mask of
    pending secrets, and a call is a couple of ORs.
    """
    n = space.n
    want = space.masks[0][0]
    forbidden = space.masks[1][0]
    directed = instance.mode == "one-way"
    full = (1 << n) - 1
    root = space.root[0]
    if any(root[x] & forbidden[x] for x in range(n)):
        return None
    pend0 = 0
    if instance.allow_change:
        for g in instance.goals:
            pend0 |= 1 << (g.fluent.secret - 1)
    acts = [(a, a.agents[0] - 1, a.agents[1] - 1) for a in actions]

    def satisfied(level) -> bool:
        return all(level[x] & want[x] == want[x] for x in range(n))

    def stranded(level, allowed) -> bool:
        # some unmet goal's component holds no knower of the secret
        parent = list(range(n + 1))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for u, v in allowed:
            parent[find(u)] = find(v)
        known = {}
        for w in range(n):
            r = find(w + 1)
            known[r] = known.get(r, 0) | level[w]
        for x in range(n):
            missing = want[x] & ~level[x]
            if missing and missing & ~known[find(x + 1)]:
                return True
        return False

    def with_pair(level, u, nu, v, nv):
        out = list(level)
        out[u] = nu
        out[v] = nv
        return tuple(out)

    def expand(state):
        level, pend = state
        live = full & ~pend
        children, allowed = [], []
        for a, u, v in acts:
            lu, lv = level[u], level[v]
            if directed:
                nu, nv = lu, lv | (lu & live)
            else:
                k = (lu | lv) & live
                nu, nv = lu | k, lv | k
            if nu & forbidden[u] or nv & forbidden[v]:
                continue
            allowed.append((u + 1, v + 1))
            if nu != lu or nv != lv:
                children.append((a, 0, (with_pair(level, u, nu, v, nv), pend)))
            touched = (lu & ~lv if directed else lu ^ lv) & pend
            if touched:
                for started in _subsets(_bits(touched)):
                    t = sum(started)
                    if directed:
                        su, sv = lu, lv | (lu & (live | t))
                    else:
                        k = (lu | lv) & (live | t)
                        su, sv = lu | k, lv | k
                    if su & forbidden[u] or sv & forbidden[v]:
                        continue
                    children.append((a, t, (with_pair(level, u, su, v, sv), pend & ~t)))
        children = [c for c in children if c[2] not in seen]
        if not children:
            return children
        rows = (level,)
        if stranded(level, allowed) or _dead_carrying(space, rows, allowed, live):
            return []
        rel = _Relevance(space, allowed, rows)
        return [c for c in children if rel.useful((c[2][0],), c[0].agents, full & ~c[2][1])]

    start = (root, pend0)
    seen = {start}
    path: list = []
    stack = [iter(expand(start))]
    expanded = 1
    while stack:
        for a, started, child in stack[-1]:
            if child in seen:
                continue
            seen.add(child)
            path.append((a, frozenset(b.bit_length() for b in _bits(started))))
            if satisfied(child[0]):
                pending = frozenset(b.bit_length() for b in _bits(child[1]))
                return Plan(instance.mode, _real_items(space, path, pending))
            expanded += 1
            if expanded > node_budget:
                raise SearchBudgetExceeded(expanded)
            stack.append(iter(expand(child)))
            break
        else:
            stack.pop()
            if path:
                path.pop()
    return None


def _real_items(space: _Space, path: list, pending: frozenset) -> tuple:
    """Turn a path of (action, secrets started) into plan items, dropping
    CHANGEs that would not alter anything."""
    wanted = []
    for a, started in path:
        wanted.extend(Change(s) for s in sorted(started))
        wanted.append(a)
    wanted.extend(Change(s) for s in sorted(pending))
    items, rows = [], space.root
    for item in wanted:
        nxt = space.step(rows, item)
        if isinstance(item, Change) and nxt == rows:
            continue
        items.append(item)
        rows = nxt
    return tuple(items)


# ---------------------------------------------------------------------------
# Hierarchies


def hierarchy_demo(levels: dict[int, int]) -> tuple[ProblemInstance, Plan]:
    """Secrets flow up a level hierarchy and never down.

    Agents are the keys ``1..n``; adjacent levels are completely connected.
    Level by level from the bottom, every agent calls every agent one level
    up, after which the upper agents all change their secrets.
    """
    if not levels:
        raise ValueError("need at least one agent")
    n = len(levels)
    if sorted(levels) != list(range(1, n + 1)):
        raise ValueError("agents must be numbered 1..n")
    tiers = sorted(set(levels.values()))
    members = {t: sorted(a for a, t2 in levels.items() if t2 == t) for t in tiers}
    edges = set()
    for lo, hi in zip(tiers, tiers[1:]):
        edges |= complete_bipartite(members[lo], members[hi], n).edges
    graph = CommGraph(n, False, frozenset(edges))
    goals = set()
    for u, v in combinations(range(1, n + 1), 2):
        if levels[u] == levels[v]:
            continue
        hi, lo = (u, v) if levels[u] > levels[v] else (v, u)
        goals.add(SignedGoal(True, Fluent((hi,), lo)))
        goals.add(SignedGoal(False, Fluent((lo,), hi)))
    instance = ProblemInstance(graph, "two-way", frozenset(goals), 1, True)
    items = []
    for lo, hi in zip(tiers, tiers[1:]):
        for y in members[hi]:
            for x in members[lo]:
                items.append(TwoWayCall(x, y))
        items.extend(Change(y) for y in members[hi])
    return instance, Plan("two-way", items, {"protocol": "hierarchy"})
