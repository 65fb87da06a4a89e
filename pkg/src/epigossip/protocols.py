"""Constructive protocols for the full depth-d gossip goal, and their lengths.

Each generator takes the structure it needs (a rooted spanning tree, a
Hamiltonian path, a ``K_{2,n-2}`` split, a balanced bipartition) in the
caller's agent labels.  Internally it numbers agents the way the construction
wants and maps calls back; the numbering used is kept in
``plan.metadata["relabel"]`` (construction number -> agent) and the item index
at which every pass ends in ``plan.metadata["passes"]``.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Optional, Sequence

from .graph import (
    CommGraph,
    RootedTree,
    detect_balanced_bipartite,
    detect_k2_bipartite,
    hamiltonian_path,
    is_hamiltonian_path,
    mirror_graph,
    spanning_tree,
)
from .knowledge import OneWayCall, ParallelStep, Plan, TwoWayCall, goal_T

if TYPE_CHECKING:
    from .planner import ProblemInstance


class NoProtocolError(ValueError):
    """The instance's topology admits none of the known constructions."""


def ceil_log2(n: int) -> int:
    return (n - 1).bit_length()


# ---------------------------------------------------------------------------
# Closed-form lengths


def spanning_tree_length(n: int, d: int) -> int:
    return d * (2 * n - 3)


def hamiltonian_length(n: int, d: int) -> int:
    return 1 + (d + 1) * (n - 2)


def bipartite_length(n: int, d: int) -> int:
    return (d + 1) * (n - 2)


def directional_length(n: int, d: int) -> int:
    return (d + 1) * (n - 1)


def parallel_steps(n: int, d: int) -> int:
    if n % 2 == 0:
        return d * (ceil_log2(n) - 1) + 1
    return d * ceil_log2(n) + 1


FORMULAS = {
    "spanning-tree": spanning_tree_length,
    "hamiltonian": hamiltonian_length,
    "bipartite": bipartite_length,
    "directional": directional_length,
    "parallel": parallel_steps,
}


# ---------------------------------------------------------------------------
# Generators


def _check_d(d: int):
    if d < 1:
        raise ValueError(f"depth must be >= 1, got {d}")


def spanning_tree_protocol(tree: RootedTree, d: int) -> Plan:
    """2d passes: odd ones sweep up both subtrees then join root and child,
    even ones sweep back down."""
    _check_d(d)
    if tree.child is None or tree.parent.get(tree.child) != tree.root:
        raise ValueError("tree needs a designated child adjacent to the root")
    verts = tree.vertices
    if len(verts) < 2:
        raise ValueError("need at least two agents")
    lower = tree.subtree(tree.child)
    lower_set = set(lower)
    upper = [v for v in tree.subtree(tree.root) if v not in lower_set]
    par = tree.parent

    up = [TwoWayCall(v, par[v]) for v in reversed(upper[1:])]
    up += [TwoWayCall(v, par[v]) for v in reversed(lower[1:])]
    up.append(TwoWayCall(tree.root, tree.child))
    down = [TwoWayCall(par[v], v) for v in upper[1:]]
    down += [TwoWayCall(par[v], v) for v in lower[1:]]

    items, passes = [], []
    for k in range(1, 2 * d + 1):
        items.extend(up if k % 2 else down)
        passes.append(len(items))
    relabel = {1: tree.root, 2: tree.child}
    return Plan("two-way", items, {"protocol": "spanning-tree", "relabel": relabel, "passes": passes})


def hamiltonian_protocol(path: Sequence[int], d: int, graph: Optional[CommGraph] = None) -> Plan:
    _check_d(d)
    path = list(path)
    n = len(path)
    if n < 3 or len(set(path)) != n:
        raise ValueError("need a path through at least three distinct agents")
    if graph is not None and not is_hamiltonian_path(graph, path):
        raise ValueError(f"{path} is not a Hamiltonian path of the graph")

    def call(i):  # CALL i i+1 in path numbering
        return TwoWayCall(path[i - 1], path[i])

    items = [call(i) for i in range(n - 1, 0, -1)] + [call(i) for i in range(2, n)]
    passes = [len(items)]
    for m in range(2, d + 1):
        if m % 2 == 0:
            items += [call(i) for i in range(n - 2, 0, -1)]
        else:
            items += [call(i) for i in range(2, n)]
        passes.append(len(items))
    relabel = {k + 1: a for k, a in enumerate(path)}
    return Plan("two-way", items, {"protocol": "hamiltonian", "relabel": relabel, "passes": passes})


def split_rest(rest: Sequence[int]) -> tuple[list[int], list[int]]:
    """Sorted non-hub vertices cut into a first and a second half."""
    rest = sorted(rest)
    half = (len(rest) + 1) // 2
    return rest[:half], rest[half:]


def bipartite_protocol(
    hubs: tuple[int, int],
    left: Sequence[int],
    right: Sequence[int],
    d: int,
    graph: Optional[CommGraph] = None,
) -> Plan:
    """d+1 passes of fan calls from the two hubs into ``left``/``right``.

    Odd passes: hub1 calls ``left`` in order, then hub2 calls ``right`` in
    order.  Even passes: hub1 calls ``right`` in reverse, then hub2 calls
    ``left`` in reverse.
    """
    _check_d(d)
    h1, h2 = hubs
    left, right = list(left), list(right)
    if not left or not right:
        raise ValueError("both halves of the split must be nonempty")
    everyone = [h1, h2, *left, *right]
    if len(set(everyone)) != len(everyone):
        raise ValueError("hubs and halves must be disjoint")
    if graph is not None:
        if sorted(everyone) != list(range(1, graph.n + 1)):
            raise ValueError("hubs and halves must cover every agent")
        for h in hubs:
            for v in left + right:
                if not graph.has_edge(h, v):
                    raise ValueError(f"missing edge {h}-{v} of K_(2,n-2)")

    odd = [TwoWayCall(h1, x) for x in left] + [TwoWayCall(h2, y) for y in right]
    even = [TwoWayCall(h1, y) for y in reversed(right)] + [TwoWayCall(h2, x) for x in reversed(left)]
    items, passes = [], []
    for m in range(1, d + 2):
        items.extend(odd if m % 2 else even)
        passes.append(len(items))
    relabel = {1: h1, 2: h2}
    relabel.update({3 + 2 * k: x for k, x in enumerate(left)})
    relabel.update({4 + 2 * k: y for k, y in enumerate(right)})
    meta = {
        "protocol": "bipartite",
        "relabel": relabel,
        "passes": passes,
        "hubs": (h1, h2),
        "left": tuple(left),
        "right": tuple(right),
    }
    return Plan("two-way", items, meta)


def directional_protocol(path: Sequence[int], d: int, graph: Optional[CommGraph] = None) -> Plan:
    """d+1 one-way sweeps along the path, alternating direction."""
    _check_d(d)
    path = list(path)
    n = len(path)
    if n < 2 or len(set(path)) != n:
        raise ValueError("need a path through at least two distinct agents")
    if graph is not None:
        if not is_hamiltonian_path(mirror_graph(graph), path):
            raise ValueError(f"{path} is not a Hamiltonian path of the mirror graph")
    forward = [OneWayCall(path[i], path[i + 1]) for i in range(n - 1)]
    backward = [OneWayCall(path[i + 1], path[i]) for i in range(n - 2, -1, -1)]
    items, passes = [], []
    for r in range(1, d + 2):
        items.extend(forward if r % 2 else backward)
        passes.append(len(items))
    relabel = {k + 1: a for k, a in enumerate(path)}
    return Plan("one-way", items, {"protocol": "directional", "relabel": relabel, "passes": passes})


def _doubling_steps(at: dict[int, int], size: int, steps) -> list[ParallelStep]:
    """Steps s of the ring doubling scheme: position 2i+1 calls 2i+2^s (mod size)."""
    out = []
    for s in steps:
        calls = []
        for i in range(size // 2):
            a = at[2 * i + 1]
            b = at[(2 * i + 2**s - 1) % size + 1]
            calls.append(TwoWayCall(a, b))
        out.append(ParallelStep(tuple(calls)))
    return out


def parallel_protocol(
    v1: Sequence[int], v2: Sequence[int], d: int, graph: Optional[CommGraph] = None
) -> Plan:
    """Parallel schedule over a ``K_{ceil(n/2), floor(n/2)}`` with parts ``v1``, ``v2``.

    Agents take ring positions 1..n: ``v1`` (sorted) the odd ones, ``v2`` the
    even ones.  Every call pairs an odd with an even position, hence crosses
    the bipartition.
    """
    _check_d(d)
    v1, v2 = sorted(v1), sorted(v2)
    n = len(v1) + len(v2)
    if n < 2 or len(v1) != (n + 1) // 2 or len(v2) != n // 2:
        raise ValueError("parts must have sizes ceil(n/2) and floor(n/2), n >= 2")
    if len(set(v1) | set(v2)) != n:
        raise ValueError("parts must be disjoint")
    if graph is not None:
        for u in v1:
            for w in v2:
                if not graph.has_edge(u, w):
                    raise ValueError(f"missing cross edge {u}-{w}")

    at = {}
    for k, a in enumerate(v1):
        at[2 * k + 1] = a
    for k, a in enumerate(v2):
        at[2 * k + 2] = a
    relabel = dict(sorted(at.items()))
    steps: list[ParallelStep] = []
    passes = []

    if n % 2 == 0:
        top = ceil_log2(n)
        steps += _doubling_steps(at, n, range(1, top + 1))
        passes.append(len(steps))
        for _ in range(d - 1):
            # the pair that just talked in the last step plays the step-1 pair
            at = {**at, **{(2 * i + 1) % n + 1: at[(2 * i + 2**top - 1) % n + 1] for i in range(n // 2)}}
            steps += _doubling_steps(at, n, range(2, top + 1))
            passes.append(len(steps))
        meta = {"protocol": "parallel", "relabel": relabel, "passes": passes}
        return Plan("parallel", steps, meta)

    size = 1 << (n.bit_length() - 1)
    top = size.bit_length() - 1
    free = {1: [p for p in range(1, size + 1) if p % 2 == 1], 0: [p for p in range(1, size + 1) if p % 2 == 0]}
    partner = {}
    for q in range(size + 1, n + 1):
        partner[q] = free[1 - q % 2].pop(0)
    tail = ParallelStep(tuple(TwoWayCall(at[q], at[partner[q]]) for q in sorted(partner)))
    steps.append(tail)
    passes.append(1)
    first = {p: at[p] for p in range(1, size + 1)}
    for _ in range(d):
        steps += _doubling_steps(first, size, range(1, top + 1))
        steps.append(tail)
        passes.append(len(steps))
    meta = {
        "protocol": "parallel",
        "relabel": relabel,
        "passes": passes,
        "first": sorted(first.values()),
        "pairing": {at[q]: at[p] for q, p in partner.items()},
    }
    return Plan("parallel", steps, meta)


# ---------------------------------------------------------------------------
# Selection


def full_goal_depth(instance: "ProblemInstance") -> int:
    """d such that the instance asks for exactly goal_T(n, d+1); raises otherwise."""
    n = instance.graph.n
    goals = frozenset(instance.goals)
    if n == 1 or not goals:
        if goals:
            raise ValueError("a single agent has no non-trivial goals")
        return 0
    if any(not g.positive for g in goals):
        raise ValueError("automatic protocols only handle purely positive goals")
    d = max(g.fluent.depth for g in goals)
    if goals != goal_T(n, d + 1):
        raise ValueError(f"goals are not the full depth-{d} goal set")
    return d


def auto_select(instance: "ProblemInstance") -> Plan:
    """Cheapest applicable construction for the instance's mode and graph."""
    d = full_goal_depth(instance)
    g = instance.graph
    n = g.n
    mode = instance.mode
    if d == 0:
        return Plan(mode, ())

    if mode == "two-way":
        candidates = []
        pair = detect_k2_bipartite(g)
        if pair is not None:
            rest = [v for v in range(1, n + 1) if v not in pair]
            left, right = split_rest(rest)
            candidates.append((bipartite_length(n, d), 0, lambda: bipartite_protocol(pair, left, right, d, g)))
        if n >= 3:
            path = hamiltonian_path(g)
            if path is not None:
                candidates.append((hamiltonian_length(n, d), 1, lambda: hamiltonian_protocol(path, d, g)))
        tree = spanning_tree(g)
        if tree is not None:
            candidates.append((spanning_tree_length(n, d), 2, lambda: spanning_tree_protocol(tree, d)))
        if not candidates:
            raise NoProtocolError("graph is disconnected")
        return min(candidates, key=lambda c: c[:2])[2]()

    if mode == "one-way":
        path = hamiltonian_path(mirror_graph(g))
        if path is None:
            raise NoProtocolError("mirror graph has no Hamiltonian path")
        return directional_protocol(path, d, g)

    if mode == "parallel":
        parts = detect_balanced_bipartite(g)
        if parts is None:
            raise NoProtocolError("graph has no K_(ceil(n/2),floor(n/2)) subgraph")
        return parallel_protocol(parts[0], parts[1], d, g)

    raise ValueError(f"unknown mode {mode!r}")
