"""Communication graphs and the structural detections the protocols rely on."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional


@dataclass(frozen=True)
class CommGraph:
    """Agents ``1..n``; undirected edges are stored once as ``(min, max)``."""

    n: int
    directed: bool = False
    edges: frozenset[tuple[int, int]] = frozenset()
    _adj: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        norm = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop on agent {u}")
            for a in (u, v):
                if not 1 <= a <= self.n:
                    raise ValueError(f"agent {a} out of range 1..{self.n}")
            norm.add((u, v) if self.directed else (min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(norm))
        adj: dict[int, set[int]] = {a: set() for a in range(1, self.n + 1)}
        for u, v in norm:
            adj[u].add(v)
            if not self.directed:
                adj[v].add(u)
        object.__setattr__(self, "_adj", {a: frozenset(s) for a, s in adj.items()})

    def neighbors(self, a: int) -> frozenset[int]:
        """Out-neighbours for directed graphs."""
        return self._adj[a]

    def has_edge(self, u: int, v: int) -> bool:
        if self.directed:
            return (u, v) in self.edges
        return (min(u, v), max(u, v)) in self.edges

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def complete_graph(n: int) -> CommGraph:
    return CommGraph(n, False, frozenset(combinations(range(1, n + 1), 2)))


def complete_digraph(n: int) -> CommGraph:
    arcs = {(u, v) for u in range(1, n + 1) for v in range(1, n + 1) if u != v}
    return CommGraph(n, True, frozenset(arcs))


def path_graph(n: int) -> CommGraph:
    return CommGraph(n, False, frozenset((i, i + 1) for i in range(1, n)))


def complete_bipartite(part_a: Iterable[int], part_b: Iterable[int], n: Optional[int] = None) -> CommGraph:
    part_a, part_b = list(part_a), list(part_b)
    n = n if n is not None else len(part_a) + len(part_b)
    return CommGraph(n, False, frozenset((u, v) for u in part_a for v in part_b))


def _require_undirected(g: CommGraph, what: str):
    if g.directed:
        raise ValueError(f"{what} needs an undirected graph")


def _require_directed(g: CommGraph, what: str):
    if not g.directed:
        raise ValueError(f"{what} needs a directed graph")


def connected_components(g: CommGraph) -> list[list[int]]:
    _require_undirected(g, "connected_components")
    seen: set[int] = set()
    comps = []
    for s in range(1, g.n + 1):
        if s in seen:
            continue
        comp, queue = [], deque([s])
        seen.add(s)
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v in sorted(g.neighbors(u)):
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        comps.append(sorted(comp))
    return comps


# ---------------------------------------------------------------------------
# Spanning trees


@dataclass(frozen=True)
class RootedTree:
    """A rooted spanning tree with one designated child of the root.

    ``parent`` maps every non-root vertex to its parent.
    """

    root: int
    child: Optional[int]
    parent: dict[int, int]

    @property
    def vertices(self) -> list[int]:
        return sorted({self.root, *self.parent})

    def children(self, v: int) -> list[int]:
        return sorted(c for c, p in self.parent.items() if p == v)

    def edges(self) -> list[tuple[int, int]]:
        return sorted((min(c, p), max(c, p)) for c, p in self.parent.items())

    def subtree(self, v: int) -> list[int]:
        """Vertices of the subtree rooted at ``v`` in breadth-first order."""
        order, queue = [], deque([v])
        while queue:
            u = queue.popleft()
            order.append(u)
            queue.extend(self.children(u))
        return order


def spanning_tree(g: CommGraph) -> Optional[RootedTree]:
    """BFS tree rooted at agent 1; the designated child is 1's least neighbour."""
    _require_undirected(g, "spanning_tree")
    parent: dict[int, int] = {}
    seen = {1}
    queue = deque([1])
    while queue:
        u = queue.popleft()
        for v in sorted(g.neighbors(u)):
            if v not in seen:
                seen.add(v)
                parent[v] = u
                queue.append(v)
    if len(seen) != g.n:
        return None
    kids = sorted(v for v, p in parent.items() if p == 1)
    return RootedTree(1, kids[0] if kids else None, parent)


# ---------------------------------------------------------------------------
# Hamiltonian paths


def is_hamiltonian_path(g: CommGraph, path) -> bool:
    if sorted(path) != list(range(1, g.n + 1)):
        return False
    return all(g.has_edge(u, v) for u, v in zip(path, path[1:]))


def hamiltonian_path(g: CommGraph) -> Optional[list[int]]:
    """Lexicographically least Hamiltonian path, by exact backtracking.

    Exponential in the worst case; meant for n up to about 20.  Branches are
    cut when the unvisited vertices are no longer connected to the path end.
    """
    _require_undirected(g, "hamiltonian_path")
    n = g.n
    if n == 0:
        return []
    adj = {a: sorted(g.neighbors(a)) for a in range(1, n + 1)}
    if n > 1 and any(not adj[a] for a in adj):
        return None

    def reachable_all(end: int, visited: set[int]) -> bool:
        rest = n - len(visited)
        if rest == 0:
            return True
        seen, stack = {end}, [end]
        count = 0
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen and v not in visited:
                    seen.add(v)
                    count += 1
                    stack.append(v)
        return count == rest

    path: list[int] = []
    visited: set[int] = set()

    def extend() -> bool:
        if len(path) == n:
            return True
        end = path[-1]
        for v in adj[end]:
            if v in visited:
                continue
            path.append(v)
            visited.add(v)
            if reachable_all(v, visited) and extend():
                return True
            path.pop()
            visited.discard(v)
        return False

    for start in range(1, n + 1):
        path[:] = [start]
        visited.clear()
        visited.add(start)
        if reachable_all(start, visited) and extend():
            return list(path)
    return None


# ---------------------------------------------------------------------------
# Bipartite subgraph detection


def detect_k2_bipartite(g: CommGraph) -> Optional[tuple[int, int]]:
    """Least pair ``(i, j)`` joined to every other vertex, i.e. ``g ⊇ K_{2,n-2}``."""
    _require_undirected(g, "detect_k2_bipartite")
    if g.n < 4:
        return None
    everyone = set(range(1, g.n + 1))
    for i, j in combinations(range(1, g.n + 1), 2):
        others = everyone - {i, j}
        if others <= g.neighbors(i) and others <= g.neighbors(j):
            return (i, j)
    return None


def complement(g: CommGraph) -> CommGraph:
    _require_undirected(g, "complement")
    return CommGraph(
        g.n,
        False,
        frozenset(e for e in combinations(range(1, g.n + 1), 2) if e not in g.edges),
    )


def detect_balanced_bipartite(g: CommGraph) -> Optional[tuple[list[int], list[int]]]:
    """Split into parts of sizes ceil(n/2), floor(n/2) with every cross edge present.

    Non-adjacent vertices must share a part, so the parts are unions of
    components of the complement graph; a subset-sum table over component
    sizes decides feasibility.  Among valid answers the first part is the
    lexicographically least sorted vertex list.
    """
    _require_undirected(g, "detect_balanced_bipartite")
    n = g.n
    if n < 2:
        return None
    target = (n + 1) // 2
    comps = sorted(connected_components(complement(g)), key=lambda c: c[0])
    sizes = [len(c) for c in comps]
    # feasible[k][s]: some subset of comps[k:] sums to s
    feasible = [[False] * (target + 1) for _ in range(len(comps) + 1)]
    feasible[len(comps)][0] = True
    for k in range(len(comps) - 1, -1, -1):
        for s in range(target + 1):
            feasible[k][s] = feasible[k + 1][s] or (s >= sizes[k] and feasible[k + 1][s - sizes[k]])
    if not feasible[0][target]:
        return None
    v1: list[int] = []
    need = target
    for k, comp in enumerate(comps):
        if need >= sizes[k] and feasible[k + 1][need - sizes[k]]:
            v1.extend(comp)
            need -= sizes[k]
    v1.sort()
    v2 = sorted(set(range(1, n + 1)) - set(v1))
    return v1, v2


# ---------------------------------------------------------------------------
# Directed graphs


def mirror_graph(g: CommGraph) -> CommGraph:
    """Undirected graph of the mutually linked pairs of a digraph."""
    _require_directed(g, "mirror_graph")
    return CommGraph(
        g.n, False, frozenset((u, v) for u, v in g.edges if u < v and (v, u) in g.edges)
    )


def _reach(n: int, adj: dict[int, set[int]], start: int) -> set[int]:
    seen, stack = {start}, [start]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def is_strongly_connected(g: CommGraph) -> bool:
    _require_directed(g, "is_strongly_connected")
    if g.n <= 1:
        return True
    fwd = {a: set() for a in range(1, g.n + 1)}
    back = {a: set() for a in range(1, g.n + 1)}
    for u, v in g.edges:
        fwd[u].add(v)
        back[v].add(u)
    return len(_reach(g.n, fwd, 1)) == g.n and len(_reach(g.n, back, 1)) == g.n


def reachable_from(g: CommGraph, start: int) -> set[int]:
    """Vertices reachable from ``start`` (following arc direction when directed)."""
    adj = {a: set(g.neighbors(a)) for a in range(1, g.n + 1)}
    return _reach(g.n, adj, start)
