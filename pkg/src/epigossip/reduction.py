"""SAT to gossip-with-negative-goals reduction, a truth-table SAT oracle, and
assignment extraction from gossip plans.

Each variable ``x`` gets four agents ``x``, ``not-x``, ``b_x``, ``d_x``; a
source agent ``a`` is linked to both literal agents and every clause agent to
the literal agents of its clause.  A plan must route ``s_a`` to every clause
agent, and the negation gadget lets it leave through at most one literal agent
per variable.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Optional

from .graph import CommGraph
from .knowledge import Change, Fluent, ParallelStep, Plan, SignedGoal, TwoWayCall
from .planner import ProblemInstance

Assignment = dict[int, bool]

MAX_ORACLE_VARS = 20


@dataclass(frozen=True)
class CnfFormula:
    """Clauses are frozensets of nonzero signed variable indices."""

    var_count: int
    clauses: tuple[frozenset[int], ...]

    def __post_init__(self):
        if self.var_count < 0:
            raise ValueError("var_count must be >= 0")
        clauses = tuple(frozenset(int(l) for l in c) for c in self.clauses)
        for c in clauses:
            if not c:
                raise ValueError("empty clause")
            for lit in c:
                if lit == 0 or abs(lit) > self.var_count:
                    raise ValueError(f"literal {lit} outside 1..{self.var_count}")
        object.__setattr__(self, "clauses", clauses)

    def normalized(self) -> "CnfFormula":
        """Tautologies dropped, repeated clauses merged, order kept."""
        seen, out = set(), []
        for c in self.clauses:
            if any(-l in c for l in c) or c in seen:
                continue
            seen.add(c)
            out.append(c)
        return CnfFormula(self.var_count, tuple(out))

    def satisfied_by(self, assignment: Assignment) -> bool:
        return all(any(assignment[abs(l)] == (l > 0) for l in c) for c in self.clauses)


def cnf(var_count: int, *clauses) -> CnfFormula:
    return CnfFormula(var_count, tuple(frozenset(c) for c in clauses))


def parse_dimacs(text: str) -> CnfFormula:
    var_count = None
    clauses: list[frozenset[int]] = []
    current: list[int] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValueError(f"line {lineno}: bad problem line {line!r}")
            var_count = int(parts[2])
            continue
        if var_count is None:
            raise ValueError(f"line {lineno}: clause before 'p cnf' header")
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise ValueError(f"line {lineno}: bad literal {tok!r}") from None
            if lit == 0:
                clauses.append(frozenset(current))
                current = []
            else:
                current.append(lit)
    if var_count is None:
        raise ValueError("missing 'p cnf' header")
    if current:
        clauses.append(frozenset(current))
    return CnfFormula(var_count, tuple(clauses))


def to_dimacs(f: CnfFormula) -> str:
    lines = [f"p cnf {f.var_count} {len(f.clauses)}"]
    for c in f.clauses:
        lines.append(" ".join(str(l) for l in sorted(c, key=lambda l: (abs(l), l))) + " 0")
    return "\n".join(lines) + "\n"


def sat_oracle(f: CnfFormula) -> Optional[Assignment]:
    """First satisfying assignment in truth-table order (all-false first)."""
    if f.var_count > MAX_ORACLE_VARS:
        raise ValueError(f"truth-table oracle limited to {MAX_ORACLE_VARS} variables")
    for values in product((False, True), repeat=f.var_count):
        a = {v + 1: values[v] for v in range(f.var_count)}
        if f.satisfied_by(a):
            return a
    return None


@dataclass(frozen=True)
class ReductionMap:
    source: int
    pos: dict[int, int]
    neg: dict[int, int]
    b: dict[int, int]
    d: dict[int, int]
    clause: tuple[int, ...]

    def literal_agent(self, lit: int) -> int:
        return self.pos[lit] if lit > 0 else self.neg[-lit]

    def roles(self) -> dict[int, str]:
        out = {self.source: "a"}
        for v in self.pos:
            out[self.pos[v]] = f"x{v}"
            out[self.neg[v]] = f"~x{v}"
            out[self.b[v]] = f"b{v}"
            out[self.d[v]] = f"d{v}"
        for j, c in enumerate(self.clause, 1):
            out[c] = f"c{j}"
        return out


def sat_to_gossip(f: CnfFormula) -> tuple[ProblemInstance, ReductionMap]:
    f = f.normalized()
    V, C = f.var_count, len(f.clauses)
    a = 1
    pos = {v: 2 + 4 * (v - 1) for v in range(1, V + 1)}
    neg = {v: pos[v] + 1 for v in pos}
    b = {v: pos[v] + 2 for v in pos}
    d = {v: pos[v] + 3 for v in pos}
    clause = tuple(2 + 4 * V + j for j in range(C))
    rmap = ReductionMap(a, pos, neg, b, d, clause)
    n = 1 + 4 * V + C

    edges = set()
    goals = set()
    for v in range(1, V + 1):
        x, nx = pos[v], neg[v]
        edges |= {(a, x), (a, nx), (b[v], x), (b[v], nx), (x, d[v]), (nx, d[v])}
        goals.add(SignedGoal(True, Fluent((d[v],), b[v])))
        goals.add(SignedGoal(False, Fluent((d[v],), a)))
    for c_agent, c in zip(clause, f.clauses):
        goals.add(SignedGoal(True, Fluent((c_agent,), a)))
        for lit in c:
            edges.add((rmap.literal_agent(lit), c_agent))
            goals.add(SignedGoal(False, Fluent((c_agent,), b[abs(lit)])))
    graph = CommGraph(n, False, frozenset(edges))
    return ProblemInstance(graph, "two-way", frozenset(goals), 1, False), rmap


class ExtractionError(RuntimeError):
    """The plan routes ``s_a`` out through both literals of some variable."""


def extract_assignment(plan: Plan, rmap: ReductionMap) -> Assignment:
    """x is true iff the literal agent x hands ``s_a`` on to some clause agent."""
    clause_agents = set(rmap.clause)
    literal_of = {ag: v for v, ag in rmap.pos.items()}
    literal_of.update({ag: -v for v, ag in rmap.neg.items()})
    knows_a = {rmap.source}
    used: set[int] = set()
    calls = []
    for item in plan.items:
        if isinstance(item, ParallelStep):
            calls.extend(item.calls)
        elif isinstance(item, Change):
            if item.i == rmap.source:
                knows_a = {rmap.source}
        else:
            calls.append(item)
        for c in calls:
            u, w = c.agents
            for lit_agent, other in ((u, w), (w, u)):
                if lit_agent in literal_of and other in clause_agents and lit_agent in knows_a:
                    used.add(literal_of[lit_agent])
            if isinstance(c, TwoWayCall):
                if u in knows_a or w in knows_a:
                    knows_a |= {u, w}
            elif u in knows_a:
                knows_a.add(w)
        calls = []
    both = sorted(v for v in rmap.pos if v in used and -v in used)
    if both:
        raise ExtractionError(f"s_a leaves through both literals of variable(s) {both}")
    return {v: v in used for v in sorted(rmap.pos)}
