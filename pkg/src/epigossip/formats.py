"""Text formats for problem instances and plans.

Problem files are line oriented, ``#`` starts a comment::

    agents 2
    mode two-way
    depth 1
    change off
    edge 1 2
    goal + 1 2        # K_1 s_2
    goal - 2 1        # not K_2 s_1
    goal-all-depth 2  # every goal of the full depth-2 task

Plan files hold one item per line: ``call I J``, ``send I J``, ``change I``
or ``step call I J; call K L``.
"""

from __future__ import annotations

import re

from .graph import CommGraph
from .knowledge import (
    MODES,
    Change,
    Fluent,
    InvalidStepError,
    OneWayCall,
    ParallelStep,
    Plan,
    SignedGoal,
    TwoWayCall,
    goal_T,
    is_self_evident,
)
from .planner import ProblemInstance


class ParseError(ValueError):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col
        self.message = message


_TOKEN = re.compile(r"\S+")


def _tokens(line: str) -> list[tuple[str, int]]:
    body = line.split("#", 1)[0]
    return [(m.group(), m.start() + 1) for m in _TOKEN.finditer(body)]


def _int(tok: tuple[str, int], lineno: int, what: str) -> int:
    text, col = tok
    try:
        return int(text)
    except ValueError:
        raise ParseError(lineno, col, f"expected {what}, got {text!r}") from None


def _arity(toks, lineno: int, count: int):
    if len(toks) - 1 != count:
        col = toks[min(len(toks) - 1, count + 1)][1] if len(toks) > count + 1 else toks[-1][1]
        raise ParseError(lineno, col, f"{toks[0][0]} takes {count} argument(s), got {len(toks) - 1}")


def parse_problem(text: str) -> ProblemInstance:
    n = None
    mode = None
    depth = None
    change = False
    edges: list[tuple[int, int]] = []
    goals: list[tuple[SignedGoal, int, int]] = []
    all_depths: list[tuple[int, int, int]] = []

    def agent(tok, lineno):
        a = _int(tok, lineno, "an agent number")
        if not 1 <= a <= n:
            raise ParseError(lineno, tok[1], f"agent {a} out of range 1..{n}")
        return a

    for lineno, line in enumerate(text.splitlines(), 1):
        toks = _tokens(line)
        if not toks:
            continue
        word, col = toks[0]
        if word != "agents" and n is None:
            raise ParseError(lineno, col, f"'{word}' before 'agents'")
        if word == "agents":
            _arity(toks, lineno, 1)
            if n is not None:
                raise ParseError(lineno, col, "repeated 'agents'")
            n = _int(toks[1], lineno, "an agent count")
            if n < 1:
                raise ParseError(lineno, toks[1][1], "need at least one agent")
        elif word == "mode":
            _arity(toks, lineno, 1)
            if toks[1][0] not in MODES:
                raise ParseError(lineno, toks[1][1], f"unknown mode {toks[1][0]!r}")
            if edges and (toks[1][0] == "one-way") != (mode == "one-way"):
                raise ParseError(lineno, col, "mode/edge mismatch: 'mode' must come before edges")
            mode = toks[1][0]
        elif word == "depth":
            _arity(toks, lineno, 1)
            depth = _int(toks[1], lineno, "a depth")
            if depth < 1:
                raise ParseError(lineno, toks[1][1], "depth must be at least 1")
        elif word == "change":
            _arity(toks, lineno, 1)
            if toks[1][0] not in ("on", "off"):
                raise ParseError(lineno, toks[1][1], "expected 'on' or 'off'")
            change = toks[1][0] == "on"
        elif word == "edge":
            _arity(toks, lineno, 2)
            if mode is None:
                mode = "two-way"
            u, v = agent(toks[1], lineno), agent(toks[2], lineno)
            if u == v:
                raise ParseError(lineno, toks[2][1], f"self-loop on agent {u}")
            edges.append((u, v))
        elif word == "goal":
            if len(toks) < 4:
                raise ParseError(lineno, col, "goal needs a sign, at least one knower and a secret")
            sign, scol = toks[1]
            if sign not in ("+", "-"):
                raise ParseError(lineno, scol, f"expected '+' or '-', got {sign!r}")
            agents = [agent(t, lineno) for t in toks[2:]]
            f = Fluent(tuple(agents[:-1]), agents[-1])
            if sign == "-" and is_self_evident(f):
                raise ParseError(lineno, scol, f"negative goal on self-evident fluent {f}")
            goals.append((SignedGoal(sign == "+", f), lineno, col))
        elif word == "goal-all-depth":
            _arity(toks, lineno, 1)
            d = _int(toks[1], lineno, "a depth")
            if d < 1:
                raise ParseError(lineno, toks[1][1], "depth must be at least 1")
            all_depths.append((d, lineno, col))
        else:
            raise ParseError(lineno, col, f"unknown directive {word!r}")

    if n is None:
        raise ParseError(1, 1, "missing 'agents'")
    mode = mode or "two-way"
    if depth is None:
        depth = max([g.fluent.depth for g, _, _ in goals] + [d for d, _, _ in all_depths] + [1])
    for g, lineno, col in goals:
        if g.fluent.depth > depth:
            raise ParseError(lineno, col, f"depth overflow: goal {g} deeper than depth {depth}")
    expanded = {g for g, _, _ in goals}
    for d, lineno, col in all_depths:
        if d > depth:
            raise ParseError(lineno, col, f"depth overflow: goal-all-depth {d} exceeds depth {depth}")
        expanded |= goal_T(n, d + 1)
    graph = CommGraph(n, mode == "one-way", frozenset(edges))
    return ProblemInstance(graph, mode, frozenset(expanded), depth, change)


def _goal_line(g: SignedGoal) -> str:
    f = g.fluent
    agents = " ".join(str(a) for a in (*f.knowers, f.secret))
    return f"goal {'+' if g.positive else '-'} {agents}"


def serialize_problem(inst: ProblemInstance) -> str:
    """Canonical text: fixed directive order, sorted edges and goals.

    A goal set that is exactly the full task of some depth is written as a
    single ``goal-all-depth`` line.
    """
    lines = [
        f"agents {inst.graph.n}",
        f"mode {inst.mode}",
        f"depth {inst.depth_cap}",
        f"change {'on' if inst.allow_change else 'off'}",
    ]
    lines += [f"edge {u} {v}" for u, v in inst.graph.sorted_edges()]
    d = inst.goal_depth
    if d >= 1 and inst.goals == goal_T(inst.graph.n, d + 1):
        lines.append(f"goal-all-depth {d}")
    else:
        lines += [_goal_line(g) for g in inst.sorted_goals()]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Plans


def _call(word: str, toks, lineno: int):
    if len(toks) != 2:
        raise ParseError(lineno, toks[0][1] if toks else 1, f"'{word}' takes 2 agents")
    u, v = (_int(t, lineno, "an agent number") for t in toks)
    if u == v:
        raise ParseError(lineno, toks[1][1], f"call endpoints must differ, got {u} twice")
    return TwoWayCall(u, v) if word == "call" else OneWayCall(u, v)


def parse_plan(text: str, mode: str | None = None) -> Plan:
    """Parse a plan; the mode is inferred from the items unless given.

    In parallel mode a bare ``call`` line is read as a one-call step.
    """
    items = []
    kinds = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        toks = _tokens(line)
        if not toks:
            continue
        word, col = toks[0]
        if word in ("call", "send"):
            items.append(_call(word, toks[1:], lineno))
            kinds.add(word)
        elif word == "change":
            _arity(toks, lineno, 1)
            items.append(Change(_int(toks[1], lineno, "an agent number")))
        elif word == "step":
            body = line.split("#", 1)[0]
            start = body.index("step") + 4
            calls = []
            offset = start
            for part in body[start:].split(";"):
                sub = [(m.group(), offset + m.start() + 1) for m in _TOKEN.finditer(part)]
                offset += len(part) + 1
                if not sub:
                    continue
                if sub[0][0] != "call":
                    raise ParseError(lineno, sub[0][1], f"expected 'call' inside a step, got {sub[0][0]!r}")
                calls.append(_call("call", sub[1:], lineno))
            try:
                items.append(ParallelStep(tuple(calls)))
            except InvalidStepError as exc:
                raise ParseError(lineno, col, str(exc)) from None
            kinds.add("step")
        else:
            raise ParseError(lineno, col, f"unknown plan item {word!r}")
    if mode is None:
        if "step" in kinds:
            mode = "parallel"
        elif "send" in kinds:
            mode = "one-way"
        else:
            mode = "two-way"
    if mode == "parallel":
        items = [ParallelStep((it,)) if isinstance(it, TwoWayCall) else it for it in items]
    return Plan(mode, tuple(items))


def _item_line(item) -> str:
    if isinstance(item, TwoWayCall):
        return f"call {item.i} {item.j}"
    if isinstance(item, OneWayCall):
        return f"send {item.sender} {item.receiver}"
    if isinstance(item, Change):
        return f"change {item.i}"
    return "step " + "; ".join(f"call {c.i} {c.j}" for c in item.calls)


def serialize_plan(plan: Plan) -> str:
    return "".join(_item_line(it) + "\n" for it in plan.items)
