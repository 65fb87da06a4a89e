"""Depth-bounded epistemic knowledge states and the action semantics.

A fluent ``K_{i1} ... K_{ir} s_j`` is identified with its canonical form, in
which consecutive repeated knowers are collapsed (``K_a K_a f == K_a f``).
Fluents whose innermost knower owns the secret are *self-evident*: they hold
in every reachable state and are never stored.

Internally a :class:`KnowledgeState` keeps, for every depth ``r`` below the cap
and every agent ``x``, an integer bitset over all (not necessarily canonical)
fluents ``f`` of depth ``r``; bit ``f`` of ``rows[r][x]`` is the truth value of
``K_x f``.  Non-canonical entries always mirror their canonical collapse, so a
query never has to canonicalize, and a whole call is a handful of big-integer
operations.
"""

from __future__ import annotations

import gc
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Iterable, Iterator, Sequence, Union


class DepthOverflowError(ValueError):
    """A query or goal goes deeper than the state's tracked depth."""


class InvalidStepError(ValueError):
    """A parallel step uses some agent twice."""


# ---------------------------------------------------------------------------
# Fluents


@dataclass(frozen=True, order=True)
class Fluent:
    """``K_{knowers[0]} ... K_{knowers[-1]} s_{secret}``; outermost knower first."""

    knowers: tuple[int, ...]
    secret: int

    def __post_init__(self):
        object.__setattr__(self, "knowers", tuple(int(k) for k in self.knowers))
        object.__setattr__(self, "secret", int(self.secret))

    @property
    def depth(self) -> int:
        return len(self.knowers)

    def prefixed(self, agent: int) -> "Fluent":
        """``K_agent self``, canonicalized."""
        if self.knowers and self.knowers[0] == agent:
            return self
        return Fluent((agent,) + self.knowers, self.secret)

    def agents(self) -> tuple[int, ...]:
        return self.knowers + (self.secret,)

    def __str__(self) -> str:
        return " ".join([f"K{k}" for k in self.knowers] + [f"s{self.secret}"])


def K(*agents: int) -> Fluent:
    """Shorthand: ``K(1, 2, 3)`` is ``K_1 K_2 s_3``."""
    if not agents:
        raise ValueError("K() needs at least the secret owner")
    return Fluent(tuple(agents[:-1]), agents[-1])


def canonicalize(f: Fluent) -> Fluent:
    out: list[int] = []
    for k in f.knowers:
        if not out or out[-1] != k:
            out.append(k)
    return Fluent(tuple(out), f.secret)


def is_canonical(f: Fluent) -> bool:
    return all(a != b for a, b in zip(f.knowers, f.knowers[1:]))


def is_self_evident(f: Fluent) -> bool:
    if f.depth == 0:
        raise ValueError("a bare secret is not a knowledge fluent")
    return f.knowers[-1] == f.secret


# ---------------------------------------------------------------------------
# Actions and plans


@dataclass(frozen=True, order=True)
class TwoWayCall:
    i: int
    j: int

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError(f"call endpoints must differ, got {self.i} twice")

    @property
    def agents(self) -> tuple[int, int]:
        return (self.i, self.j)

    def __str__(self):
        return f"CALL({self.i},{self.j})"


@dataclass(frozen=True, order=True)
class OneWayCall:
    sender: int
    receiver: int

    def __post_init__(self):
        if self.sender == self.receiver:
            raise ValueError(f"call endpoints must differ, got {self.sender} twice")

    @property
    def agents(self) -> tuple[int, int]:
        return (self.sender, self.receiver)

    def __str__(self):
        return f"SEND({self.sender},{self.receiver})"


@dataclass(frozen=True, order=True)
class Change:
    i: int

    @property
    def agents(self) -> tuple[int]:
        return (self.i,)

    def __str__(self):
        return f"CHANGE({self.i})"


@dataclass(frozen=True)
class ParallelStep:
    calls: tuple[TwoWayCall, ...] = ()

    def __post_init__(self):
        calls = tuple(self.calls)
        object.__setattr__(self, "calls", calls)
        seen: set[int] = set()
        for c in calls:
            for a in c.agents:
                if a in seen:
                    raise InvalidStepError(f"agent {a} appears twice in one step")
                seen.add(a)

    @property
    def agents(self) -> tuple[int, ...]:
        return tuple(a for c in self.calls for a in c.agents)

    def __str__(self):
        return "{" + ", ".join(str(c) for c in self.calls) + "}"


Action = Union[TwoWayCall, OneWayCall, Change]
PlanItem = Union[TwoWayCall, OneWayCall, Change, ParallelStep]

MODES = ("two-way", "one-way", "parallel")


@dataclass(frozen=True)
class Plan:
    """A sequence of actions (sequential modes) or parallel steps.

    ``metadata`` carries generator provenance such as the relabeling used and
    the item indices at which each pass ends.  It does not take part in
    equality.
    """

    mode: str
    items: tuple[PlanItem, ...] = ()
    metadata: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "items", tuple(self.items))

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def call_count(self) -> int:
        n = 0
        for item in self.items:
            if isinstance(item, ParallelStep):
                n += len(item.calls)
            elif not isinstance(item, Change):
                n += 1
        return n


# ---------------------------------------------------------------------------
# Signed goals


@dataclass(frozen=True, order=True)
class SignedGoal:
    positive: bool
    fluent: Fluent

    def __post_init__(self):
        if self.fluent.depth < 1:
            raise ValueError("goals need at least one knowledge operator")
        object.__setattr__(self, "fluent", canonicalize(self.fluent))

    def __str__(self):
        return str(self.fluent) if self.positive else f"not({self.fluent})"


def pos(*agents: int) -> SignedGoal:
    return SignedGoal(True, K(*agents))


def neg(*agents: int) -> SignedGoal:
    return SignedGoal(False, K(*agents))


def goal_T(n: int, r: int) -> frozenset[SignedGoal]:
    """All positive goals ``K_{i1} ... K_{i(r-1)} s_{ir}``, canonical, minus self-evident ones."""
    if r < 2:
        raise ValueError("goal_T needs r >= 2")
    return _goal_T(n, r)


@lru_cache(maxsize=64)
def _goal_T(n: int, r: int) -> frozenset[SignedGoal]:
    # Collapsing sequences of length r-1 yields exactly the canonical fluents
    # of depth 1..r-1, so enumerate those directly.
    # nothing here is cyclic, so the collector would only rescan the growing list
    paused = gc.isenabled()
    gc.disable()
    try:
        out = []
        agents = range(1, n + 1)
        layer = [(k,) for k in agents]
        for _ in range(r - 1):
            for ks in layer:
                last = ks[-1]
                for s in agents:
                    if s != last:
                        out.append(_trusted_goal(ks, s))
            layer = [ks + (k,) for ks in layer for k in agents if k != ks[-1]]
        return frozenset(out)
    finally:
        if paused:
            gc.enable()


def _trusted_goal(knowers: tuple[int, ...], secret: int) -> SignedGoal:
    """Positive goal from an already canonical fluent, skipping validation."""
    f = object.__new__(Fluent)
    object.__setattr__(f, "knowers", knowers)
    object.__setattr__(f, "secret", secret)
    g = object.__new__(SignedGoal)
    object.__setattr__(g, "positive", True)
    object.__setattr__(g, "fluent", f)
    return g


# ---------------------------------------------------------------------------
# Bitset plumbing (agents are 0-based below this line)


@lru_cache(maxsize=None)
def _repunit(n: int, r: int) -> int:
    """Ones at every n^2-th bit, covering n^(r+1) bits; r >= 1."""
    out = 0
    step = n * n
    for t in range(n ** (r - 1)):
        out |= 1 << (t * step)
    return out


@lru_cache(maxsize=None)
def _self_evident_mask(n: int, r: int) -> int:
    """Bits of depth-r fluents (r >= 1) whose last knower equals the secret."""
    block = 0
    for k in range(n):
        block |= 1 << (k * n + k)
    return block * _repunit(n, r)


@lru_cache(maxsize=None)
def _secret_mask(n: int, r: int, i: int) -> int:
    """Depth-r bits with secret i and last knower != i (what CHANGE_i erases)."""
    if r == 0:
        return 1 << i
    block = 0
    for k in range(n):
        if k != i:
            block |= 1 << (k * n + i)
    return block * _repunit(n, r)


@lru_cache(maxsize=None)
def _full_mask(n: int, r: int) -> int:
    return (1 << n ** (r + 1)) - 1


@lru_cache(maxsize=None)
def _initial_rows(n: int, cap: int) -> tuple[tuple[int, ...], ...]:
    rows = [tuple(1 << x for x in range(n))]
    for r in range(1, cap):
        m = _self_evident_mask(n, r)
        rows.append((m,) * n)
    return tuple(rows)


def _index(n: int, digits: Sequence[int]) -> int:
    idx = 0
    for d in digits:
        idx = idx * n + d
    return idx


def _two_way(rows, n: int, i: int, j: int):
    new = []
    prev = 0
    for r, level in enumerate(rows):
        a = level[i] | level[j]
        if r:
            w = n**r
            a |= (prev << (i * w)) | (prev << (j * w))
        prev = a
        if a == level[i] and a == level[j]:
            new.append(level)
            continue
        lv = list(level)
        lv[i] = lv[j] = a
        new.append(tuple(lv))
    return tuple(new)


def _one_way(rows, n: int, s: int, t: int):
    new = []
    prev = 0
    for r, level in enumerate(rows):
        b = level[t] | level[s]
        if r:
            b |= prev << (t * n**r)
        prev = b
        if b == level[t]:
            new.append(level)
            continue
        lv = list(level)
        lv[t] = b
        new.append(tuple(lv))
    return tuple(new)


def _change(rows, n: int, i: int):
    new = []
    for r, level in enumerate(rows):
        keep = ~_secret_mask(n, r, i)
        if r == 0:
            new.append(tuple(v if x == i else v & keep for x, v in enumerate(level)))
        else:
            new.append(tuple(v & keep for v in level))
    return tuple(new)


def _apply_rows(rows, n: int, item):
    if isinstance(item, TwoWayCall):
        return _two_way(rows, n, item.i - 1, item.j - 1)
    if isinstance(item, OneWayCall):
        return _one_way(rows, n, item.sender - 1, item.receiver - 1)
    if isinstance(item, Change):
        return _change(rows, n, item.i - 1)
    if isinstance(item, ParallelStep):
        for c in item.calls:
            rows = _two_way(rows, n, c.i - 1, c.j - 1)
        return rows
    raise TypeError(f"not an action: {item!r}")


# ---------------------------------------------------------------------------
# Knowledge states


@dataclass(frozen=True)
class KnowledgeState:
    n: int
    depth_cap: int
    rows: tuple[tuple[int, ...], ...] = field(repr=False)

    # -- queries -----------------------------------------------------------

    def _check_agent(self, a: int):
        if not 1 <= a <= self.n:
            raise ValueError(f"agent {a} out of range 1..{self.n}")

    def is_true(self, f: Fluent) -> bool:
        for a in f.agents():
            self._check_agent(a)
        if f.depth == 0:
            return True
        if f.depth > self.depth_cap:
            raise DepthOverflowError(
                f"fluent {f} has depth {f.depth}, state tracks up to {self.depth_cap}"
            )
        digits = [k - 1 for k in f.knowers[1:]] + [f.secret - 1]
        bit = _index(self.n, digits)
        return bool(self.rows[f.depth - 1][f.knowers[0] - 1] >> bit & 1)

    def knows(self, a: int, f: Fluent) -> bool:
        if f.depth > self.depth_cap - 1:
            raise DepthOverflowError(
                f"K_{a} {f} has depth {f.depth + 1}, state tracks up to {self.depth_cap}"
            )
        return self.is_true(Fluent((a,) + f.knowers, f.secret))

    def iter_truths(self) -> Iterator[Fluent]:
        n = self.n
        for r, level in enumerate(self.rows):
            for x, bits in enumerate(level):
                while bits:
                    low = bits & -bits
                    idx = low.bit_length() - 1
                    bits ^= low
                    digits = []
                    for _ in range(r + 1):
                        idx, d = divmod(idx, n)
                        digits.append(d + 1)
                    digits.reverse()
                    knowers = (x + 1,) + tuple(digits[:-1])
                    f = Fluent(knowers, digits[-1])
                    if is_canonical(f) and not is_self_evident(f):
                        yield f

    @property
    def truths(self) -> frozenset[Fluent]:
        """The stored (canonical, non-self-evident) true fluents."""
        return frozenset(self.iter_truths())

    def restrict(self, depth_cap: int) -> "KnowledgeState":
        if not 1 <= depth_cap <= self.depth_cap:
            raise ValueError(f"cannot restrict cap {self.depth_cap} to {depth_cap}")
        return KnowledgeState(self.n, depth_cap, self.rows[:depth_cap])

    # -- transitions -------------------------------------------------------

    def apply(self, item: PlanItem) -> "KnowledgeState":
        for a in item.agents:
            self._check_agent(a)
        return KnowledgeState(self.n, self.depth_cap, _apply_rows(self.rows, self.n, item))

    def run(self, items: Iterable[PlanItem]) -> "KnowledgeState":
        st = self
        for item in items:
            st = st.apply(item)
        return st

    @classmethod
    def from_truths(cls, n: int, depth_cap: int, truths: Iterable[Fluent]) -> "KnowledgeState":
        """Build a state from an explicit set of canonical truths.

        Intended for tests and small n: it visits every entry of every row.
        The caller is responsible for the set being consistent (closed under
        dropping outer knowers), as every reachable state is.
        """
        truths = {canonicalize(f) for f in truths}
        rows = []
        for r in range(depth_cap):
            level = []
            for x in range(1, n + 1):
                bits = 0
                for idx, digits in enumerate(product(range(1, n + 1), repeat=r + 1)):
                    f = canonicalize(Fluent((x,) + digits[:-1], digits[-1]))
                    if is_self_evident(f) or f in truths:
                        bits |= 1 << idx
                level.append(bits)
            rows.append(tuple(level))
        return cls(n, depth_cap, tuple(rows))


def initial_state(n: int, depth_cap: int) -> KnowledgeState:
    if n < 1 or depth_cap < 1:
        raise ValueError("need n >= 1 and depth_cap >= 1")
    return KnowledgeState(n, depth_cap, _initial_rows(n, depth_cap))


def is_true(st: KnowledgeState, f: Fluent) -> bool:
    return st.is_true(f)


def knows(st: KnowledgeState, a: int, f: Fluent) -> bool:
    return st.knows(a, f)


def apply_two_way(st: KnowledgeState, i: int, j: int) -> KnowledgeState:
    return st.apply(TwoWayCall(i, j))


def apply_one_way(st: KnowledgeState, sender: int, receiver: int) -> KnowledgeState:
    return st.apply(OneWayCall(sender, receiver))


def apply_change(st: KnowledgeState, i: int) -> KnowledgeState:
    return st.apply(Change(i))


def apply_parallel_step(st: KnowledgeState, step: ParallelStep | Iterable[TwoWayCall]) -> KnowledgeState:
    if not isinstance(step, ParallelStep):
        step = ParallelStep(tuple(step))
    return st.apply(step)
