import random
from itertools import combinations, product

import pytest

from epigossip.knowledge import Change, Plan, TwoWayCall, neg, pos
from epigossip.planner import ProblemInstance, solve_neg, verify
from epigossip.reduction import (
    MAX_ORACLE_VARS,
    CnfFormula,
    ExtractionError,
    cnf,
    extract_assignment,
    parse_dimacs,
    sat_oracle,
    sat_to_gossip,
    to_dimacs,
)


def truth_table(f):
    return any(
        f.satisfied_by({v + 1: vals[v] for v in range(f.var_count)})
        for vals in product((False, True), repeat=f.var_count)
    )


# -- formulas


def test_cnf_validation():
    with pytest.raises(ValueError):
        cnf(1, [])
    with pytest.raises(ValueError):
        cnf(1, [2])
    with pytest.raises(ValueError):
        cnf(1, [0])


def test_normalized_drops_tautologies_and_repeats():
    f = cnf(2, [1, -1], [1, 2], [2, 1], [2, 2])
    assert f.normalized().clauses == (frozenset({1, 2}), frozenset({2}))


def test_dimacs_round_trip():
    text = "c a comment\np cnf 3 2\n1 -2 0\n3 2\n-1 0\n"
    f = parse_dimacs(text)
    assert f.var_count == 3
    assert f.clauses == (frozenset({1, -2}), frozenset({3, 2, -1}))
    assert parse_dimacs(to_dimacs(f)) == f


@pytest.mark.parametrize("text", ["1 2 0\n", "p cnf 2\n", "p cnf 2 1\n1 x 0\n", "p cnf 1 1\n2 0\n", ""])
def test_dimacs_errors(text):
    with pytest.raises(ValueError):
        parse_dimacs(text)


def test_sat_oracle_examples():
    assert sat_oracle(cnf(2, [1, 2], [-1])) == {1: False, 2: True}
    assert sat_oracle(cnf(1, [1], [-1])) is None
    assert sat_oracle(CnfFormula(3, ())) == {1: False, 2: False, 3: False}
    with pytest.raises(ValueError):
        sat_oracle(CnfFormula(MAX_ORACLE_VARS + 1, ()))


# -- construction


def test_single_clause_instance():
    inst, rmap = sat_to_gossip(cnf(1, [1]))
    assert inst.n == 6
    assert len(inst.graph.edges) == 7
    assert len(inst.goals) == 4
    assert inst.depth_cap == 1 and inst.mode == "two-way" and not inst.allow_change
    plan = solve_neg(inst)
    assert verify(inst, plan).success
    assert extract_assignment(plan, rmap) == {1: True}


def test_negative_unit_clause():
    inst, rmap = sat_to_gossip(cnf(1, [-1]))
    plan = solve_neg(inst)
    assert extract_assignment(plan, rmap) == {1: False}


def test_gadget_goals():
    inst, rmap = sat_to_gossip(cnf(2, [1, -2]))
    a, c = rmap.source, rmap.clause[0]
    for v in (1, 2):
        assert pos(rmap.d[v], rmap.b[v]) in inst.goals
        assert neg(rmap.d[v], a) in inst.goals
        assert neg(c, rmap.b[v]) in inst.goals
    assert pos(c, a) in inst.goals
    assert inst.graph.has_edge(rmap.pos[1], c) and inst.graph.has_edge(rmap.neg[2], c)
    assert not inst.graph.has_edge(rmap.neg[1], c)


def random_cnf(rng, v, c):
    clauses = []
    for _ in range(c):
        size = rng.randint(1, min(3, v))
        vars_ = rng.sample(range(1, v + 1), size)
        clauses.append([x if rng.random() < 0.5 else -x for x in vars_])
    return cnf(v, *clauses)


@pytest.mark.parametrize("seed", range(30))
def test_reduction_size_is_exact(seed):
    rng = random.Random(seed)
    f = random_cnf(rng, rng.randint(1, 6), rng.randint(1, 6)).normalized()
    inst, rmap = sat_to_gossip(f)
    v, c = f.var_count, len(f.clauses)
    assert inst.n == 1 + 4 * v + c
    assert len(inst.graph.edges) == 6 * v + sum(len(cl) for cl in f.clauses)
    roles = rmap.roles()
    assert sorted(roles) == list(range(1, inst.n + 1))
    assert len(set(roles.values())) == inst.n


# -- equivalence


def test_contradiction_unsolvable():
    inst, _ = sat_to_gossip(cnf(1, [1], [-1]))
    assert solve_neg(inst) is None


def test_two_assignments_for_disjunction():
    inst, rmap = sat_to_gossip(cnf(2, [1, 2]))
    seen = set()
    for seed in range(20):
        plan = solve_neg(inst, seed=seed)
        assert verify(inst, plan).success
        a = extract_assignment(plan, rmap)
        assert a[1] or a[2]
        seen.add(tuple(sorted(a.items())))
    assert len(seen) >= 2


def small_family(max_vars=2, max_clauses=2):
    for v in range(1, max_vars + 1):
        lits = [x for x in range(-v, v + 1) if x]
        clause_pool = [frozenset(s) for k in range(1, v + 1) for s in combinations(lits, k)]
        for c in range(1, max_clauses + 1):
            for clauses in combinations(clause_pool, c):
                yield CnfFormula(v, clauses)


@pytest.mark.parametrize("f", list(small_family()), ids=str)
def test_small_family_equivalence(f):
    inst, rmap = sat_to_gossip(f)
    plan = solve_neg(inst)
    assert (plan is not None) == (sat_oracle(f) is not None) == truth_table(f)
    if plan is not None:
        assert verify(inst, plan).success
        assert f.satisfied_by(extract_assignment(plan, rmap))


@pytest.mark.parametrize(
    "f",
    [cnf(1, [1]), cnf(1, [1], [-1]), cnf(2, [1, 2], [-1]), cnf(2, [1], [-1, 2], [-2]), cnf(3, [1], [-2], [-1, 2])],
    ids=str,
)
def test_change_does_not_help(f):
    inst, _ = sat_to_gossip(f)
    with_change = ProblemInstance(inst.graph, inst.mode, inst.goals, inst.depth_cap, True)
    plan = solve_neg(with_change)
    assert (plan is not None) == (sat_oracle(f) is not None)
    if plan is not None:
        assert verify(with_change, plan).success


def test_extraction_rejects_double_transit():
    inst, rmap = sat_to_gossip(cnf(1, [1], [-1]))
    a, x, nx = rmap.source, rmap.pos[1], rmap.neg[1]
    c1, c2 = rmap.clause
    plan = Plan("two-way", tuple(TwoWayCall(*e) for e in [(a, x), (a, nx), (x, c1), (nx, c2)]))
    with pytest.raises(ExtractionError):
        extract_assignment(plan, rmap)


def test_extraction_follows_source_changes():
    inst, rmap = sat_to_gossip(cnf(1, [1]))
    a, x, c = rmap.source, rmap.pos[1], rmap.clause[0]
    # the old secret is gone once a changes it, so x passes nothing on
    plan = Plan("two-way", (TwoWayCall(a, x), Change(a), TwoWayCall(x, c)))
    assert extract_assignment(plan, rmap) == {1: False}
