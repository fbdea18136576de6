import random
from fractions import Fraction

import pytest

from pnk.analysis import dist_leq
from pnk.bigstep import Kernel
from pnk.errors import BudgetExceededError
from pnk.linalg import SparseMatrix, mat_mul
from pnk.star import explore, mark_saturated, star_dist, to_dot
from pnk.syntax import (
    Assign, Choice, Drop, Seq, Skip, Star, Union, desugar, predicate_set,
)
from pnk.universe import EMPTY, FieldDecl, PacketUniverse

from conftest import random_program, random_set

UF = PacketUniverse([FieldDecl("f", 2)])
FLIP = Choice(Fraction(1, 2), Assign("f", 0), Assign("f", 1))


def body_row(p, u):
    k = Kernel(desugar(p), u)
    return lambda a: k.row(k.program, a)


def star_row(p, u, a, **kw):
    k = Kernel(desugar(Star(p)), u)
    return k.row(k.program, a)


def test_worked_example_graph():
    u = UF
    pi0, pi1 = u.packet(f=0), u.packet(f=1)
    a0 = frozenset({pi0})
    g = mark_saturated(explore(body_row(FLIP, u), a0))
    expect = {
        (frozenset({pi0}), EMPTY),
        (frozenset({pi0}), frozenset({pi0})),
        (frozenset({pi1}), frozenset({pi0})),
        (frozenset({pi0}), frozenset({pi0, pi1})),
        (frozenset({pi1}), frozenset({pi0, pi1})),
    }
    assert set(g.states) == expect
    half = Fraction(1, 2)
    for out in g.edges:
        assert sorted(p for _, p in out) == [half, half]
    # The two full-accumulator states are saturated and communicate.
    sat = {s for i, s in enumerate(g.states) if g.saturated[i]}
    assert sat == {(frozenset({pi0}), frozenset({pi0, pi1})),
                   (frozenset({pi1}), frozenset({pi0, pi1}))}
    idx = g.index
    i, j = idx[(frozenset({pi0}), frozenset({pi0, pi1}))], idx[(frozenset({pi1}), frozenset({pi0, pi1}))]
    assert any(t == j for t, _ in g.edges[i]) and any(t == i for t, _ in g.edges[j])


def test_worked_example_distribution():
    u = UF
    a0 = frozenset({u.packet(f=0)})
    assert star_row(FLIP, u, a0) == {u.all_packets(): Fraction(1)}


def test_star_of_skip_and_drop(uni2x2):
    rng = random.Random(0)
    for _ in range(20):
        a = random_set(rng, uni2x2)
        assert star_row(Skip(), uni2x2, a) == {a: Fraction(1)}
        assert star_row(Drop(), uni2x2, a) == {a: Fraction(1)}


def test_star_on_empty_input():
    g = explore(body_row(FLIP, UF), EMPTY)
    assert g.states == [(EMPTY, EMPTY)]
    assert g.edges[0] == [(0, Fraction(1))]
    assert star_row(FLIP, UF, EMPTY) == {EMPTY: Fraction(1)}


def test_budget_exceeded_names_program():
    with pytest.raises(BudgetExceededError) as err:
        star_dist(body_row(FLIP, UF), frozenset({0}), cap=2,
                  program_text=lambda: "offender")
    assert "offender" in str(err.value)


def test_saturation_of_contained_states():
    # (a, b) with a <= b and every successor staying inside b is saturated.
    u = UF
    g = mark_saturated(explore(body_row(Skip(), u), frozenset({0})))
    for i, (a, b) in enumerate(g.states):
        if a <= b:
            assert g.saturated[i]
    # The start state (a, {}) with a nonempty is never saturated.
    assert not g.saturated[g.start]


def test_empty_current_states_are_saturated(uni2x2):
    rng = random.Random(1)
    for _ in range(50):
        p = random_program(rng, uni2x2, 2, stars=0)
        a0 = random_set(rng, uni2x2)
        g = mark_saturated(explore(body_row(p, uni2x2), a0))
        for i, (a, b) in enumerate(g.states):
            if a == EMPTY:
                assert g.saturated[i]


def test_fixed_point_equation(uni2x2):
    rng = random.Random(2)
    for _ in range(150):
        p = random_program(rng, uni2x2, 2, stars=0)
        q = Union(Skip(), Seq(p, Star(p)))
        kq = Kernel(desugar(q), uni2x2)
        kstar = Kernel(desugar(Star(p)), uni2x2)
        for _ in range(3):
            a = random_set(rng, uni2x2)
            assert kq.apply(a).as_dict() == kstar.apply(a).as_dict()


def unrolling(p, n):
    out = Skip()
    for _ in range(n):
        out = Union(Skip(), Seq(p, out))
    return out


def test_unrollings_increase(uni2x2):
    rng = random.Random(3)
    for _ in range(100):
        p = random_program(rng, uni2x2, 2, stars=0)
        a = random_set(rng, uni2x2)
        prev = None
        for n in range(4):
            cur = Kernel(desugar(unrolling(p, n)), uni2x2).apply(a).as_dict()
            if prev is not None:
                assert dist_leq(prev, cur)
            prev = cur


def test_truncated_unrolling_converges_to_closed_form():
    # Contractive bodies: the n-th unrolling is within float tolerance of
    # the absorbing-chain answer for n = 64.
    u = UF
    cases = [FLIP, Choice(Fraction(1, 2), Assign("f", 0), Drop())]
    for p in cases:
        a = frozenset({u.packet(f=1)})
        exact = star_row(p, u, a)
        approx = Kernel(desugar(unrolling(p, 64)), u, exact=False).apply(a).as_dict()
        keys = set(exact) | set(approx)
        for b in keys:
            assert abs(float(exact.get(b, 0)) - approx.get(b, 0)) < 1e-9


# -- the chain-transform identity ------------------------------------------


def chain_matrices(g):
    """Explicit S and U over explored states plus canonical targets."""
    states = list(g.states)
    index = dict(g.index)

    def canon(b):
        s = (EMPTY, b)
        if s not in index:
            index[s] = len(states)
            states.append(s)
        return index[s]

    for i, (a, b) in enumerate(g.states):
        if g.saturated[i]:
            canon(b)
    n = len(states)
    explored = len(g.states)
    S = SparseMatrix(n, n)
    U = SparseMatrix(n, n)
    for i in range(n):
        if i < explored:
            for j, p in g.edges[i]:
                S.add(i, j, p)
        else:
            S.add(i, i, Fraction(1))  # canonical (0, b) self-loops
    for i, (a, b) in enumerate(states):
        saturated = g.saturated[i] if i < explored else True
        if saturated:
            U.add(i, index[(EMPTY, b)], Fraction(1))
        else:
            U.add(i, i, Fraction(1))
    return S, U


def test_usu_equals_su(uni2x2):
    rng = random.Random(4)
    for _ in range(60):
        p = random_program(rng, uni2x2, 2, stars=0)
        a0 = random_set(rng, uni2x2)
        g = mark_saturated(explore(body_row(p, uni2x2), a0))
        S, U = chain_matrices(g)
        SU = mat_mul(S, U)
        assert mat_mul(U, SU) == SU


def test_accumulator_monotone_on_edges(uni2x2):
    rng = random.Random(5)
    for _ in range(100):
        p = random_program(rng, uni2x2, 2, stars=0)
        a0 = random_set(rng, uni2x2)
        g = explore(body_row(p, uni2x2), a0)
        for i, out in enumerate(g.edges):
            _, b = g.states[i]
            for j, _ in out:
                assert b <= g.states[j][1]


def test_explored_rows_sum_to_one(uni2x2):
    rng = random.Random(6)
    for _ in range(100):
        p = random_program(rng, uni2x2, 2, stars=0)
        g = explore(body_row(p, uni2x2), random_set(rng, uni2x2))
        for out in g.edges:
            assert sum(p for _, p in out) == 1


def test_filtered_star_matches_post_filter(uni2x2):
    # Pushing a trailing predicate into the accumulator must not change
    # the composite result.
    rng = random.Random(7)
    from conftest import random_predicate
    for _ in range(100):
        p = random_program(rng, uni2x2, 2, stars=0)
        t = random_predicate(rng, uni2x2, 2)
        a0 = random_set(rng, uni2x2)
        bt = predicate_set(t, uni2x2)
        composite = Kernel(desugar(Seq(Star(p), t)), uni2x2).apply(a0).as_dict()
        plain = star_row(p, uni2x2, a0)
        expected = {}
        for b, pr in plain.items():
            expected[b & bt] = expected.get(b & bt, 0) + pr
        assert composite == expected


def test_dot_dump_regression():
    u = UF
    g = mark_saturated(explore(body_row(FLIP, u), frozenset({u.packet(f=0)})))
    dot = to_dot(g)
    assert dot.startswith("digraph")
    assert dot.count("peripheries=2") == 2
    assert dot.count("->") == 10
    assert '"1/2"' in dot
