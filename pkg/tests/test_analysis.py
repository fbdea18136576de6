import random
from fractions import Fraction

import pytest

from pnk.analysis import (
    InputSpec, QuerySpec, TruncatedRun, dist_leq, dist_leq_bruteforce, equiv,
    estimate, leq, query, sample_run,
)
from pnk.bigstep import Kernel
from pnk.errors import ConditioningError, WellFormednessError
from pnk.parser import parse
from pnk.syntax import (
    Assign, Choice, Drop, Neg, Skip, Star, Test, Union, desugar,
)
from pnk.universe import EMPTY, FieldDecl, PacketUniverse

from conftest import random_dist, random_program, random_set

UF = PacketUniverse([FieldDecl("f", 2)])


def delta(s):
    return {s: Fraction(1)}


# -- the distribution order ---------------------------------------------------

def test_bottom_below_everything(uni2x2):
    rng = random.Random(0)
    for _ in range(50):
        mu = random_dist(rng, uni2x2)
        assert dist_leq(delta(EMPTY), mu)


def test_superset_point_mass_dominates(uni2x2):
    a = frozenset({0})
    b = frozenset({0, 1})
    assert dist_leq(delta(a), delta(b))
    assert not dist_leq(delta(b), delta(a))


def test_incomparable_pair():
    # Enumerated by hand over the two-packet universe: mixing over singletons
    # and a point mass on one singleton disagree in both directions.
    u = UF
    pi0, pi1 = frozenset({u.packet(f=0)}), frozenset({u.packet(f=1)})
    mu = {pi0: Fraction(1, 2), pi1: Fraction(1, 2)}
    nu = delta(pi0)
    assert not dist_leq(mu, nu)  # up-set of {pi1} has mass 1/2 vs 0
    assert not dist_leq(nu, mu)  # up-set of {pi0} has mass 1 vs 1/2
    assert not dist_leq_bruteforce(mu, nu, u.all_packets())
    assert not dist_leq_bruteforce(nu, mu, u.all_packets())


def test_meet_closure_matches_bruteforce(uni8):
    rng = random.Random(1)
    for _ in range(300):
        mu = random_dist(rng, uni8, support=rng.randrange(1, 4))
        nu = random_dist(rng, uni8, support=rng.randrange(1, 4))
        fast = dist_leq(mu, nu)
        slow = dist_leq_bruteforce(mu, nu, uni8.all_packets())
        assert fast == slow


# -- equivalence and ordering ---------------------------------------------------

def test_self_mixing_is_identity(uni2x2):
    rng = random.Random(2)
    for _ in range(50):
        p = random_program(rng, uni2x2, 2, stars=1)
        v = equiv(Choice(Fraction(1, 2), p, p), p,
                  InputSpec.full_universe(uni2x2), uni2x2)
        assert v.result == "equal"


def test_loop_termination_example():
    u = UF
    loop = parse("while !(f=0) do (skip +[1/2] f:=0)", u)
    v = equiv(loop, parse("f:=0", u), InputSpec.full_universe(u), u)
    assert v.result == "equal"


def test_witness_on_distinct_assignments():
    u = UF
    pi0 = frozenset({u.packet(f=0)})
    v = equiv(parse("f:=0", u), parse("f:=1", u), InputSpec.of_sets([pi0]), u)
    assert v.result == "not-equal"
    w = v.witness
    assert w.input_set == pi0
    # The earliest differing output set in index order.
    assert w.output_set == pi0
    assert (w.left_prob, w.right_prob) == (1, 0)


def test_witness_reproduces_discrepancy(uni2x2):
    rng = random.Random(3)
    found = 0
    while found < 30:
        p = random_program(rng, uni2x2, 2, stars=0)
        q = random_program(rng, uni2x2, 2, stars=0)
        v = equiv(p, q, InputSpec.full_universe(uni2x2), uni2x2)
        if v.result != "not-equal":
            continue
        found += 1
        kp, kq = Kernel(desugar(p), uni2x2), Kernel(desugar(q), uni2x2)
        w = v.witness
        assert kp.apply(w.input_set).prob(w.output_set) == w.left_prob
        assert kq.apply(w.input_set).prob(w.output_set) == w.right_prob


def test_drop_below_everything(uni2x2):
    rng = random.Random(4)
    for _ in range(30):
        p = random_program(rng, uni2x2, 2, stars=0)
        assert leq(Drop(), p, InputSpec.full_universe(uni2x2), uni2x2).result == "leq"


def test_union_enlarges(uni2x2):
    rng = random.Random(5)
    for _ in range(100):
        p = random_program(rng, uni2x2, 2, stars=0)
        q = random_program(rng, uni2x2, 2, stars=0)
        assert leq(p, Union(p, q), InputSpec.full_universe(uni2x2),
                   uni2x2).result == "leq"


def test_order_axioms(uni2x2):
    rng = random.Random(6)
    spec = InputSpec.full_universe(uni2x2)
    for _ in range(25):
        p = random_program(rng, uni2x2, 2, stars=0)
        q = random_program(rng, uni2x2, 2, stars=0)
        assert equiv(p, p, spec, uni2x2).result == "equal"
        assert leq(p, p, spec, uni2x2).result == "leq"
        pq = equiv(p, q, spec, uni2x2).result == "equal"
        qp = equiv(q, p, spec, uni2x2).result == "equal"
        assert pq == qp
        if pq:
            assert leq(p, q, spec, uni2x2).result == "leq"
            assert leq(q, p, spec, uni2x2).result == "leq"


def test_leq_transitive(uni2x2):
    rng = random.Random(7)
    spec = InputSpec.full_universe(uni2x2)
    for _ in range(40):
        p = random_program(rng, uni2x2, 1, stars=0)
        q = Union(p, random_program(rng, uni2x2, 1, stars=0))
        r = Union(q, random_program(rng, uni2x2, 1, stars=0))
        assert leq(p, q, spec, uni2x2).result == "leq"
        assert leq(q, r, spec, uni2x2).result == "leq"
        assert leq(p, r, spec, uni2x2).result == "leq"


def test_leq_witness_is_failing_upset(uni2x2):
    u = uni2x2
    p, q = Assign("f", 0), Assign("f", 1)
    v = leq(p, q, InputSpec.full_universe(u), u)
    assert v.result == "not-leq"
    kp, kq = Kernel(p, u), Kernel(q, u)
    w = v.witness
    mu = kp.apply(w.input_set).as_dict()
    nu = kq.apply(w.input_set).as_dict()
    up_mu = sum(pr for b, pr in mu.items() if w.output_set <= b)
    up_nu = sum(pr for b, pr in nu.items() if w.output_set <= b)
    assert (up_mu, up_nu) == (w.left_prob, w.right_prob)
    assert up_mu > up_nu


def test_det_fast_path_agrees_with_full_enumeration(uni2x2):
    rng = random.Random(8)
    for _ in range(40):
        p = random_program(rng, uni2x2, 2, stars=0)
        q = random_program(rng, uni2x2, 2, stars=0)
        if any("Choice" in repr(x) for x in (p, q)):
            continue
        spec = InputSpec.full_universe(uni2x2)
        explicit = InputSpec.of_sets(list(spec.rows()))
        assert (equiv(p, q, spec, uni2x2).result
                == equiv(p, q, explicit, uni2x2).result)


def test_float_mode_reports_tolerance(uni2x2):
    p = Choice(Fraction(1, 2), Skip(), Skip())
    v = equiv(p, Skip(), InputSpec.full_universe(uni2x2), uni2x2,
              exact=False, tol=1e-9)
    assert v.result == "equal" and v.tolerance == 1e-9 and not v.exact


# -- queries -------------------------------------------------------------------

def test_query_drop_nonempty_is_zero(uni2x2):
    assert query(Drop(), uni2x2.all_packets(), QuerySpec.prob_nonempty(),
                 uni2x2) == 0


def test_query_prob_satisfies(uni2x2):
    u = uni2x2
    p = Choice(Fraction(1, 3), Assign("f", 0), Assign("f", 1))
    a = frozenset({u.packet(f=0, g=0)})
    assert query(p, a, QuerySpec.prob_satisfies(Test("f", 0), "all"), u) \
        == Fraction(1, 3)
    assert query(p, a, QuerySpec.prob_satisfies(Neg(Test("f", 0)), "some"), u) \
        == Fraction(2, 3)


def test_query_expected_field_and_cdf():
    u = PacketUniverse([FieldDecl("f", 4)])
    p = Choice(Fraction(1, 4), Assign("f", 3),
               Choice(Fraction(1, 3), Assign("f", 1), Drop()))
    a = frozenset({u.packet(f=0)})
    # Outcomes: f=3 w.p. 1/4, f=1 w.p. 1/4, drop w.p. 1/2.
    assert query(p, a, QuerySpec.expected_field("f"), u) == Fraction(2)
    assert query(p, a, QuerySpec.field_cdf("f", 1), u) == Fraction(1, 2)
    assert query(p, a, QuerySpec.field_cdf("f", 3), u) == 1


def test_query_conditioning_on_impossible_event(uni2x2):
    with pytest.raises(ConditioningError):
        query(Drop(), uni2x2.all_packets(), QuerySpec.expected_field("f"), uni2x2)


# -- the sampler ----------------------------------------------------------------

def test_sample_skip_is_identity(uni2x2):
    rng = random.Random(9)
    for _ in range(20):
        a = random_set(rng, uni2x2)
        assert sample_run(Skip(), a, uni2x2, random.Random(1)) == a


def test_estimate_bernoulli_within_three_sigma():
    u = UF
    p = Choice(Fraction(1, 2), Assign("f", 0), Assign("f", 1))
    a = frozenset({u.packet(f=0)})
    est = estimate(p, a, u, 10_000, seed=42)
    assert est.n_truncated == 0
    for b in (frozenset({u.packet(f=0)}), frozenset({u.packet(f=1)})):
        assert abs(est.prob(b) - 0.5) <= 3 * est.stderr(b) + 1e-12


def test_estimate_star_mass():
    u = UF
    p = Star(Choice(Fraction(1, 2), Assign("f", 0), Assign("f", 1)))
    a = frozenset({u.packet(f=0)})
    est = estimate(p, a, u, 10_000, seed=7, star_depth=64)
    assert est.n_truncated == 0
    assert est.prob(u.all_packets()) >= 1 - 2 ** -60


def test_truncation_is_reported_not_hidden():
    u = UF
    p = Star(Choice(Fraction(1, 2), Assign("f", 0), Assign("f", 1)))
    a = frozenset({u.packet(f=0)})
    est = estimate(p, a, u, 50, seed=3, star_depth=5)
    assert est.n_truncated == 50 and est.n_completed == 0
    with pytest.raises(TruncatedRun):
        sample_run(p, a, u, random.Random(0), star_depth=5)


def test_sampler_agrees_with_exact_pipeline(uni2x2):
    rng = random.Random(10)
    for _ in range(15):
        p = random_program(rng, uni2x2, 2, stars=1)
        a = random_set(rng, uni2x2)
        exact = Kernel(desugar(p), uni2x2).apply(a).as_dict()
        est = estimate(p, a, uni2x2, 4000, seed=rng.randrange(10 ** 6))
        assert est.n_truncated == 0
        for b in set(exact) | set(est.counts):
            p_exact = float(exact.get(b, 0))
            se = max(est.stderr(b), (p_exact * (1 - p_exact) / 4000) ** 0.5)
            assert abs(est.prob(b) - p_exact) <= 3 * se + 1e-9


def test_query_matches_estimate(uni2x2):
    rng = random.Random(11)
    for _ in range(10):
        p = random_program(rng, uni2x2, 2, stars=0)
        a = random_set(rng, uni2x2)
        exact = float(query(p, a, QuerySpec.prob_nonempty(), uni2x2))
        est = estimate(p, a, uni2x2, 4000, seed=rng.randrange(10 ** 6))
        emp = sum(est.prob(b) for b in est.counts if b)
        se = max((exact * (1 - exact) / 4000) ** 0.5, 1e-3)
        assert abs(emp - exact) <= 3 * se + 1e-9


def test_input_spec_guards():
    with pytest.raises(WellFormednessError):
        InputSpec.of_sets([])
    with pytest.raises(WellFormednessError):
        InputSpec.all_subsets(range(20), cap=12)
