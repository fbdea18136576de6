"""Decision procedures, quantitative queries, and a Monte Carlo oracle.

``equiv`` and ``leq`` compare two programs row by row over an input
specification, producing a verdict with a reproducible counterexample on
the negative side.  ``dist_leq`` implements the distribution order via
principal up-set probabilities.  ``query`` evaluates scalar measures of an
output distribution.  ``sample_run``/``estimate`` form an operational
sampler that is independent of the matrix pipeline and is used as a
statistical oracle in tests.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction

from .bigstep import Kernel, OutputDist
from .errors import ConditioningError, WellFormednessError
from .syntax import (
    Assign, Choice, Drop, Neg, Program, Seq, Skip, Star, Test, Union,
    desugar, has_choice, is_core, predicate_set,
)
from .universe import EMPTY, PacketSet, PacketUniverse

DEFAULT_SUBSET_CAP = 12
FLOAT_TOL = 1e-9


# -- input specifications ------------------------------------------------


@dataclass(frozen=True)
class InputSpec:
    """Either an explicit list of input sets or all subsets of a packet list."""

    explicit: tuple | None = None
    subset_base: tuple | None = None  # packet indices

    @classmethod
    def of_sets(cls, sets) -> "InputSpec":
        sets = tuple(sets)
        if not sets:
            raise WellFormednessError("empty input specification")
        return cls(explicit=sets)

    @classmethod
    def all_subsets(cls, packets, cap: int = DEFAULT_SUBSET_CAP) -> "InputSpec":
        packets = tuple(sorted(packets))
        if len(packets) > cap:
            raise WellFormednessError(
                f"all-subsets over {len(packets)} packets exceeds the cap of {cap}"
            )
        return cls(subset_base=packets)

    @classmethod
    def full_universe(cls, universe: PacketUniverse,
                      cap: int = DEFAULT_SUBSET_CAP) -> "InputSpec":
        return cls.all_subsets(universe.all_packets(), cap=cap)

    def rows(self):
        if self.explicit is not None:
            yield from self.explicit
            return
        base = self.subset_base
        for mask in range(1 << len(base)):
            yield frozenset(p for i, p in enumerate(base) if (mask >> i) & 1)

    def singleton_rows(self):
        """The empty set plus all singletons of the base; used by the
        deterministic fast path, where these rows determine all rows."""
        yield EMPTY
        for p in self.subset_base:
            yield frozenset((p,))


# -- verdicts ---------------------------------------------------------------


@dataclass(frozen=True)
class Witness:
    input_set: PacketSet
    output_set: PacketSet
    left_prob: object
    right_prob: object


@dataclass(frozen=True)
class Verdict:
    result: str  # 'equal' | 'not-equal' | 'leq' | 'not-leq'
    witness: Witness | None = None
    exact: bool = True
    tolerance: float | None = None

    def holds(self) -> bool:
        return self.result in ("equal", "leq")

    def to_jsonable(self, universe: PacketUniverse):
        obj = {"result": self.result, "exact": self.exact}
        if self.tolerance is not None:
            obj["tolerance"] = self.tolerance
        if self.witness is not None:
            w = self.witness
            obj["witness"] = {
                "input": universe.set_to_records(w.input_set),
                "output": universe.set_to_records(w.output_set),
                "left_prob": _scalar_str(w.left_prob),
                "right_prob": _scalar_str(w.right_prob),
            }
        return obj


def _scalar_str(x) -> str:
    return str(x) if isinstance(x, Fraction) else repr(x)


def _prepare(p: Program, universe: PacketUniverse, exact: bool,
             state_budget: int) -> Kernel:
    core = p if is_core(p) else desugar(p)
    return Kernel(core, universe, exact=exact, state_budget=state_budget)


def _set_key(s: PacketSet):
    return sorted(s)


def equiv(p: Program, q: Program, inputs: InputSpec, universe: PacketUniverse,
          exact: bool = True, tol: float = FLOAT_TOL,
          state_budget: int = 200_000) -> Verdict:
    """Decide whether the two kernels agree on every input row.

    When the spec is all-subsets and neither program contains a
    probabilistic choice, both kernels are deterministic and distribute
    over unions, so agreement on the empty row and all singleton rows
    settles every subset row; only those rows are evaluated.
    """
    kp = _prepare(p, universe, exact, state_budget)
    kq = _prepare(q, universe, exact, state_budget)
    det = (inputs.subset_base is not None
           and not has_choice(kp.program) and not has_choice(kq.program))
    rows = inputs.singleton_rows() if det else inputs.rows()
    for a in rows:
        mu = kp.row(kp.program, a)
        nu = kq.row(kq.program, a)
        bad = _dist_mismatch(mu, nu, exact, tol)
        if bad is not None:
            return Verdict("not-equal", Witness(a, bad, mu.get(bad, 0), nu.get(bad, 0)),
                           exact=exact, tolerance=None if exact else tol)
    return Verdict("equal", exact=exact, tolerance=None if exact else tol)


def _dist_mismatch(mu: dict, nu: dict, exact: bool, tol: float):
    """Lexicographically least output set on which the rows disagree."""
    bad = None
    for b in mu.keys() | nu.keys():
        x, y = mu.get(b, 0), nu.get(b, 0)
        differs = (x != y) if exact else (abs(x - y) > tol)
        if differs and (bad is None or _set_key(b) < _set_key(bad)):
            bad = b
    return bad


# -- the distribution order -----------------------------------------------


def upset_prob(mu: dict, aset: PacketSet):
    """mu of the principal up-set of ``aset``."""
    return sum(p for b, p in mu.items() if aset <= b)


def _meet_closure(sets) -> set:
    """Closure of a family of sets under pairwise intersection."""
    family = set(sets)
    frontier = set(family)
    while frontier:
        new = set()
        for x in frontier:
            for y in family:
                z = x & y
                if z not in family and z not in new:
                    new.add(z)
        family |= new
        frontier = new
    return family


def dist_leq(mu, nu, exact: bool = True, tol: float = FLOAT_TOL) -> bool:
    """The order mu <= nu: mu(up a) <= nu(up a) for every set a.

    Checking a over the intersection-closure of the two supports (plus the
    empty set) suffices: for any a, the up-set of a meets the supports
    exactly where the up-set of the intersection of all supersets of a in
    the closure does.
    """
    if isinstance(mu, OutputDist):
        mu = mu.as_dict()
    if isinstance(nu, OutputDist):
        nu = nu.as_dict()
    family = _meet_closure(set(mu) | set(nu) | {EMPTY})
    slack = 0 if exact else tol
    for a in family:
        if upset_prob(mu, a) > upset_prob(nu, a) + slack:
            return False
    return True


def dist_leq_bruteforce(mu, nu, packets, exact: bool = True,
                        tol: float = FLOAT_TOL) -> bool:
    """Reference implementation quantifying over all subsets of ``packets``."""
    if isinstance(mu, OutputDist):
        mu = mu.as_dict()
    if isinstance(nu, OutputDist):
        nu = nu.as_dict()
    packets = sorted(packets)
    slack = 0 if exact else tol
    for r in range(len(packets) + 1):
        for combo in itertools.combinations(packets, r):
            a = frozenset(combo)
            if upset_prob(mu, a) > upset_prob(nu, a) + slack:
                return False
    return True


def leq(p: Program, q: Program, inputs: InputSpec, universe: PacketUniverse,
        exact: bool = True, tol: float = FLOAT_TOL,
        state_budget: int = 200_000) -> Verdict:
    """Pointwise distribution order over the input rows."""
    kp = _prepare(p, universe, exact, state_budget)
    kq = _prepare(q, universe, exact, state_budget)
    slack = 0 if exact else tol
    for a in inputs.rows():
        mu = kp.row(kp.program, a)
        nu = kq.row(kq.program, a)
        family = sorted(_meet_closure(set(mu) | set(nu) | {EMPTY}), key=_set_key)
        for gen in family:
            x, y = upset_prob(mu, gen), upset_prob(nu, gen)
            if x > y + slack:
                return Verdict("not-leq", Witness(a, gen, x, y),
                               exact=exact, tolerance=None if exact else tol)
    return Verdict("leq", exact=exact, tolerance=None if exact else tol)


# -- quantitative queries ------------------------------------------------------


@dataclass(frozen=True)
class QuerySpec:
    """One of: prob_nonempty; prob_satisfies(pred, 'all'|'some');
    expected_field(f); field_cdf(f, threshold).  Field measures condition
    on nonempty output."""

    kind: str
    predicate: Program | None = None
    quantifier: str = "all"
    field: str | None = None
    threshold: int | None = None

    @classmethod
    def prob_nonempty(cls):
        return cls("prob_nonempty")

    @classmethod
    def prob_satisfies(cls, predicate: Program, quantifier: str = "all"):
        if quantifier not in ("all", "some"):
            raise WellFormednessError("quantifier must be 'all' or 'some'")
        return cls("prob_satisfies", predicate=predicate, quantifier=quantifier)

    @classmethod
    def expected_field(cls, field: str):
        return cls("expected_field", field=field)

    @classmethod
    def field_cdf(cls, field: str, threshold: int):
        return cls("field_cdf", field=field, threshold=threshold)


def query(p: Program, a: PacketSet, measure: QuerySpec, universe: PacketUniverse,
          exact: bool = True, state_budget: int = 200_000):
    k = _prepare(p, universe, exact, state_budget)
    return query_dist(k.apply(a).as_dict(), measure, universe, exact=exact)


def query_dist(mu: dict, measure: QuerySpec, universe: PacketUniverse,
               exact: bool = True):
    zero = Fraction(0) if exact else 0.0
    if measure.kind == "prob_nonempty":
        return sum((p for b, p in mu.items() if b), zero)
    if measure.kind == "prob_satisfies":
        bt = predicate_set(measure.predicate, universe)
        if measure.quantifier == "all":
            keep = lambda b: b <= bt
        else:
            keep = lambda b: bool(b & bt)
        return sum((p for b, p in mu.items() if keep(b)), zero)
    if measure.kind in ("expected_field", "field_cdf"):
        cond = sum((p for b, p in mu.items() if b), zero)
        if cond == 0:
            raise ConditioningError("conditioning on nonempty output, which has probability 0")
        if measure.kind == "expected_field":
            acc = zero
            for b, p in mu.items():
                if not b:
                    continue
                vals = {universe.field_value(i, measure.field) for i in b}
                if len(vals) != 1:
                    raise ConditioningError(
                        f"field {measure.field!r} not constant on an outcome set"
                    )
                acc += p * next(iter(vals))
            return acc / cond
        acc = zero
        for b, p in mu.items():
            if not b:
                continue
            vals = {universe.field_value(i, measure.field) for i in b}
            if len(vals) != 1:
                raise ConditioningError(
                    f"field {measure.field!r} not constant on an outcome set"
                )
            if next(iter(vals)) <= measure.threshold:
                acc += p
        return acc / cond
    raise WellFormednessError(f"unknown measure {measure.kind!r}")


# -- Monte Carlo sampler -------------------------------------------------------


class TruncatedRun(Exception):
    """A star iteration hit the depth cap before stabilizing."""


DEFAULT_STAR_DEPTH = 256
STALL_STEPS = 40


def sample_run(p: Program, a: PacketSet, universe: PacketUniverse,
               seed, star_depth: int = DEFAULT_STAR_DEPTH) -> PacketSet:
    """One operational run; raises TruncatedRun if a star fails to stabilize.

    ``seed`` is an integer (or any hashable) or an already-constructed
    ``random.Random``.
    """
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    core = p if is_core(p) else desugar(p)
    return _sample(core, a, universe, rng, star_depth)


def _sample(node: Program, a: PacketSet, universe, rng, star_depth) -> PacketSet:
    match node:
        case Drop():
            return EMPTY
        case Skip():
            return a
        case Test(f, v):
            return a & universe.packets_where(f, v)
        case Assign(f, v):
            return universe.modify(a, f, v)
        case Neg(t):
            return a - predicate_set(t, universe)
        case Union(l, r):
            return (_sample(l, a, universe, rng, star_depth)
                    | _sample(r, a, universe, rng, star_depth))
        case Seq(l, r):
            mid = _sample(l, a, universe, rng, star_depth)
            return _sample(r, mid, universe, rng, star_depth)
        case Choice(w, l, r):
            pick_left = rng.random() < w
            return _sample(l if pick_left else r, a, universe, rng, star_depth)
        case Star(body):
            acc = EMPTY
            cur = a
            stall = 0
            for _ in range(star_depth):
                grew = not cur <= acc
                acc = acc | cur
                stall = 0 if grew else stall + 1
                if stall >= STALL_STEPS:
                    return acc
                cur = _sample(body, cur, universe, rng, star_depth)
            raise TruncatedRun()
        case _:
            raise WellFormednessError(f"non-core node {node!r}")


@dataclass
class Estimate:
    counts: dict  # PacketSet -> int, over completed runs
    n_completed: int
    n_truncated: int

    def prob(self, b: PacketSet) -> float:
        return self.counts.get(b, 0) / self.n_completed if self.n_completed else 0.0

    def as_dict(self) -> dict:
        return {b: c / self.n_completed for b, c in self.counts.items()}

    def stderr(self, b: PacketSet) -> float:
        if not self.n_completed:
            return 0.0
        ph = self.prob(b)
        return (ph * (1 - ph) / self.n_completed) ** 0.5


def estimate(p: Program, a: PacketSet, universe: PacketUniverse, n_samples: int,
             seed: int = 0, star_depth: int = DEFAULT_STAR_DEPTH) -> Estimate:
    """Empirical output distribution from ``n_samples`` independent runs.

    Each run draws from its own seeded generator, so runs are reproducible
    and independent of evaluation order.  Truncated runs are counted and
    excluded, never silently folded into the estimate.
    """
    core = p if is_core(p) else desugar(p)
    counts: dict = {}
    truncated = 0
    for i in range(n_samples):
        rng = random.Random(f"{seed}:{i}")
        try:
            out = _sample(core, a, universe, rng, star_depth)
        except TruncatedRun:
            truncated += 1
            continue
        counts[out] = counts.get(out, 0) + 1
    return Estimate(counts, n_samples - truncated, truncated)
