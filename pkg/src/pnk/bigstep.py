"""Big-step compilation: programs as kernels from packet sets to output
distributions, with on-demand stochastic matrices over chosen rows.

A kernel row is a finitely supported distribution over packet sets.  Rows
are memoized per (node, input set), so repeated sub-evaluations -- which
dominate star exploration, where the same current set recurs under many
accumulators -- are computed once.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from . import star as star_mod
from .errors import WellFormednessError
from .linalg import SparseMatrix
from .syntax import (
    Assign, Choice, Drop, Neg, Program, Seq, Skip, Star, Test, Union,
    is_core, is_predicate, predicate_set, pretty,
)
from .universe import EMPTY, PacketSet, PacketUniverse

DEFAULT_STATE_BUDGET = 200_000
DEFAULT_MATRIX_ROW_CAP = 4096
FLOAT_MASS_TOL = 1e-9


@dataclass(frozen=True)
class OutputDist:
    """Finitely supported distribution over packet sets (one stochastic row)."""

    support: tuple  # tuple of (PacketSet, prob), canonically ordered

    @classmethod
    def from_dict(cls, d: dict) -> "OutputDist":
        items = tuple(sorted(((s, p) for s, p in d.items() if p != 0),
                             key=lambda kv: sorted(kv[0])))
        return cls(items)

    def as_dict(self) -> dict:
        return dict(self.support)

    def mass(self):
        return sum(p for _, p in self.support)

    def prob(self, aset: PacketSet):
        for s, p in self.support:
            if s == aset:
                return p
        return 0

    def validate(self, exact: bool = True) -> None:
        for s, p in self.support:
            if p <= 0:
                raise AssertionError(f"non-positive probability {p}")
        m = self.mass()
        if exact:
            if m != 1:
                raise AssertionError(f"total mass {m} != 1")
        elif abs(m - 1) > FLOAT_MASS_TOL:
            raise AssertionError(f"total mass {m} not within {FLOAT_MASS_TOL} of 1")

    def to_jsonable(self, universe: PacketUniverse, input_set: PacketSet | None = None):
        obj = {
            "support": [
                {
                    "set": universe.set_to_records(s),
                    "prob": str(p) if isinstance(p, Fraction) else repr(p),
                }
                for s, p in self.support
            ]
        }
        if input_set is not None:
            obj["input"] = universe.set_to_records(input_set)
        return obj


@dataclass
class BigStepMatrix:
    """A stochastic matrix over explicit row/column packet-set indices."""

    matrix: SparseMatrix
    row_sets: list[PacketSet]
    col_sets: list[PacketSet]
    row_index: dict
    col_index: dict


def _right_assoc(node: Program, cache: dict) -> Program:
    """Right-associate all sequences (semantically neutral: sequential
    composition is monad bind, which is associative).  Puts stars directly
    in front of whatever follows them, enabling the filtered-star path."""
    hit = cache.get(id(node))
    if hit is not None:
        return hit
    match node:
        case Seq():
            parts: list[Program] = []
            stack = [node]
            while stack:
                n = stack.pop()
                if isinstance(n, Seq):
                    stack.append(n.right)
                    stack.append(n.left)
                else:
                    parts.append(_right_assoc(n, cache))
            out = parts[-1]
            for q in reversed(parts[:-1]):
                out = Seq(q, out)
        case Union(l, r):
            out = Union(_right_assoc(l, cache), _right_assoc(r, cache))
        case Choice(w, l, r):
            out = Choice(w, _right_assoc(l, cache), _right_assoc(r, cache))
        case Star(b):
            out = Star(_right_assoc(b, cache))
        case Neg(b):
            out = Neg(_right_assoc(b, cache))
        case _:
            out = node
    cache[id(node)] = out
    return out


class Kernel:
    """Evaluates a core (desugared) program row by row."""

    def __init__(self, program: Program, universe: PacketUniverse,
                 exact: bool = True, state_budget: int = DEFAULT_STATE_BUDGET):
        if not is_core(program):
            raise WellFormednessError(
                "kernel requires a core program; run desugar() first"
            )
        self.program = _right_assoc(program, {})
        self.universe = universe
        self.exact = exact
        self.state_budget = state_budget
        self._memo: dict = {}
        self._preds: dict = {}
        self._peeled: dict = {}

    # -- scalar helpers ----------------------------------------------------

    def _weight(self, w: Fraction):
        return w if self.exact else float(w)

    def _one(self):
        return Fraction(1) if self.exact else 1.0

    def _pred_set(self, node: Program) -> PacketSet:
        key = id(node)
        s = self._preds.get(key)
        if s is None:
            s = predicate_set(node, self.universe)
            self._preds[key] = s
        return s

    # -- evaluation ----------------------------------------------------------

    def apply(self, aset: PacketSet) -> OutputDist:
        """The output distribution of the whole program on ``aset``."""
        return OutputDist.from_dict(self._eval(self.program, aset))

    def row(self, node: Program, aset: PacketSet) -> dict:
        """Raw row (dict set -> prob) of an arbitrary sub-program."""
        return self._eval(node, aset)

    def _eval(self, node: Program, aset: PacketSet) -> dict:
        key = (id(node), aset)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        out = self._eval_uncached(node, aset)
        self._memo[key] = out
        return out

    def _eval_uncached(self, node: Program, aset: PacketSet) -> dict:
        one = self._one()
        match node:
            case Drop():
                return {EMPTY: one}
            case Skip():
                return {aset: one}
            case Test(f, v):
                return {aset & self.universe.packets_where(f, v): one}
            case Assign(f, v):
                return {self.universe.modify(aset, f, v): one}
            case Neg(t):
                return {aset - self._pred_set(t): one}
            case Union(l, r):
                mu = self._eval(l, aset)
                nu = self._eval(r, aset)
                out: dict = {}
                for b1, p1 in mu.items():
                    for b2, p2 in nu.items():
                        b = b1 | b2
                        out[b] = out.get(b, 0) + p1 * p2
                return out
            case Seq(l, r) if isinstance(l, Star):
                collect, rest = self._peel_predicates(r)
                if collect is None:
                    return self._bind(self._eval(l, aset), rest)
                cdist = star_mod.star_dist(
                    lambda a: self._eval(l.body, a), aset,
                    cap=self.state_budget, exact=self.exact, collect=collect,
                    program_text=lambda: pretty(node),
                )
                return cdist if rest is None else self._bind(cdist, rest)
            case Seq(l, r):
                return self._bind(self._eval(l, aset), r)
            case Choice(w, l, r):
                w = self._weight(w)
                out = {}
                if w != 0:
                    for b, p in self._eval(l, aset).items():
                        out[b] = out.get(b, 0) + w * p
                if w != 1:
                    cw = one - w
                    for b, p in self._eval(r, aset).items():
                        out[b] = out.get(b, 0) + cw * p
                return {b: p for b, p in out.items() if p != 0}
            case Star(body):
                return star_mod.star_dist(
                    lambda a: self._eval(body, a), aset,
                    cap=self.state_budget, exact=self.exact,
                    program_text=lambda: pretty(node),
                )
            case _:
                raise WellFormednessError(f"non-core node {node!r}")

    def _bind(self, mu: dict, node: Program) -> dict:
        out: dict = {}
        for c, p in mu.items():
            for b, q in self._eval(node, c).items():
                out[b] = out.get(b, 0) + p * q
        return out

    def _peel_predicates(self, node: Program):
        """Split ``node`` into a leading predicate chain (as one packet set)
        and the remainder.  A star followed by predicates folds the filter
        into the pair-chain accumulator, which keeps accumulators small when
        iteration only matters through a final test (loops do exactly this).
        """
        hit = self._peeled.get(id(node))
        if hit is not None:
            return hit
        collect = None
        rest: Program | None = node
        while rest is not None:
            if is_predicate(rest):
                s = self._pred_set(rest)
                collect = s if collect is None else collect & s
                rest = None
            elif isinstance(rest, Seq) and is_predicate(rest.left):
                s = self._pred_set(rest.left)
                collect = s if collect is None else collect & s
                rest = rest.right
            else:
                break
        out = (collect, rest)
        self._peeled[id(node)] = out
        return out

    # -- matrices --------------------------------------------------------------

    def matrix(self, rows: list[PacketSet]) -> BigStepMatrix:
        """Stochastic matrix whose i-th row is the kernel applied to rows[i];
        columns are indexed by the union of all supports."""
        dists = [self._eval(self.program, a) for a in rows]
        col_sets: list[PacketSet] = []
        col_index: dict = {}
        for d in dists:
            for s in sorted(d, key=sorted):
                if s not in col_index:
                    col_index[s] = len(col_sets)
                    col_sets.append(s)
        m = SparseMatrix(len(rows), len(col_sets))
        for i, d in enumerate(dists):
            m.rows[i] = {col_index[s]: p for s, p in d.items()}
        row_index = {a: i for i, a in enumerate(rows)}
        return BigStepMatrix(m, list(rows), col_sets, row_index, col_index)

    def full_matrix(self, row_cap: int = DEFAULT_MATRIX_ROW_CAP) -> BigStepMatrix:
        """Matrix over all of 2^Pk, guarded by a row cap (default 4096 rows)."""
        n = self.universe.packet_count
        if (1 << n) > row_cap:
            raise WellFormednessError(
                f"2^{n} rows exceed the cap of {row_cap}; pass explicit rows"
            )
        packets = sorted(self.universe.all_packets())
        rows = [
            frozenset(p for b, p in zip(range(n), packets) if (mask >> b) & 1)
            for mask in range(1 << n)
        ]
        return self.matrix(rows)
