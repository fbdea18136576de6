"""Program syntax: AST nodes, well-formedness, desugaring, pretty-printing.

Core nodes: Drop, Skip, Test, Assign, Neg, Union, Seq, Choice, Star.
Sugar nodes: If, While, DoWhile, Var, NaryChoice.  ``desugar`` rewrites a
well-formed program into core nodes only.

A node is a *predicate* iff it is Drop, Skip, Test, or Neg/Union/Seq of
predicates.  Choice and Star are never predicates, and Neg may only be
applied to predicates.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import WellFormednessError
from .universe import PacketSet, PacketUniverse


class Program:
    """Base class for AST nodes.  Nodes are immutable and hashable."""

    __slots__ = ()


@dataclass(frozen=True)
class Drop(Program):
    pass


@dataclass(frozen=True)
class Skip(Program):
    pass


@dataclass(frozen=True)
class Test(Program):
    field: str
    value: int


@dataclass(frozen=True)
class Assign(Program):
    field: str
    value: int


@dataclass(frozen=True)
class Neg(Program):
    body: Program


@dataclass(frozen=True)
class Union(Program):
    left: Program
    right: Program


@dataclass(frozen=True)
class Seq(Program):
    left: Program
    right: Program


@dataclass(frozen=True)
class Choice(Program):
    weight: Fraction  # probability of the left branch
    left: Program
    right: Program


@dataclass(frozen=True)
class Star(Program):
    body: Program


# -- sugar ----------------------------------------------------------------


@dataclass(frozen=True)
class If(Program):
    guard: Program
    then: Program
    other: Program


@dataclass(frozen=True)
class While(Program):
    guard: Program
    body: Program


@dataclass(frozen=True)
class DoWhile(Program):
    body: Program
    guard: Program


@dataclass(frozen=True)
class Var(Program):
    field: str
    value: int
    body: Program


@dataclass(frozen=True)
class NaryChoice(Program):
    branches: tuple[tuple[Program, Fraction], ...]


SUGAR = (If, While, DoWhile, Var, NaryChoice)


def is_predicate(p: Program) -> bool:
    match p:
        case Drop() | Skip() | Test():
            return True
        case Neg(body):
            return is_predicate(body)
        case Union(l, r) | Seq(l, r):
            return is_predicate(l) and is_predicate(r)
        case _:
            return False


def is_core(p: Program) -> bool:
    match p:
        case Drop() | Skip() | Test() | Assign():
            return True
        case Neg(b) | Star(b):
            return is_core(b)
        case Union(l, r) | Seq(l, r) | Choice(_, l, r):
            return is_core(l) and is_core(r)
        case _:
            return False


def validate(p: Program, universe: PacketUniverse) -> None:
    """Check well-formedness against a universe; raises WellFormednessError."""

    def go(node):
        match node:
            case Drop() | Skip():
                pass
            case Test(f, v) | Assign(f, v):
                if not universe.has_field(f):
                    raise WellFormednessError(f"unknown field {f!r}")
                if not (0 <= v < universe.field(f).size):
                    raise WellFormednessError(
                        f"value {v} out of range for field {f!r}"
                    )
            case Neg(b):
                go(b)
                if not is_predicate(b):
                    raise WellFormednessError("negation applied to a non-predicate")
            case Union(l, r) | Seq(l, r):
                go(l)
                go(r)
            case Choice(w, l, r):
                if not (0 <= w <= 1):
                    raise WellFormednessError(f"choice weight {w} outside [0, 1]")
                go(l)
                go(r)
            case Star(b):
                go(b)
            case If(t, a, b):
                go(t)
                if not is_predicate(t):
                    raise WellFormednessError("if-guard is not a predicate")
                go(a)
                go(b)
            case While(t, b) | DoWhile(b, t):
                go(t)
                if not is_predicate(t):
                    raise WellFormednessError("loop guard is not a predicate")
                go(b)
            case Var(f, v, b):
                if not universe.has_field(f):
                    raise WellFormednessError(f"unknown field {f!r}")
                if not (0 <= v < universe.field(f).size):
                    raise WellFormednessError(
                        f"value {v} out of range for field {f!r}"
                    )
                go(b)
            case NaryChoice(branches):
                if not branches:
                    raise WellFormednessError("empty n-ary choice")
                total = Fraction(0)
                for q, w in branches:
                    if w < 0:
                        raise WellFormednessError(f"negative branch weight {w}")
                    total += w
                    go(q)
                if total != 1:
                    raise WellFormednessError(
                        f"n-ary choice weights sum to {total}, expected 1"
                    )
            case _:
                raise WellFormednessError(f"unknown node {node!r}")

    go(p)


def desugar(p: Program) -> Program:
    """Rewrite sugar into core nodes.

    If(t,p,q)    -> (t;p) & (!t;q)
    While(t,p)   -> (t;p)* ; !t
    DoWhile(p,t) -> p ; (t;p)* ; !t        (left-nested sequence)
    Var(f,n,p)   -> (f:=n ; p) ; f:=0
    NaryChoice   -> right-nested binary Choice with rescaled weights
    """
    match p:
        case Drop() | Skip() | Test() | Assign():
            return p
        case Neg(b):
            return Neg(desugar(b))
        case Union(l, r):
            return Union(desugar(l), desugar(r))
        case Seq(l, r):
            return Seq(desugar(l), desugar(r))
        case Choice(w, l, r):
            return Choice(w, desugar(l), desugar(r))
        case Star(b):
            return Star(desugar(b))
        case If(t, a, b):
            t = desugar(t)
            return Union(Seq(t, desugar(a)), Seq(Neg(t), desugar(b)))
        case While(t, b):
            t = desugar(t)
            return Seq(Star(Seq(t, desugar(b))), Neg(t))
        case DoWhile(b, t):
            t = desugar(t)
            b = desugar(b)
            return Seq(Seq(b, Star(Seq(t, b))), Neg(t))
        case Var(f, v, b):
            return Seq(Seq(Assign(f, v), desugar(b)), Assign(f, 0))
        case NaryChoice(branches):
            return _desugar_nary(list(branches))
        case _:
            raise WellFormednessError(f"unknown node {p!r}")


def _desugar_nary(branches) -> Program:
    head, w = branches[0]
    if len(branches) == 1:
        return desugar(head)
    total = w + sum(wi for _, wi in branches[1:])
    if total == 0:
        # All-zero tail: any branch carries the (zero) mass.
        return desugar(head)
    return Choice(Fraction(w) / total, desugar(head), _desugar_nary(branches[1:]))


def has_choice(p: Program) -> bool:
    """True iff the program contains a probabilistic choice (after desugaring)."""
    match p:
        case Choice():
            return True
        case NaryChoice(branches):
            return len(branches) > 1 or any(has_choice(q) for q, _ in branches)
        case Neg(b) | Star(b) | While(_, b) | Var(_, _, b):
            return has_choice(b)
        case Union(l, r) | Seq(l, r):
            return has_choice(l) or has_choice(r)
        case If(t, a, b):
            return has_choice(t) or has_choice(a) or has_choice(b)
        case DoWhile(b, t):
            return has_choice(b) or has_choice(t)
        case _:
            return False


def predicate_set(t: Program, universe: PacketUniverse) -> PacketSet:
    """The characteristic packet set of a predicate.

    drop -> {} ; skip -> Pk ; f=n -> {pi | pi.f = n} ; !t -> Pk - b_t ;
    t&u -> b_t | b_u ; t;u -> b_t & b_u.
    """
    match t:
        case Drop():
            return frozenset()
        case Skip():
            return universe.all_packets()
        case Test(f, v):
            return universe.packets_where(f, v)
        case Neg(b):
            return universe.all_packets() - predicate_set(b, universe)
        case Union(l, r):
            return predicate_set(l, universe) | predicate_set(r, universe)
        case Seq(l, r):
            return predicate_set(l, universe) & predicate_set(r, universe)
        case _:
            raise WellFormednessError(f"not a predicate: {pretty(t)}")


# -- pretty-printing --------------------------------------------------------

# Precedence levels, loosest first: choice, union, seq, neg, star, atom.
_CHOICE, _UNION, _SEQ, _NEG, _STAR, _ATOM = range(6)


def _fmt_weight(w: Fraction) -> str:
    return str(w)


def pretty(p: Program) -> str:
    """Canonical concrete syntax; ``parse(pretty(p))`` returns ``p``."""
    return _pp(p, _CHOICE)


def _pp(p: Program, ctx: int) -> str:
    def wrap(level, text):
        return f"({text})" if ctx > level else text

    match p:
        case Drop():
            return "drop"
        case Skip():
            return "skip"
        case Test(f, v):
            return f"{f}={v}"
        case Assign(f, v):
            return f"{f}:={v}"
        case Neg(b):
            return wrap(_NEG, f"!{_pp(b, _STAR)}")
        case Star(b):
            return wrap(_STAR, f"{_pp(b, _ATOM)}*")
        case Seq(l, r):
            return wrap(_SEQ, f"{_pp(l, _SEQ)} ; {_pp(r, _SEQ + 1)}")
        case Union(l, r):
            return wrap(_UNION, f"{_pp(l, _UNION)} & {_pp(r, _UNION + 1)}")
        case Choice(w, l, r):
            # Right-associative.
            return wrap(
                _CHOICE, f"{_pp(l, _CHOICE + 1)} +[{_fmt_weight(w)}] {_pp(r, _CHOICE)}"
            )
        case If(t, a, b):
            body = f"if {_pp(t, _CHOICE + 1)} then {_pp(a, _CHOICE + 1)} else {_pp(b, _CHOICE)}"
            return wrap(_CHOICE, body)
        case While(t, b):
            return wrap(_CHOICE, f"while {_pp(t, _CHOICE + 1)} do {_pp(b, _CHOICE)}")
        case DoWhile(b, t):
            return wrap(_CHOICE, f"do {_pp(b, _CHOICE + 1)} while {_pp(t, _CHOICE)}")
        case Var(f, v, b):
            return wrap(_CHOICE, f"var {f}:={v} in {_pp(b, _CHOICE)}")
        case NaryChoice(branches):
            inner = ", ".join(
                f"{_fmt_weight(w)}: {_pp(q, _CHOICE)}" for q, w in branches
            )
            return f"choice {{ {inner} }}"
        case _:
            raise WellFormednessError(f"unknown node {p!r}")


# -- small constructors used throughout -------------------------------------


def seq(*parts: Program) -> Program:
    """Left-nested sequence of one or more programs."""
    if not parts:
        return Skip()
    out = parts[0]
    for q in parts[1:]:
        out = Seq(out, q)
    return out


def union(*parts: Program) -> Program:
    """Left-nested union; empty union is drop."""
    if not parts:
        return Drop()
    out = parts[0]
    for q in parts[1:]:
        out = Union(out, q)
    return out


def uniform(*parts: Program) -> Program:
    """Uniform n-ary choice over the given programs."""
    if not parts:
        raise WellFormednessError("uniform choice over nothing")
    n = len(parts)
    return NaryChoice(tuple((q, Fraction(1, n)) for q in parts))
