"""Iteration semantics via an absorbing chain over (current, accumulator) pairs.

One transition models one unrolling of ``p*``: from state (a, b) the chain
moves to (a', b | a) with the probability the body's kernel gives to a' on
input a.  A state is *saturated* once its accumulator can never grow again;
redirecting every saturated state (a, b) to a canonical absorbing state
(0, b) turns the chain into an absorbing one, whose absorption
probabilities -- computed exactly with (I - Q)^-1 R -- are the output
distribution of ``p*``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import BudgetExceededError
from .linalg import SparseMatrix, solve_absorption_row
from .universe import EMPTY, PacketSet

DEFAULT_STATE_BUDGET = 200_000


@dataclass
class PairStateGraph:
    """Reachable fragment of the pair chain from ``(a0, {})``.

    states[i] is the pair (current, accumulator); edges[i] lists
    (successor index, probability) with probabilities summing to one.
    ``collect``, when set, is a filter pushed into the accumulator: the
    transition rule becomes b' = b | (a & collect), which computes the
    output of ``p* ; t`` for the predicate t with packet set ``collect``
    (intersection distributes over the accumulated union).
    """

    states: list[tuple[PacketSet, PacketSet]]
    edges: list[list[tuple[int, object]]]
    start: int = 0
    saturated: list[bool] | None = None
    collect: PacketSet | None = None
    index: dict = field(default_factory=dict)

    def state_count(self) -> int:
        return len(self.states)


def explore(row_fn, a0: PacketSet, cap: int = DEFAULT_STATE_BUDGET,
            collect: PacketSet | None = None, program_text=None) -> PairStateGraph:
    """BFS closure of the pair chain from (a0, {}) under b' = b | a
    (or b' = b | (a & collect) when a filter is pushed in).

    ``row_fn(a)`` must return the body kernel's row on input ``a`` as a
    dict set -> prob.  Raises BudgetExceededError when more than ``cap``
    states become reachable.
    """
    start = (a0, EMPTY)
    index = {start: 0}
    states = [start]
    edges: list[list[tuple[int, object]]] = []
    work = deque([0])
    while work:
        sid = work.popleft()
        a, b = states[sid]
        b2 = b | a if collect is None else b | (a & collect)
        row = row_fn(a)
        out = []
        for a2, p in row.items():
            succ = (a2, b2)
            tid = index.get(succ)
            if tid is None:
                tid = len(states)
                if tid >= cap:
                    text = program_text() if callable(program_text) else program_text
                    raise BudgetExceededError(
                        f"pair-state budget of {cap} states exceeded", text
                    )
                index[succ] = tid
                states.append(succ)
                work.append(tid)
            out.append((tid, p))
        while len(edges) <= sid:
            edges.append([])
        edges[sid] = out
    return PairStateGraph(states=states, edges=edges, start=0, index=index,
                          collect=collect)


def mark_saturated(g: PairStateGraph) -> PairStateGraph:
    """Flag states whose accumulator has reached its final value.

    A state can still grow iff it reaches (in zero or more steps) a state
    whose (filtered) current set is not contained in its accumulator;
    saturation is the complement, computed by reverse reachability from
    the growing states.
    """
    n = len(g.states)
    if g.collect is None:
        growing = [i for i, (a, b) in enumerate(g.states) if not a <= b]
    else:
        growing = [i for i, (a, b) in enumerate(g.states)
                   if not (a & g.collect) <= b]
    radj: list[list[int]] = [[] for _ in range(n)]
    for i, out in enumerate(g.edges):
        for j, _ in out:
            radj[j].append(i)
    unsat = [False] * n
    work = deque()
    for i in growing:
        unsat[i] = True
        work.append(i)
    while work:
        j = work.popleft()
        for i in radj[j]:
            if not unsat[i]:
                unsat[i] = True
                work.append(i)
    g.saturated = [not u for u in unsat]
    return g


def star_dist(row_fn, a0: PacketSet, cap: int = DEFAULT_STATE_BUDGET,
              exact: bool = True, collect: PacketSet | None = None,
              program_text=None) -> dict:
    """Output distribution of ``p*`` on input ``a0`` (dict set -> prob).

    Explores the reachable pair chain, redirects saturated states to their
    canonical absorbing state, and solves the absorbing system for the row
    of the start state.  With ``collect`` set, computes the composite
    ``p* ; t`` for the predicate t with that packet set.
    """
    g = mark_saturated(explore(row_fn, a0, cap=cap, collect=collect,
                               program_text=program_text))
    sat = g.saturated
    if sat[g.start]:
        # The accumulator can never grow: the final value is the empty set.
        return {EMPTY: Fraction(1) if exact else 1.0}

    # Transient states keep their exploration order; absorbing states are
    # canonical (0, b), keyed by accumulator.
    transient: dict[int, int] = {}
    for i, s in enumerate(g.states):
        if not (sat[i] and s[0] == EMPTY):
            transient[i] = len(transient)
    abs_keys: list[PacketSet] = []
    abs_index: dict[PacketSet, int] = {}

    def abs_col(bset: PacketSet) -> int:
        j = abs_index.get(bset)
        if j is None:
            j = len(abs_keys)
            abs_index[bset] = j
            abs_keys.append(bset)
        return j

    one = Fraction(1) if exact else 1.0
    nt = len(transient)
    Q = SparseMatrix(nt, nt)
    R = SparseMatrix(nt, 0)
    for i, ti in transient.items():
        if sat[i]:
            # Saturated but non-canonical: one step through the redirect.
            R.rows[ti][abs_col(g.states[i][1])] = one
            continue
        qrow = Q.rows[ti]
        rrow = R.rows[ti]
        for j, p in g.edges[i]:
            if sat[j]:
                c = abs_col(g.states[j][1])
                rrow[c] = rrow.get(c, 0) + p
            else:
                tj = transient[j]
                qrow[tj] = qrow.get(tj, 0) + p
    R.ncols = len(abs_keys)
    row = solve_absorption_row(Q, R, transient[g.start], exact=exact)
    dist = {abs_keys[c]: p for c, p in row.items() if p != 0}
    total = sum(dist.values())
    if exact:
        assert total == 1, f"star row mass {total} != 1"
    return dist


def to_dot(g: PairStateGraph, labeler=None) -> str:
    """GraphViz dump; states labeled ``a|b``, saturated states doubled."""
    if labeler is None:
        labeler = lambda s: "{%s}" % ",".join(map(str, sorted(s)))
    lines = ["digraph pairs {"]
    for i, (a, b) in enumerate(g.states):
        label = f"{labeler(a)}|{labeler(b)}"
        extra = ""
        if g.saturated is not None and g.saturated[i]:
            extra = ", peripheries=2"
        lines.append(f'  s{i} [label="{label}"{extra}];')
    for i, out in enumerate(g.edges):
        for j, p in sorted(out):
            lines.append(f'  s{i} -> s{j} [label="{p}"];')
    lines.append("}")
    return "\n".join(lines)
