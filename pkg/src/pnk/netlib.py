"""Network vocabulary as program generators.

Topologies are lists of directed links; a link matches packets sitting at
its source (switch, port) and moves them to the destination (switch, port).
Failable links carry a per-port health flag ``up<srcport>``; the guarded
topology drops packets that try to cross a link whose flag is down.

This module also ships the three-switch example network used throughout
the test suite, the 20-switch FatTree / AB FatTree instances, a reduced
12-switch AB FatTree, and the three-stage F10 routing scheme with 3-hop
and 5-hop rerouting.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import WellFormednessError
from .syntax import (
    Assign, Choice, DoWhile, Drop, NaryChoice, Neg, Program, Seq, Skip, Star,
    Test, Union, Var, seq, union, uniform,
)
from .universe import FieldDecl, PacketUniverse

EDGE, AGG, CORE = "edge", "agg", "core"


@dataclass(frozen=True)
class Link:
    src: int
    srcport: int
    dst: int
    dstport: int
    failable: bool = False


@dataclass
class Topology:
    switches: int
    links: list[Link]
    layers: dict[int, str] = field(default_factory=dict)
    agg_type: dict[int, str] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        seen = set()
        for l in self.links:
            if (l.src, l.srcport) in seen:
                raise WellFormednessError(
                    f"duplicate source port {l.srcport} on switch {l.src}"
                )
            seen.add((l.src, l.srcport))

    def adjacency(self) -> dict[int, list[tuple[int, int]]]:
        adj: dict[int, list[tuple[int, int]]] = {}
        for l in self.links:
            adj.setdefault(l.src, []).append((l.srcport, l.dst))
        for v in adj.values():
            v.sort()
        return adj

    def max_port(self) -> int:
        return max((max(l.srcport, l.dstport) for l in self.links), default=0)

    def failable_links(self) -> list[Link]:
        return [l for l in self.links if l.failable]

    def flag_fields(self) -> list[str]:
        return sorted({flag_name(l) for l in self.failable_links()},
                      key=lambda n: int(n[2:]))

    def to_json(self) -> str:
        return json.dumps({
            "switches": self.switches,
            "links": [
                {"src": l.src, "srcport": l.srcport, "dst": l.dst,
                 "dstport": l.dstport, "failable": l.failable}
                for l in self.links
            ],
        })

    @classmethod
    def from_json(cls, text: str) -> "Topology":
        obj = json.loads(text)
        links = [Link(d["src"], d["srcport"], d["dst"], d["dstport"],
                      bool(d.get("failable", False))) for d in obj["links"]]
        return cls(obj["switches"], links)


def flag_name(link: Link) -> str:
    return f"up{link.srcport}"


def link_program(link: Link, guarded: bool = False) -> Program:
    """sw=i ; pt=j ; sw:=j' ; pt:=i'; the guarded form tests the port flag."""
    body = seq(Test("sw", link.src), Test("pt", link.srcport),
               Assign("sw", link.dst), Assign("pt", link.dstport))
    if guarded and link.failable:
        return Seq(Test(flag_name(link), 1), body)
    return body


def topo_program(topo: Topology, guarded: bool = False) -> Program:
    return union(*[link_program(l, guarded) for l in topo.links])


def model(p: Program, topo: Topology) -> Program:
    """(p;t)* ; p over the unguarded topology."""
    t = topo_program(topo, guarded=False)
    return Seq(Star(Seq(p, t)), p)


def refined_model(p: Program, topo: Topology, f: Program) -> Program:
    """Failure-aware model: health flags are declared as local variables
    initialized to 1, and the failure program runs before the policy at
    every hop: var up_i:=1 in ... ((f;p);t-guarded)* ; (f;p)."""
    t = topo_program(topo, guarded=True)
    hop = Seq(f, p)
    body = Seq(Star(Seq(hop, t)), hop)
    for flag in reversed(topo.flag_fields()):
        body = Var(flag, 1, body)
    return body


# -- failure models ----------------------------------------------------------


@dataclass(frozen=True)
class FailureModel:
    """Per-link health flips: at most k simultaneous failures (None = no
    bound), each link failing independently with probability p."""

    k: int | None
    p: Fraction
    links: tuple[Link, ...]
    budget_field: str = "budget"

    def __post_init__(self):
        if not (0 <= self.p < 1):
            raise WellFormednessError(f"failure probability {self.p} outside [0, 1)")
        if self.k is not None and self.k < 0:
            raise WellFormednessError(f"negative failure bound {self.k}")


def _decrement(fld: str, top: int) -> Program:
    """Total decrement-by-one on a field with domain 0..top (0 stays 0)."""
    branches = [Seq(Test(fld, v), Assign(fld, v - 1)) for v in range(top, 0, -1)]
    branches.append(Seq(Test(fld, 0), Skip()))
    return union(*branches)


def failure_program(fm: FailureModel) -> Program:
    """Flip the flags of fm.links in declaration order.

    k=0 sets every flag up.  Unbounded k flips each flag independently
    (up with probability 1-p).  Finite k gates each flip on a budget
    counter that starts at k and decrements per failure.
    """
    flags = [flag_name(l) for l in fm.links]
    if fm.k == 0:
        return seq(*[Assign(fl, 1) for fl in flags])
    keep = 1 - fm.p
    if fm.k is None:
        return seq(*[Choice(keep, Assign(fl, 1), Assign(fl, 0)) for fl in flags])
    dec = _decrement(fm.budget_field, fm.k)
    steps = []
    for fl in flags:
        flip = Choice(keep, Assign(fl, 1), Seq(Assign(fl, 0), dec))
        steps.append(Union(
            Seq(Neg(Test(fm.budget_field, 0)), flip),
            Seq(Test(fm.budget_field, 0), Assign(fl, 1)),
        ))
    return seq(*steps)


# -- the three-switch example network ---------------------------------------


@dataclass
class ToyNet:
    """The running three-switch example: Source at switch 1 port 1,
    Destination at switch 2 port 2, links 1->2, 1->3, 3->2 with the two
    switch-1 links failable."""

    universe: PacketUniverse
    topo: Topology
    p: Program
    p_hat: Program
    t: Program
    t_hat: Program
    f0: Program
    f1: Program
    in_pred: Program
    out_pred: Program
    teleport: Program

    def f2(self, fail_p: Fraction = Fraction(1, 5)) -> Program:
        keep = 1 - fail_p
        return Seq(
            Choice(keep, Assign("up2", 1), Assign("up2", 0)),
            Choice(keep, Assign("up3", 1), Assign("up3", 0)),
        )

    def M(self, p: Program) -> Program:
        return model(p, self.topo)

    def M_hat(self, p: Program, f: Program) -> Program:
        return refined_model(p, self.topo, f)

    def wrapped(self, p: Program, f: Program) -> Program:
        """in ; M_hat(p, t_hat, f) ; out"""
        return seq(self.in_pred, self.M_hat(p, f), self.out_pred)

    def flag_zero_packets(self) -> list[int]:
        u = self.universe
        return sorted(
            pk for pk in range(u.packet_count)
            if u.field_value(pk, "up2") == 0 and u.field_value(pk, "up3") == 0
        )

    def source_packet(self) -> int:
        return self.universe.packet(sw=1, pt=1, up2=0, up3=0)


def toy() -> ToyNet:
    universe = PacketUniverse([
        FieldDecl("sw", 4), FieldDecl("pt", 4),
        FieldDecl("up2", 2), FieldDecl("up3", 2),
    ])
    topo = Topology(
        switches=3,
        links=[
            Link(1, 2, 2, 1, failable=True),
            Link(1, 3, 3, 1, failable=True),
            Link(3, 2, 2, 3, failable=False),
        ],
        layers={},
        name="toy",
    )
    fwd = Assign("pt", 2)
    p = union(*[Seq(Test("sw", i), fwd) for i in (1, 2, 3)])
    p1_hat = Union(
        Seq(Test("up2", 1), Assign("pt", 2)),
        Seq(Test("up2", 0), Assign("pt", 3)),
    )
    p_hat = union(
        Seq(Test("sw", 1), p1_hat),
        Seq(Test("sw", 2), fwd),
        Seq(Test("sw", 3), fwd),
    )
    f0 = Seq(Assign("up2", 1), Assign("up3", 1))
    f1 = NaryChoice((
        (f0, Fraction(1, 2)),
        (Seq(Assign("up2", 0), Assign("up3", 1)), Fraction(1, 4)),
        (Seq(Assign("up2", 1), Assign("up3", 0)), Fraction(1, 4)),
    ))
    # The ingress pins the health flags at their canonical out-of-scope
    # value so both sides of an equivalence see identical inputs.
    in_pred = seq(Test("sw", 1), Test("pt", 1), Test("up2", 0), Test("up3", 0))
    out_pred = Seq(Test("sw", 2), Test("pt", 2))
    teleport = Seq(Assign("sw", 2), Assign("pt", 2))
    return ToyNet(universe, topo, p, p_hat,
                  topo_program(topo, guarded=False),
                  topo_program(topo, guarded=True),
                  f0, f1, in_pred, out_pred, teleport)


# -- FatTree and AB FatTree generators ----------------------------------------


def _build_fattree(pods: list[tuple[list[int], list[int], str]],
                   cores: list[int], wiring: dict[int, list[int]],
                   name: str) -> Topology:
    """Assemble a 3-level tree.  ``pods`` lists (edge ids, agg ids, type);
    ``wiring`` maps each agg id to its core neighbors.  Ports are numbered
    downlinks first, then uplinks, ascending by neighbor id.  Aggregation
    to core links fail only in the downward (core to agg) direction."""
    links: list[Link] = []
    layers: dict[int, str] = {}
    agg_type: dict[int, str] = {}
    core_down: dict[int, list[int]] = {c: [] for c in cores}
    for edges, aggs, typ in pods:
        for a in aggs:
            agg_type[a] = typ
        for e in edges:
            agg_type[e] = typ
    for c in cores:
        layers[c] = CORE
    for edges, aggs, typ in pods:
        for e in edges:
            layers[e] = EDGE
        for a in aggs:
            layers[a] = AGG
        for a in aggs:
            for c in wiring[a]:
                core_down[c].append(a)
    # Edge <-> agg: edge ports are uplinks only (host side elided).
    for edges, aggs, _ in pods:
        for e in edges:
            for i, a in enumerate(sorted(aggs)):
                eport = 1 + i
                aport = 1 + sorted(edges).index(e)
                links.append(Link(e, eport, a, aport, failable=False))
                links.append(Link(a, aport, e, eport, failable=False))
    # Agg <-> core: agg downlinks occupy 1..len(edges).
    for edges, aggs, _ in pods:
        ndown = len(edges)
        for a in aggs:
            for i, c in enumerate(sorted(wiring[a])):
                aport = ndown + 1 + i
                cport = 1 + sorted(core_down[c]).index(a)
                links.append(Link(a, aport, c, cport, failable=False))
                links.append(Link(c, cport, a, aport, failable=True))
    nsw = max(max(layers), 0)
    return Topology(nsw, links, layers, agg_type, name)


def fattree20() -> Topology:
    """3-level FatTree: 8 edge (1-8), 8 aggregation (9-16), 4 core (17-20).

    Every pod is wired the same way: its first aggregation switch connects
    to cores 17 and 18, its second to cores 19 and 20.
    """
    pods = [([1 + 2 * i, 2 + 2 * i], [9 + 2 * i, 10 + 2 * i], "A") for i in range(4)]
    wiring = {}
    for _, (a1, a2), _ in pods:
        wiring[a1] = [17, 18]
        wiring[a2] = [19, 20]
    return _build_fattree(pods, [17, 18, 19, 20], wiring, "fattree20")


def abfattree20() -> Topology:
    """AB FatTree on the same switches: pods 1 and 3 are type A (wired like
    the FatTree), pods 2 and 4 are type B (first agg to cores 17/19, second
    to 18/20), so every core sees aggregation switches of both types."""
    types = ["A", "B", "A", "B"]
    pods = [([1 + 2 * i, 2 + 2 * i], [9 + 2 * i, 10 + 2 * i], types[i]) for i in range(4)]
    wiring = {}
    for i, (_, (a1, a2), typ) in enumerate(pods):
        if typ == "A":
            wiring[a1] = [17, 18]
            wiring[a2] = [19, 20]
        else:
            wiring[a1] = [17, 19]
            wiring[a2] = [18, 20]
    return _build_fattree(pods, [17, 18, 19, 20], wiring, "abfattree20")


def abfattree12() -> Topology:
    """Reduced AB FatTree: 4 edge (1-4), 4 aggregation (5-8), 4 core (9-12),
    one type-A and one type-B pod.  Cores have degree 2, so there are no
    same-type rerouting targets; useful as a small smoke instance."""
    pods = [([1, 2], [5, 6], "A"), ([3, 4], [7, 8], "B")]
    wiring = {5: [9, 10], 6: [11, 12], 7: [9, 11], 8: [10, 12]}
    return _build_fattree(pods, [9, 10, 11, 12], wiring, "abfattree12")


# -- F10 routing -------------------------------------------------------------

F10_0, F10_3, F10_35 = "f10_0", "f10_3", "f10_35"
F10_VARIANTS = (F10_0, F10_3, F10_35)


def routing_info(topo: Topology, dest: int):
    """Hop distances to ``dest`` and the minimum-length ports per switch."""
    adj = topo.adjacency()
    radj: dict[int, list[int]] = {}
    for l in topo.links:
        radj.setdefault(l.dst, []).append(l.src)
    dist = {dest: 0}
    work = deque([dest])
    while work:
        n = work.popleft()
        for s in radj.get(n, ()):
            if s not in dist:
                dist[s] = dist[n] + 1
                work.append(s)
    min_ports: dict[int, list[int]] = {}
    for s, neigh in adj.items():
        if s == dest or s not in dist:
            continue
        min_ports[s] = sorted(
            q for q, n in neigh if dist.get(n, None) == dist[s] - 1
        )
    return dist, min_ports, adj


def _up_cases(ports: list[int], hit, miss: Program) -> Program:
    """Branch on every up/down combination of the given port flags; ``hit``
    builds the body from the list of healthy ports, ``miss`` handles the
    all-down case."""
    if not ports:
        return miss
    branches = []
    for mask in range(1 << len(ports)):
        healthy = [q for i, q in enumerate(ports) if (mask >> i) & 1]
        down = [q for i, q in enumerate(ports) if not (mask >> i) & 1]
        guard = seq(*[Test(f"up{q}", 1) for q in healthy],
                    *[Test(f"up{q}", 0) for q in down])
        body = hit(healthy) if healthy else miss
        branches.append(Seq(guard, body))
    return union(*branches)


def f10(variant: str, topo: Topology, dest: int,
        default_field: str = "default") -> Program:
    """The F10 switch policy in one of its three refinement stages.

    f10_0: forward out a uniformly random minimum-length port, excluding
    the arrival port.  f10_3 adds, at core switches whose downward port is
    unhealthy, rerouting to a healthy port toward an aggregation switch of
    the opposite subtree type.  f10_35 additionally falls back to a
    same-type aggregation switch, marking the packet (default := 0) so the
    next hop forwards it downward and restores the mark; the mark is
    initialized to 1 at the ingress.
    """
    if variant not in F10_VARIANTS:
        raise WellFormednessError(f"unknown F10 variant {variant!r}")
    if not topo.layers:
        raise WellFormednessError(f"{variant} needs layer annotations on the topology")
    if variant != F10_0 and not topo.agg_type:
        raise WellFormednessError(f"{variant} needs subtree types on the topology")
    dist, min_ports, adj = routing_info(topo, dest)
    with_mark = variant == F10_35

    def ecmp(s: int, arrivals: list[int], init_mark_on: int | None = None) -> Program:
        branches = []
        for r in arrivals:
            ports = [q for q in min_ports[s] if q != r]
            body = uniform(*[Assign("pt", q) for q in ports]) if ports else Drop()
            if init_mark_on is not None and r == init_mark_on:
                body = Seq(Assign(default_field, 1), body)
            branches.append(Seq(Test("pt", r), body))
        return union(*branches)

    def core_policy(s: int) -> Program:
        onpath = min_ports[s]
        assert len(onpath) == 1, f"core {s} has {len(onpath)} minimum ports"
        o = onpath[0]
        neighbors = dict(adj[s])
        target_type = topo.agg_type[neighbors[o]]
        if variant == F10_0:
            return Assign("pt", o)
        opposite = sorted(q for q, n in adj[s]
                          if q != o and topo.agg_type[n] != target_type)
        same = sorted(q for q, n in adj[s]
                      if q != o and topo.agg_type[n] == target_type)
        dead_end = Assign("pt", o)  # dropped by the guarded link
        if variant == F10_3:
            fallback = dead_end
        else:
            fallback = _up_cases(
                same,
                lambda healthy: Seq(Assign(default_field, 0),
                                    uniform(*[Assign("pt", q) for q in healthy])),
                dead_end,
            )
        reroute = _up_cases(
            opposite,
            lambda healthy: uniform(*[Assign("pt", q) for q in healthy]),
            fallback,
        )
        return Union(Seq(Test(f"up{o}", 1), Assign("pt", o)),
                     Seq(Test(f"up{o}", 0), reroute))

    def agg_policy(s: int) -> Program:
        arrivals = [q for q, _ in adj[s]]
        normal = ecmp(s, arrivals)
        if not with_mark:
            return normal
        downs = sorted(q for q, n in adj[s] if topo.layers[n] == EDGE)
        marked = Seq(Assign(default_field, 1),
                     uniform(*[Assign("pt", q) for q in downs]))
        return Union(Seq(Test(default_field, 0), marked),
                     Seq(Test(default_field, 1), normal))

    branches = []
    for s in sorted(adj):
        if s == dest:
            continue
        layer = topo.layers[s]
        if layer == EDGE:
            pol = ecmp(s, [0] + [q for q, _ in adj[s]],
                       init_mark_on=0 if with_mark else None)
        elif layer == AGG:
            pol = agg_policy(s)
        else:
            pol = core_policy(s)
        branches.append(Seq(Test("sw", s), pol))
    return union(*branches)


# -- case-study model assembly -------------------------------------------------

COUNTER_DOMAIN = 16


def _saturating_increment(fld: str, top: int) -> Program:
    branches = [Seq(Test(fld, v), Assign(fld, v + 1)) for v in range(top)]
    branches.append(Seq(Test(fld, top), Skip()))
    return union(*branches)


def case_universe(topo: Topology, k: int | None, counter: bool = False) -> PacketUniverse:
    decls = [FieldDecl("sw", topo.switches + 1),
             FieldDecl("pt", topo.max_port() + 1),
             FieldDecl("default", 2)]
    for flag in topo.flag_fields():
        decls.append(FieldDecl(flag, 2))
    if k is not None and k > 0:
        decls.append(FieldDecl("budget", k + 1))
    if counter:
        decls.append(FieldDecl("counter", COUNTER_DOMAIN))
    return PacketUniverse(decls)


def case_failure(topo: Topology, k: int | None, p_fail: Fraction) -> Program:
    """Per-hop failure step for the big instances: at a core switch the
    flags of its (downward) ports are re-flipped, gated on the shared
    failure budget when k is finite; elsewhere it is a no-op.  Flags are
    freshly sampled each hop, so a flag only describes the current
    switch's ports."""
    if k == 0:
        return Skip()
    by_core: dict[int, list[int]] = {}
    for l in topo.failable_links():
        by_core.setdefault(l.src, []).append(l.srcport)
    if not by_core:
        return Skip()
    keep = 1 - p_fail
    branches = []
    core_tests = []
    for c in sorted(by_core):
        flips = []
        for q in sorted(by_core[c]):
            fl = f"up{q}"
            if k is None:
                flips.append(Choice(keep, Assign(fl, 1), Assign(fl, 0)))
            else:
                flip = Choice(keep, Assign(fl, 1),
                              Seq(Assign(fl, 0), _decrement("budget", k)))
                flips.append(Union(
                    Seq(Neg(Test("budget", 0)), flip),
                    Seq(Test("budget", 0), Assign(fl, 1)),
                ))
        branches.append(Seq(Test("sw", c), seq(*flips)))
        core_tests.append(Test("sw", c))
    branches.append(Seq(Neg(union(*core_tests)), Skip()))
    return union(*branches)


@dataclass
class CaseModel:
    """A fully assembled failure-aware routing model plus its teleport
    specification over the same universe."""

    topo: Topology
    universe: PacketUniverse
    scheme: Program
    program: Program      # in ; var-wrapped do-while ; delivery normalization
    teleport: Program     # in ; sw:=dest ; pt:=0
    in_packets: list[int]  # one pinned ingress packet per source switch
    target_packet: int    # the packet every delivered/teleported packet becomes
    dest: int


def build_case_model(variant: str, topo: Topology, k: int | None,
                     p_fail: Fraction = Fraction(1, 4), dest: int = 1,
                     counter: bool = False) -> CaseModel:
    universe = case_universe(topo, k, counter)
    scheme = f10(variant, topo, dest)
    flags = topo.flag_fields()
    hop = seq(case_failure(topo, k, p_fail),
              scheme,
              topo_program(topo, guarded=True))
    if counter:
        hop = Seq(hop, _saturating_increment("counter", COUNTER_DOMAIN - 1))
    if flags:
        hop = Seq(hop, seq(*[Assign(fl, 1) for fl in flags]))
    loop = DoWhile(hop, Neg(Test("sw", dest)))
    body = Seq(loop, Assign("pt", 0))
    if k is not None and k > 0:
        body = Var("budget", k, body)
    for fl in reversed(flags):
        body = Var(fl, 1, body)

    sources = sorted(s for s, layer in topo.layers.items()
                     if layer == EDGE and s != dest)
    pinned = {"pt": 0, "default": 1}
    for fl in flags:
        pinned[fl] = 0
    if k is not None and k > 0:
        pinned["budget"] = 0
    if counter:
        pinned["counter"] = 0

    def ingress_pred(s: int) -> Program:
        tests = [Test("sw", s)] + [Test(f, v) for f, v in pinned.items()]
        return seq(*tests)

    in_pred = union(*[ingress_pred(s) for s in sources])
    program = Seq(in_pred, body)
    teleport = seq(in_pred, Assign("sw", dest), Assign("pt", 0))
    in_packets = [universe.packet(sw=s, **pinned) for s in sources]
    target = universe.packet(sw=dest, **pinned)
    return CaseModel(topo, universe, scheme, program, teleport,
                     in_packets, target, dest)


def topology_by_name(name: str) -> Topology:
    table = {"fattree20": fattree20, "abfattree20": abfattree20,
             "abfattree12": abfattree12}
    if name not in table:
        raise WellFormednessError(f"unknown topology {name!r}")
    return table[name]()
