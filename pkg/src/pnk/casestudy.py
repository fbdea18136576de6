"""Case-study runners: the three-switch overview suite, the F10 resilience
grid, and the F10 latency/delivery tables.

All runners return plain dicts/lists so the CLI can render them as JSON or
CSV; probabilities are exact Fractions in exact mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from . import netlib
from .analysis import InputSpec, QuerySpec, equiv, leq, query_dist
from .bigstep import Kernel
from .syntax import desugar, seq
from .universe import EMPTY

K_VALUES = (0, 1, 2, 3, 4, None)


def _k_label(k) -> str:
    return "inf" if k is None else str(k)


def _parse_k(text: str):
    return None if text in ("inf", "infinity", "oo") else int(text)


# -- the overview (three-switch) suite ----------------------------------------


def toy_overview(exact: bool = True, state_budget: int = 200_000) -> dict:
    """Every §-overview check: the two delivery probabilities under f2 and
    the five (in)equivalences, all in exact mode by default."""
    net = netlib.toy()
    u = net.universe
    src = frozenset({net.source_packet()})
    f2 = net.f2(Fraction(1, 5))

    def delivery(scheme) -> Fraction:
        k = Kernel(desugar(net.wrapped(scheme, f2)), u,
                   exact=exact, state_budget=state_budget)
        return query_dist(k.apply(src).as_dict(), QuerySpec.prob_nonempty(), u,
                          exact=exact)

    flag0 = InputSpec.all_subsets(net.flag_zero_packets(), cap=20)
    in_rows = InputSpec.of_sets([EMPTY, src])

    checks = {}
    checks["delivery_naive_f2"] = delivery(net.p)
    checks["delivery_resilient_f2"] = delivery(net.p_hat)
    checks["model_eq_refined_f0"] = equiv(
        net.M(net.p), net.M_hat(net.p, net.f0), flag0, u,
        exact=exact, state_budget=state_budget).result
    checks["resilient_f0_eq_teleport"] = equiv(
        net.wrapped(net.p_hat, net.f0), seq(net.in_pred, net.teleport),
        InputSpec.all_subsets(net.flag_zero_packets(), cap=20), u,
        exact=exact, state_budget=state_budget).result
    checks["resilient_f1_eq_teleport"] = equiv(
        net.wrapped(net.p_hat, net.f1), seq(net.in_pred, net.teleport),
        in_rows, u, exact=exact, state_budget=state_budget).result
    naive_f1 = equiv(
        net.wrapped(net.p, net.f1), seq(net.in_pred, net.teleport),
        in_rows, u, exact=exact, state_budget=state_budget)
    checks["naive_f1_eq_teleport"] = naive_f1.result
    checks["naive_f1_witness"] = naive_f1.witness is not None
    checks["naive_lt_resilient_f2"] = (
        leq(net.wrapped(net.p, f2), net.wrapped(net.p_hat, f2),
            in_rows, u, exact=exact, state_budget=state_budget).result == "leq"
        and equiv(net.wrapped(net.p, f2), net.wrapped(net.p_hat, f2),
                  in_rows, u, exact=exact, state_budget=state_budget).result
        == "not-equal"
    )
    return checks


# -- F10 resilience grid -------------------------------------------------------


@dataclass
class CellResult:
    scheme: str
    k: int | None
    equivalent: bool
    min_delivery: object  # smallest per-source delivery probability
    witness_source: int | None = None


def teleport_cell(variant: str, topo: netlib.Topology, k: int | None,
                  p_fail: Fraction, exact: bool = True,
                  state_budget: int = 200_000) -> CellResult:
    """Does the scheme behave like teleportation under failure bound k?

    Both sides produce point distributions on every pinned ingress packet
    when they agree (the model delivers with probability one and the
    delivered packet is normalized), so agreement on all ingress singletons
    settles all ingress subsets.
    """
    cm = netlib.build_case_model(variant, topo, k, p_fail)
    kern = Kernel(desugar(cm.program), cm.universe, exact=exact,
                  state_budget=state_budget)
    target = frozenset({cm.target_packet})
    worst = None
    witness = None
    ok = True
    for src in cm.in_packets:
        dist = kern.apply(frozenset({src})).as_dict()
        delivered = dist.get(target, 0)
        stray = sum(p for b, p in dist.items() if b and b != target)
        if stray != 0:
            ok = False
        if worst is None or delivered < worst:
            worst = delivered
            if delivered != 1 and witness is None:
                witness = src
        if delivered != 1:
            ok = False
    return CellResult(variant, k, ok, worst, witness)


def _grid_cell(args):
    topo_name, scheme, k, p_str, exact, state_budget = args
    topo = netlib.topology_by_name(topo_name)
    return teleport_cell(scheme, topo, k, Fraction(p_str), exact=exact,
                         state_budget=state_budget)


def resilience_grid(topo: netlib.Topology, ks=K_VALUES,
                    p_fail: Fraction = Fraction(1, 4),
                    schemes=netlib.F10_VARIANTS, exact: bool = True,
                    state_budget: int = 200_000, jobs: int = 1) -> list[dict]:
    cells = [(k, scheme) for k in ks for scheme in schemes]
    if jobs > 1 and topo.name:
        from concurrent.futures import ProcessPoolExecutor
        work = [(topo.name, scheme, k, str(p_fail), exact, state_budget)
                for k, scheme in cells]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_grid_cell, work))
    else:
        results = [teleport_cell(scheme, topo, k, p_fail, exact=exact,
                                 state_budget=state_budget)
                   for k, scheme in cells]
    rows = []
    by_cell = dict(zip(cells, results))
    for k in ks:
        row = {"k": _k_label(k)}
        for scheme in schemes:
            cell = by_cell[(k, scheme)]
            row[scheme] = "yes" if cell.equivalent else "no"
            row[f"{scheme}_min_delivery"] = cell.min_delivery
        rows.append(row)
    return rows


def fattree_scheme_equivalence(topo: netlib.Topology, ks=K_VALUES,
                               p_fail: Fraction = Fraction(1, 4),
                               exact: bool = True,
                               state_budget: int = 200_000) -> list[dict]:
    """Per-ingress equivalence of f10_0 and f10_3 under each failure bound;
    on the plain FatTree 3-hop rerouting never fires, so they must agree."""
    out = []
    for k in ks:
        m0 = netlib.build_case_model(netlib.F10_0, topo, k, p_fail)
        m3 = netlib.build_case_model(netlib.F10_3, topo, k, p_fail)
        k0 = Kernel(desugar(m0.program), m0.universe, exact=exact,
                    state_budget=state_budget)
        k3 = Kernel(desugar(m3.program), m3.universe, exact=exact,
                    state_budget=state_budget)
        same = all(
            k0.apply(frozenset({s})).as_dict() == k3.apply(frozenset({s})).as_dict()
            for s in m0.in_packets
        )
        out.append({"k": _k_label(k), "f10_0_eq_f10_3": "yes" if same else "no"})
    return out


# -- delivery and latency tables ----------------------------------------------


def delivery_sweep(topo: netlib.Topology, p_values, k: int | None = None,
                   schemes=netlib.F10_VARIANTS, exact: bool = True,
                   state_budget: int = 200_000) -> list[dict]:
    """Average delivery probability per (scheme, link-failure probability)."""
    rows = []
    for p_fail in p_values:
        row: dict = {"p": p_fail}
        for scheme in schemes:
            cm = netlib.build_case_model(scheme, topo, k, Fraction(p_fail))
            kern = Kernel(desugar(cm.program), cm.universe, exact=exact,
                          state_budget=state_budget)
            total = Fraction(0) if exact else 0.0
            for src in cm.in_packets:
                dist = kern.apply(frozenset({src})).as_dict()
                total += sum(p for b, p in dist.items() if b)
            row[scheme] = total / len(cm.in_packets)
        rows.append(row)
    return rows


def hop_cdf(topo: netlib.Topology, p_fail: Fraction = Fraction(1, 4),
            k: int | None = None, schemes=netlib.F10_VARIANTS,
            max_hops: int = netlib.COUNTER_DOMAIN - 1, exact: bool = True,
            state_budget: int = 200_000) -> dict:
    """Fraction of traffic delivered within each hop count (not conditioned),
    plus the expected hop count conditioned on delivery, per scheme.
    Traffic is uniform over the ingress switches."""
    out: dict = {"max_hops": max_hops, "schemes": {}}
    for scheme in schemes:
        cm = netlib.build_case_model(scheme, topo, k, p_fail, counter=True)
        kern = Kernel(desugar(cm.program), cm.universe, exact=exact,
                      state_budget=state_budget)
        n = len(cm.in_packets)
        mass_at = [Fraction(0) if exact else 0.0] * (max_hops + 1)
        delivered_total = Fraction(0) if exact else 0.0
        hops_weighted = Fraction(0) if exact else 0.0
        for src in cm.in_packets:
            dist = kern.apply(frozenset({src})).as_dict()
            for b, p in dist.items():
                if not b:
                    continue
                counts = {cm.universe.field_value(i, "counter") for i in b}
                assert len(counts) == 1
                h = next(iter(counts))
                mass_at[h] += p / n
                delivered_total += p / n
                hops_weighted += p * h / n
        cdf = []
        acc = Fraction(0) if exact else 0.0
        for h in range(max_hops + 1):
            acc += mass_at[h]
            cdf.append(acc)
        expected = hops_weighted / delivered_total if delivered_total else None
        out["schemes"][scheme] = {
            "cdf": cdf,
            "delivered": delivered_total,
            "expected_hops_given_delivery": expected,
        }
    return out


def run_casestudy(name: str, topo_name: str = "abfattree20", ks=None,
                  p_fail=Fraction(1, 4), p_values=None, exact: bool | None = None,
                  state_budget: int = 200_000, jobs: int = 1) -> dict:
    """Dispatch for the CLI; returns a jsonable report.

    ``exact=None`` applies the per-study default: verdicts (the overview
    suite and the resilience grid) run exact, quantitative sweeps run in
    float mode for speed.
    """
    if name == "toy-overview":
        checks = toy_overview(exact=exact is not False,
                              state_budget=state_budget)
        return {"casestudy": name, "checks": checks}
    topo = netlib.topology_by_name(topo_name)
    ks = K_VALUES if ks is None else ks
    if name == "f10-resilience":
        report = {
            "casestudy": name,
            "topology": topo_name,
            "p_fail": p_fail,
            "grid": resilience_grid(topo, ks, p_fail, exact=exact is not False,
                                    state_budget=state_budget, jobs=jobs),
        }
        if topo_name == "fattree20":
            report["f10_0_eq_f10_3"] = fattree_scheme_equivalence(
                topo, ks, p_fail, exact=exact is not False,
                state_budget=state_budget)
        return report
    if name == "f10-latency":
        p_values = p_values or [Fraction(1, 10), Fraction(1, 5), Fraction(3, 10),
                                Fraction(2, 5), Fraction(1, 2)]
        sweeps_exact = exact is True
        return {
            "casestudy": name,
            "topology": topo_name,
            "p_fail": p_fail,
            "mode": "exact" if sweeps_exact else "float",
            "hop_cdf": hop_cdf(topo, p_fail, None, exact=sweeps_exact,
                               state_budget=state_budget),
            "delivery_vs_p": delivery_sweep(topo, p_values, None,
                                            exact=sweeps_exact,
                                            state_budget=state_budget),
        }
    raise ValueError(f"unknown case study {name!r}")
