"""Command-line front door.

    pnk equiv FILE1 FILE2 [--inputs SPEC]      exit 0 equal / 1 not / 2 error
    pnk leq FILE1 FILE2 [--inputs SPEC]        exit 0 leq / 1 not / 2 error
    pnk dist FILE --on PACKETS                 print the output distribution
    pnk query FILE --on PACKETS --measure M    print a scalar measure
    pnk sample FILE --on PACKETS -n N          Monte Carlo estimate
    pnk casestudy NAME [--topo T --k ... --p ...]

Programs are files with an optional ``fields { ... }`` header; a universe
can also be supplied as JSON via --universe.  Reports are JSON by default
(exact probabilities as reduced rationals) or CSV via --format csv.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from . import casestudy as cs
from .analysis import InputSpec, QuerySpec, equiv, estimate, leq, query
from .bigstep import Kernel
from .errors import PnkError
from .parser import parse, parse_file_text
from .syntax import desugar
from .universe import PacketUniverse

DEFAULT_STATE_BUDGET = 200_000


def _fmt_scalar(x, exact: bool) -> str:
    if isinstance(x, Fraction):
        return str(x)
    return f"{float(x):.12g}"


def _jsonable(x, exact=True):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, float):
        return float(f"{x:.12g}")
    if isinstance(x, dict):
        return {str(k): _jsonable(v, exact) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v, exact) for v in x]
    return x


def _emit(obj, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(_jsonable(obj), indent=2, sort_keys=True))
        return
    # CSV: flat tables only; everything else falls back to key,value rows.
    rows = None
    if isinstance(obj, dict):
        for v in obj.values():
            if isinstance(v, list) and v and isinstance(v[0], dict):
                rows = v
                break
    if isinstance(obj, list) and obj and isinstance(obj[0], dict):
        rows = obj
    if rows is not None:
        keys = list(rows[0].keys())
        print(",".join(keys))
        for r in rows:
            print(",".join(_fmt_scalar(r.get(k, ""), True) if not isinstance(r.get(k), str)
                           else r[k] for k in keys))
    else:
        flat = _jsonable(obj)
        for k, v in (flat.items() if isinstance(flat, dict) else enumerate(flat)):
            print(f"{k},{v}")


def _load_universe(args) -> PacketUniverse | None:
    if args.universe:
        with open(args.universe) as fh:
            return PacketUniverse.from_json(fh.read())
    return None


def _load_program(path: str, universe):
    with open(path) as fh:
        return parse_file_text(fh.read(), universe)


def _load_two(args):
    uni = _load_universe(args)
    uni1, p = _load_program(args.file1, uni)
    uni2, q = _load_program(args.file2, uni1)
    if uni1 != uni2:
        raise PnkError("the two programs use different universes")
    return uni1, p, q


def _input_spec(args, universe) -> InputSpec:
    spec = args.inputs
    if spec == "all":
        return InputSpec.full_universe(universe, cap=args.cap_subsets)
    with open(spec) as fh:
        obj = json.load(fh)
    if "sets" in obj:
        return InputSpec.of_sets(
            [universe.set_from_records(r) for r in obj["sets"]]
        )
    if "all_subsets_of" in obj:
        packets = [universe.packet(**r) for r in obj["all_subsets_of"]]
        return InputSpec.all_subsets(packets, cap=args.cap_subsets)
    raise PnkError("input spec needs a 'sets' or 'all_subsets_of' key")


def _packets_arg(text: str, universe):
    if os.path.exists(text):
        with open(text) as fh:
            text = fh.read()
    records = json.loads(text)
    return universe.set_from_records(records)


def _parse_measure(text: str, universe) -> QuerySpec:
    parts = text.split(":")
    kind = parts[0]
    if kind == "prob-nonempty":
        return QuerySpec.prob_nonempty()
    if kind == "prob-satisfies":
        if len(parts) < 2:
            raise PnkError("prob-satisfies:PRED[:all|some]")
        quantifier = parts[2] if len(parts) > 2 else "all"
        return QuerySpec.prob_satisfies(parse(parts[1], universe), quantifier)
    if kind == "expected":
        return QuerySpec.expected_field(parts[1])
    if kind == "cdf":
        return QuerySpec.field_cdf(parts[1], int(parts[2]))
    raise PnkError(f"unknown measure {text!r}")


def _add_common(sub):
    sub.add_argument("--universe", help="universe JSON file")
    # Tri-state: None means the per-command default (exact everywhere
    # except the quantitative case-study sweeps, which default to float).
    sub.add_argument("--exact", dest="exact", action="store_true", default=None)
    sub.add_argument("--float", dest="exact", action="store_false")
    sub.add_argument("--tol", type=float, default=1e-9)
    sub.add_argument("--max-states", type=int,
                     default=int(os.environ.get("PNK_MAX_STATES", DEFAULT_STATE_BUDGET)))
    sub.add_argument("--cap-subsets", type=int, default=12)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--format", choices=("json", "csv"), default="json")
    sub.add_argument("--jobs", type=int, default=1)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="pnk")
    subs = ap.add_subparsers(dest="cmd", required=True)

    s = subs.add_parser("equiv", help="decide program equivalence")
    s.add_argument("file1")
    s.add_argument("file2")
    s.add_argument("--inputs", default="all",
                   help="'all' or a JSON file with 'sets'/'all_subsets_of'")
    _add_common(s)

    s = subs.add_parser("leq", help="decide the program order")
    s.add_argument("file1")
    s.add_argument("file2")
    s.add_argument("--inputs", default="all")
    _add_common(s)

    s = subs.add_parser("dist", help="output distribution on one input")
    s.add_argument("file1")
    s.add_argument("--on", required=True, help="JSON packet-record list (or file)")
    _add_common(s)

    s = subs.add_parser("query", help="scalar measure of the output distribution")
    s.add_argument("file1")
    s.add_argument("--on", required=True)
    s.add_argument("--measure", required=True,
                   help="prob-nonempty | prob-satisfies:PRED[:all|some] | "
                        "expected:FIELD | cdf:FIELD:THRESHOLD")
    _add_common(s)

    s = subs.add_parser("sample", help="Monte Carlo estimate on one input")
    s.add_argument("file1")
    s.add_argument("--on", required=True)
    s.add_argument("-n", "--samples", type=int, default=10_000)
    s.add_argument("--star-depth", type=int, default=256)
    _add_common(s)

    s = subs.add_parser("casestudy", help="run a named case study")
    s.add_argument("name", choices=("toy-overview", "f10-resilience", "f10-latency"))
    s.add_argument("--topo", default="abfattree20",
                   choices=("fattree20", "abfattree20", "abfattree12"))
    s.add_argument("--k", default=None,
                   help="comma-separated failure bounds, e.g. 0,1,2,inf")
    s.add_argument("--p", default="1/4", help="link failure probability")
    s.add_argument("--p-values", default=None,
                   help="comma-separated sweep values for delivery tables")
    _add_common(s)

    args = ap.parse_args(argv)
    try:
        return _dispatch(args)
    except PnkError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    fmt = args.format
    exact = args.exact is not False  # commands other than casestudy default to exact
    if args.cmd == "equiv":
        uni, p, q = _load_two(args)
        verdict = equiv(p, q, _input_spec(args, uni), uni, exact=exact,
                        tol=args.tol, state_budget=args.max_states)
        _emit(verdict.to_jsonable(uni), fmt)
        return 0 if verdict.result == "equal" else 1
    if args.cmd == "leq":
        uni, p, q = _load_two(args)
        verdict = leq(p, q, _input_spec(args, uni), uni, exact=exact,
                      tol=args.tol, state_budget=args.max_states)
        _emit(verdict.to_jsonable(uni), fmt)
        return 0 if verdict.result == "leq" else 1
    if args.cmd == "dist":
        uni, p = _load_program(args.file1, _load_universe(args))
        aset = _packets_arg(args.on, uni)
        kern = Kernel(desugar(p), uni, exact=exact,
                      state_budget=args.max_states)
        _emit(kern.apply(aset).to_jsonable(uni, aset), fmt)
        return 0
    if args.cmd == "query":
        uni, p = _load_program(args.file1, _load_universe(args))
        aset = _packets_arg(args.on, uni)
        measure = _parse_measure(args.measure, uni)
        value = query(p, aset, measure, uni, exact=exact,
                      state_budget=args.max_states)
        _emit({"measure": args.measure, "value": value}, fmt)
        return 0
    if args.cmd == "sample":
        uni, p = _load_program(args.file1, _load_universe(args))
        aset = _packets_arg(args.on, uni)
        est = estimate(p, aset, uni, args.samples, seed=args.seed,
                       star_depth=args.star_depth)
        _emit({
            "samples": args.samples,
            "completed": est.n_completed,
            "truncated": est.n_truncated,
            "support": [
                {"set": uni.set_to_records(b), "prob": est.prob(b)}
                for b in sorted(est.counts, key=sorted)
            ],
        }, fmt)
        return 0
    if args.cmd == "casestudy":
        ks = None
        if args.k is not None:
            ks = [cs._parse_k(x) for x in str(args.k).split(",")]
        p_values = None
        if args.p_values:
            p_values = [Fraction(x) for x in args.p_values.split(",")]
        report = cs.run_casestudy(
            args.name, topo_name=args.topo, ks=ks, p_fail=Fraction(args.p),
            p_values=p_values, exact=args.exact, state_budget=args.max_states,
            jobs=args.jobs)
        _emit(report, fmt)
        return 0
    raise PnkError(f"unknown command {args.cmd!r}")


if __name__ == "__main__":
    sys.exit(main())
