"""Command-line front end: relation generation, verification suites,
series dumps and rank computations.

Exit codes: 0 on success, 1 when a verification or internal check fails,
2 when a precondition or argument is violated (the offending condition is
named on stderr).  All rationals in emitted files are decimal strings.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

from .catalog import SeriesCatalog, delta_edge, edge_series_xy, identity_suite
from .classes import (
    TautClass,
    matrix_rank,
    pushforward_forget_small,
    pushforward_forget_weight1,
    to_vector,
)
from .graphs import StableGraph, WeightData, enumerate_graphs
from .relations import (
    PreconditionError,
    boundary_sq_relation,
    extended_fz_relation,
    fz_relation,
    open_fz_relation,
    open_sq_relation,
    pushforward_oracle,
    verify_chain,
)
from .serialize import dumps, series_to_dict

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_PRECONDITION = 2

CONFIG_KEYS = {"cache_dir", "threads", "seed", "log", "output"}

CONSTRUCTIONS = ("fz", "open-fz", "open-sq", "boundary-sq", "extended")


class UsageError(ValueError):
    """Argument or configuration problem; maps to exit code 2."""


class Logger:
    def __init__(self, mode: str):
        self.mode = mode

    def event(self, **fields) -> None:
        if self.mode == "json":
            print(dumps(fields))
        else:
            print(" ".join(f"{k}={v}" for k, v in sorted(fields.items())))


def _parse_fractions(text: str) -> tuple:
    if not text:
        return ()
    return tuple(Fraction(part) for part in text.split(","))


def _parse_ints(text: str) -> tuple:
    if not text:
        return ()
    return tuple(int(part) for part in text.split(","))


def _parse_orders(text: str) -> dict:
    out = {}
    for part in text.split(","):
        name, _, value = part.partition("=")
        if not value:
            raise UsageError(f"order {part!r} is not of the form var=N")
        out[name.strip()] = int(value)
    return out


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise UsageError(
            f"unknown config keys: {', '.join(unknown)}; "
            f"known keys: {', '.join(sorted(CONFIG_KEYS))}"
        )
    return data


def _write_payload(payload: dict, out: str | None) -> None:
    text = dumps(payload)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _primitive_scale(rel: TautClass) -> TautClass:
    """Clear denominators and divide by the content, keeping the sign of
    the lexicographically first stored coefficient."""
    coeffs = [rel.terms[key] for key in sorted(rel.terms)]
    if not coeffs:
        return rel
    mult = math.lcm(*(c.denominator for c in coeffs))
    content = math.gcd(*(abs(c.numerator * mult // c.denominator) for c in coeffs))
    scale = Fraction(mult, content)
    if coeffs[0] < 0:
        scale = -scale
    return rel.scale(scale)


def cmd_relations_gen(args, cfg: dict, log: Logger) -> int:
    weights = WeightData(_parse_fractions(args.weights))
    subset = _parse_ints(args.subset)
    sigma = _parse_ints(args.sigma)
    threads = args.threads or int(cfg.get("threads", 1))
    construction = args.construction
    if sigma and construction == "fz":
        construction = "extended"
    started = time.perf_counter()
    if construction == "fz":
        rel = fz_relation(args.genus, weights, args.codim, subset,
                          threads=threads)
    elif construction == "extended":
        rel = extended_fz_relation(args.genus, weights, args.codim, sigma,
                                   subset, threads=threads)
    elif construction == "open-fz":
        rel = open_fz_relation(args.genus, weights.n, args.codim, subset,
                               weights=weights if weights.n else None)
    elif construction == "open-sq":
        rel = open_sq_relation(args.genus, weights, args.codim, args.d,
                               _parse_ints(args.a) or (0,) * weights.n,
                               half_sign=args.half_sign,
                               pd_sign=args.pd_sign)
    elif construction == "boundary-sq":
        rel = boundary_sq_relation(args.genus, weights, args.codim, args.d,
                                   _parse_ints(args.a) or (0,) * weights.n,
                                   half_sign=args.half_sign,
                                   pd_sign=args.pd_sign)
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown construction {construction!r}")
    if args.primitive:
        rel = _primitive_scale(rel)
    elapsed = time.perf_counter() - started
    _, rows = to_vector([rel])
    rank = matrix_rank(rows)
    payload = {
        "construction": construction,
        "genus": args.genus,
        "codim": args.codim,
        "weights": [str(w) for w in weights.weights],
        "subset": list(subset),
        "sigma": list(sigma),
        "relations": [rel.to_dict()],
        "generators": len(rel.terms),
        "rank": rank,
    }
    _write_payload(payload, args.out)
    log.event(command="relations gen", generators=len(rel.terms), rank=rank,
              seconds=round(elapsed, 6))
    return EXIT_OK


def _report(rows, log: Logger) -> int:
    ok_all = True
    for name, ok, detail in rows:
        ok_all = ok_all and ok
        log.event(check=name, ok=bool(ok), detail=str(detail))
    log.event(passed=sum(1 for _, ok, _ in rows if ok), total=len(rows))
    return EXIT_OK if ok_all else EXIT_FAIL


def cmd_relations_verify_chain(args, cfg: dict, log: Logger) -> int:
    codim = args.codim if args.codim is not None else args.genus - 1
    return _report(verify_chain(args.genus, codim), log)


def _load_batch(path: str) -> list:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read batch {path}: {exc}") from exc
    if isinstance(data, dict):
        data = data.get("relations", [data])
    classes = []
    for item in data:
        if "relation" in item:
            item = item["relation"]
        classes.append(TautClass.from_dict(item))
    if not classes:
        raise UsageError("batch holds no relations")
    codims = set()
    for c in classes:
        codims |= c.codims()
    if len(codims) > 1:
        raise UsageError(f"mixed-codimension batch: {sorted(codims)}")
    return classes


def cmd_rank(args, cfg: dict, log: Logger) -> int:
    classes = _load_batch(args.batch)
    _, rows = to_vector(classes)
    rank = matrix_rank(rows)
    print(dumps({"relations": len(classes), "rank": rank}))
    log.event(command="rank", relations=len(classes), rank=rank)
    return EXIT_OK


def cmd_verify(args, cfg: dict, log: Logger) -> int:
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 20260826))
    if args.suite == "series":
        quick = bool(args.quick or (args.order is not None and args.order <= 10))
        rows = identity_suite(quick=quick, seed=seed)
    elif args.suite == "chain":
        genus = args.genus if args.genus is not None else 3
        codim = args.codim if args.codim is not None else genus - 1
        rows = verify_chain(genus, codim)
    elif args.suite == "pushforward":
        rows = pushforward_oracle(d_max=args.d or 3)
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown suite {args.suite!r}")
    return _report(rows, log)


def _rename_ring(data: dict, mapping: dict) -> dict:
    for spec in data["ring"]:
        spec["var"] = mapping.get(spec["var"], spec["var"])
    return data


def cmd_series_dump(args, cfg: dict, log: Logger) -> int:
    orders = _parse_orders(args.orders)
    name = args.name
    if name == "C":
        if args.i is None:
            raise UsageError("series C needs --i")
        name = f"C{args.i}"
    payload = {"name": args.name, "orders": orders}
    if name in ("DeltaE", "Edge3", "Edge4"):
        t_order = orders.get("t")
        if t_order is None:
            raise UsageError(f"series {name} needs a t order")
        table = []
        for z1 in (1, -1):
            for z2 in (1, -1):
                if name == "DeltaE":
                    series = delta_edge(z1, z2, t_order)
                else:
                    series = edge_series_xy(
                        z1, z2, t_order, orders.get("x", 0),
                        kind=3 if name == "Edge3" else 4,
                    )
                entry = _rename_ring(series_to_dict(series),
                                     {"p1": "psi1", "p2": "psi2"})
                entry["zeta"] = [z1, z2]
                table.append(entry)
        payload["table"] = table
    else:
        cache_dir = args.cache_dir or cfg.get("cache_dir")
        catalog = SeriesCatalog(cache_dir=cache_dir)
        try:
            series = catalog.get(name, **orders)
        except KeyError as exc:
            raise UsageError(str(exc)) from exc
        payload.update(series_to_dict(series))
    _write_payload(payload, args.out)
    log.event(command="series dump", name=args.name)
    return EXIT_OK


def cmd_graphs_list(args, cfg: dict, log: Logger) -> int:
    weights = WeightData(_parse_fractions(args.weights))
    graphs = enumerate_graphs(args.genus, weights, args.max_edges)
    payload = {"genus": args.genus,
               "weights": [str(w) for w in weights.weights],
               "graphs": [g.to_dict() for g in graphs]}
    _write_payload(payload, args.out)
    log.event(command="graphs list", count=len(graphs))
    return EXIT_OK


def _read_class(path: str) -> TautClass:
    try:
        return TautClass.from_dict(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read class file {path}: {exc}") from exc


def cmd_classes_normal_form(args, cfg: dict, log: Logger) -> int:
    c = _read_class(args.infile)
    _write_payload(c.to_dict(), args.out)
    log.event(command="classes normal-form", terms=len(c.terms))
    return EXIT_OK


def cmd_classes_pushforward(args, cfg: dict, log: Logger) -> int:
    c = _read_class(args.infile)
    if args.forget_weight1 is not None:
        c = pushforward_forget_weight1(c, args.forget_weight1)
    else:
        c = pushforward_forget_small(c, args.forget)
    _write_payload(c.to_dict(), args.out)
    log.event(command="classes pushforward", terms=len(c.terms))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tautrels",
        description="Construct and verify tautological relations on "
                    "weighted moduli of curves.",
    )
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--threads", type=int, help="worker threads")
    parser.add_argument("--seed", type=int, help="seed for randomized checks")
    parser.add_argument("--log", choices=("text", "json"), default=None)
    parser.add_argument("--cache-dir", help="series cache directory "
                        "(default: TAUTRELS_CACHE)")
    sub = parser.add_subparsers(dest="command", required=True)

    relations = sub.add_parser("relations", help="relation generation")
    rel_sub = relations.add_subparsers(dest="subcommand", required=True)
    gen = rel_sub.add_parser("gen", help="generate one relation")
    gen.add_argument("--genus", type=int, required=True)
    gen.add_argument("--weights", default="", help="comma-separated rationals")
    gen.add_argument("--codim", type=int, required=True)
    gen.add_argument("--subset", default="", help="markings, e.g. 1,3")
    gen.add_argument("--sigma", default="", help="partition, e.g. 1,1,4")
    gen.add_argument("--construction", choices=CONSTRUCTIONS, default="fz")
    gen.add_argument("--d", type=int, default=0, help="x-degree for the "
                     "stable-quotient constructions")
    gen.add_argument("--a", default="", help="marking exponents for the "
                     "stable-quotient constructions")
    gen.add_argument("--half-sign", type=int, choices=(1, -1), default=None)
    gen.add_argument("--pd-sign", type=int, choices=(1, -1), default=None)
    gen.add_argument("--primitive", action="store_true",
                     help="rescale to a primitive integer form")
    gen.add_argument("--out", help="output file (default stdout)")
    gen.set_defaults(func=cmd_relations_gen)
    vchain = rel_sub.add_parser("verify-chain", help="chain-closure report")
    vchain.add_argument("--genus", type=int, required=True)
    vchain.add_argument("--codim", type=int, default=None)
    vchain.set_defaults(func=cmd_relations_verify_chain)
    rrank = rel_sub.add_parser("rank", help="rank of a relation batch")
    rrank.add_argument("--batch", required=True)
    rrank.set_defaults(func=cmd_rank)

    verify = sub.add_parser("verify", help="verification suites")
    verify.add_argument("--suite", choices=("series", "chain", "pushforward"),
                        required=True)
    verify.add_argument("--order", type=int, default=None)
    verify.add_argument("--genus", type=int, default=None)
    verify.add_argument("--codim", type=int, default=None)
    verify.add_argument("--d", type=int, default=None)
    verify.add_argument("--quick", action="store_true")
    verify.set_defaults(func=cmd_verify)

    series = sub.add_parser("series", help="series dumps")
    ser_sub = series.add_subparsers(dest="subcommand", required=True)
    dump = ser_sub.add_parser("dump", help="dump a named series as JSON")
    dump.add_argument("--name", required=True)
    dump.add_argument("--orders", required=True, help="e.g. t=10,x=3")
    dump.add_argument("--i", type=int, default=None, help="index for C_i")
    dump.add_argument("--out", help="output file (default stdout)")
    dump.set_defaults(func=cmd_series_dump)

    rank = sub.add_parser("rank", help="rank of a relation batch")
    rank.add_argument("--batch", required=True)
    rank.set_defaults(func=cmd_rank)

    graphs = sub.add_parser("graphs", help="stable graph enumeration")
    gr_sub = graphs.add_subparsers(dest="subcommand", required=True)
    glist = gr_sub.add_parser("list")
    glist.add_argument("--genus", type=int, required=True)
    glist.add_argument("--weights", default="")
    glist.add_argument("--max-edges", type=int, required=True)
    glist.add_argument("--out")
    glist.set_defaults(func=cmd_graphs_list)

    classes = sub.add_parser("classes", help="decorated class utilities")
    cl_sub = classes.add_subparsers(dest="subcommand", required=True)
    nform = cl_sub.add_parser("normal-form")
    nform.add_argument("--in", dest="infile", required=True)
    nform.add_argument("--out")
    nform.set_defaults(func=cmd_classes_normal_form)
    push = cl_sub.add_parser("pushforward")
    push.add_argument("--in", dest="infile", required=True)
    push.add_argument("--forget", type=int, default=1,
                      help="number of trailing light points to forget")
    push.add_argument("--forget-weight1", type=int, default=None,
                      help="forget this weight-one marking instead")
    push.add_argument("--out")
    push.set_defaults(func=cmd_classes_pushforward)
    crank = cl_sub.add_parser("rank")
    crank.add_argument("--batch", required=True)
    crank.set_defaults(func=cmd_rank)

    return parser


def main(argv: list | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        log = Logger(args.log or cfg.get("log", "text"))
        if args.cache_dir:
            os.environ["TAUTRELS_CACHE"] = args.cache_dir
        elif cfg.get("cache_dir"):
            os.environ.setdefault("TAUTRELS_CACHE", cfg["cache_dir"])
        if getattr(args, "half_sign", None) is None and hasattr(args, "half_sign"):
            args.half_sign = -1 if args.construction == "open-sq" else 1
        if getattr(args, "pd_sign", None) is None and hasattr(args, "pd_sign"):
            args.pd_sign = -1 if args.construction == "open-sq" else 1
        return args.func(args, cfg, log)
    except PreconditionError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_PRECONDITION
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_PRECONDITION
    except (NotImplementedError, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
