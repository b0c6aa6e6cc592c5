"""Command-line entry point.

Exit codes: 0 success, 1 infeasible, 2 usage or input error. Payloads go to
standard output as JSON (CSV for ``bench``); diagnostics go to standard
error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional, Sequence

from . import bench
from .core import (
    Assignment,
    InfeasibleError,
    ProblemInstance,
    StructuralError,
    format_load,
    max_load,
    to_load,
    validate,
)
from .exact import CommonCaseParams, balance_common, min_machines_common, optimal_max_load_common
from .heuristics import AppOrder, FitRule, MultiStrategy, pack_multi, pack_single
from .oracle import DEFAULT_MAX_APPS, DEFAULT_MAX_MACHINES, OracleTooLarge, oracle_balance, oracle_pack

log = logging.getLogger("semiflex")

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _read_json(path: str):
    try:
        if path == "-":
            return json.load(sys.stdin)
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise UsageError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from exc


def _load_instance(path: str) -> ProblemInstance:
    return ProblemInstance.from_json(_read_json(path))


def _emit(payload, out: Optional[str] = None) -> None:
    text = json.dumps(payload, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_pack(args) -> int:
    instance = _load_instance(args.instance)
    rule = FitRule(args.rule)
    if args.model == "single":
        result = pack_single(instance, rule, AppOrder(args.order, args.seed))
    else:
        result = pack_multi(instance, MultiStrategy(args.strategy), rule, scan=args.scan)
    for m, ok in result.probes:
        log.debug("probe m=%d feasible=%s", m, ok)
    _emit(result.to_json(), args.output)
    return EXIT_OK


def cmd_validate(args) -> int:
    instance = _load_instance(args.instance)
    data = _read_json(args.assignment)
    machine_count = None
    if isinstance(data, dict):
        machine_count = data.get("machine_count")
        data = data.get("assignment")
        if data is None:
            raise UsageError("assignment document has no 'assignment' list")
    try:
        a = Assignment.from_json(data, machine_count, normalize=False)
    except (KeyError, TypeError) as exc:
        raise StructuralError(f"malformed assignment: {exc}") from exc
    report = validate(instance, a, enforce_cpu_cap=args.cpu_cap and instance.config.P is not None)
    payload = report.to_json()
    payload["max_load"] = format_load(max_load(a))
    _emit(payload)
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE


def cmd_exact(args) -> int:
    P = None if args.P is None else to_load(args.P)
    if args.m is None and P is None:
        raise UsageError("exact needs --m (balancing) or --P (packing)")
    if args.m is not None:
        m = args.m
        objective = "balance"
    else:
        m = min_machines_common(args.n, to_load(args.p), args.q, P, args.Q)
        objective = "pack"
    params = CommonCaseParams(args.n, m, to_load(args.p), args.q, args.Q, P)
    value = optimal_max_load_common(params)
    _emit({
        "objective": objective,
        "machines": m,
        "max_load": format_load(value),
        "assignment": balance_common(params).to_json(),
    })
    return EXIT_OK


def cmd_oracle(args) -> int:
    instance = _load_instance(args.instance)
    caps = dict(max_apps=args.max_apps, max_machines=args.max_machines, single=args.single)
    if args.objective == "balance":
        m = args.m if args.m is not None else instance.fixed_m
        if m is None:
            raise UsageError("balancing needs --m or fixed_m in the instance")
        solution = oracle_balance(instance, m, **caps)
    else:
        solution = oracle_pack(instance, **caps)
    a = solution.assignment(instance)
    _emit({
        "objective": args.objective,
        "m": solution.m,
        "max_load": format_load(solution.value),
        "assignment": a.to_json(),
    })
    return EXIT_OK


def cmd_ingest(args) -> int:
    try:
        with open(args.csv, newline="") as fh:
            records = bench.read_vm_csv(fh)
    except FileNotFoundError as exc:
        raise UsageError(f"no such file: {args.csv}") from exc
    apps = bench.ingest(records, min_load=to_load(args.min_load), max_load=to_load(args.max_load))
    pool = bench.Pool(apps, {"source": args.csv, "records": len(records)})
    _emit(pool.to_json(), args.output)
    return EXIT_OK


def cmd_synth(args) -> int:
    _emit(bench.synth_pool(args.size, args.seed).to_json(), args.output)
    return EXIT_OK


def cmd_bench(args) -> int:
    spec = bench.ExperimentSpec.from_json(_read_json(args.spec))
    if args.pool:
        pool = bench.Pool.from_json(_read_json(args.pool))
    else:
        pool = bench.synth_pool(args.synth_size, spec.seed)
    rows = bench.run_experiment(spec, pool.apps, workers=args.workers)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            bench.write_csv(rows, fh)
    else:
        bench.write_csv(rows, sys.stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semiflex", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pack", aliases=["solve"], help="minimise machines with a list heuristic")
    p.add_argument("instance", help="instance JSON file, or - for stdin")
    p.add_argument("--model", choices=["single", "multi"], default="multi")
    p.add_argument("--rule", choices=[r.value for r in FitRule], default="ff")
    p.add_argument("--order", choices=list(AppOrder.KINDS), default="mem-dec",
                   help="application order (single model)")
    p.add_argument("--strategy", choices=[s.value for s in MultiStrategy], default="mem",
                   help="multi-instanced strategy")
    p.add_argument("--seed", type=int, default=0, help="seed for --order random")
    p.add_argument("--scan", action="store_true", help="linear scan over machine counts instead of binary search")
    p.add_argument("-o", "--output", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("validate", help="check an assignment against an instance")
    p.add_argument("instance")
    p.add_argument("assignment", help="assignment JSON list, or a pack result document")
    p.add_argument("--no-cpu-cap", dest="cpu_cap", action="store_false", help="do not enforce P")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("exact", help="exact solver for common requirements")
    p.add_argument("--n", type=int, required=True, help="number of applications")
    p.add_argument("--p", required=True, help="common CPU load")
    p.add_argument("--q", type=int, required=True, help="common memory demand")
    p.add_argument("--Q", type=int, required=True, help="machine memory")
    p.add_argument("--m", type=int, help="machine count (balancing)")
    p.add_argument("--P", help="machine CPU cap (packing)")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("oracle", help="brute-force optimum for small instances")
    p.add_argument("instance")
    p.add_argument("--objective", choices=["balance", "pack"], default="pack")
    p.add_argument("--m", type=int, help="machine count (balance)")
    p.add_argument("--single", action="store_true", help="restrict to one instance per application")
    p.add_argument("--max-apps", type=int, default=DEFAULT_MAX_APPS)
    p.add_argument("--max-machines", type=int, default=DEFAULT_MAX_MACHINES)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("ingest", help="VM trace CSV to application pool JSON")
    p.add_argument("csv", help="columns: deployment_id, core_bucket, mem_bucket_gb, avg_cpu_fraction")
    p.add_argument("--min-load", default="1")
    p.add_argument("--max-load", default="32")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="synthetic application pool JSON")
    p.add_argument("--size", type=int, default=16464)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="run the heuristic comparison and write CSV")
    p.add_argument("spec", help="experiment spec JSON")
    p.add_argument("--pool", help="pool JSON from ingest/synth; synthesised when omitted")
    p.add_argument("--synth-size", type=int, default=16464)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (UsageError, StructuralError, OracleTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
