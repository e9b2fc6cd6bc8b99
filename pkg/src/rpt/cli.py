"""Command-line driver: gen, analyze, run, verify, sweep.

Exit codes: 0 success, 1 property failure or execution error, 2 usage error.
The RPT_SEED environment variable overrides the master seed everywhere.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import executor, generators, harness, planner, querydoc
from .executor import PruneFlags, SemiJoinMode
from .joingraph import classify_acyclicity, derive_schedule, largest_root
from .relstore import visible_count


def _master_seed(args_seed: int | None) -> int:
    env = os.environ.get("RPT_SEED")
    if env is not None:
        return int(env)
    return 0 if args_seed is None else args_seed


def _parse_params(pairs: list[str]) -> dict:
    params = {}
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"expected key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        try:
            params[key] = int(raw)
        except ValueError:
            params[key] = float(raw)
    return params


def cmd_gen(args) -> int:
    try:
        spec = generators.SyntheticSpec(
            args.generator, _parse_params(args.params), seed=_master_seed(args.seed)
        )
        path = generators.gen_instance(spec, args.out)
    except (ValueError, OSError) as err:
        print(f"gen: {err}", file=sys.stderr)
        return 2
    print(path)
    return 0


def cmd_analyze(args) -> int:
    query = querydoc.load_query(args.query)
    g = query.join_graph()
    try:
        instance = querydoc.load_instance(query, Path(args.query).parent)
        filtered = querydoc.apply_base_filters(instance, query)
        cards = {name: visible_count(rel) for name, rel in filtered.items()}
    except (ValueError, OSError):
        cards = None  # no data files: analyze structure only, ties by name
    tree = largest_root(g, cards)
    schedule = derive_schedule(tree, g)
    report = {
        "query": query.name,
        "acyclicity": classify_acyclicity(g).value,
        "join_tree": {"root": tree.root, "edges": [list(e) for e in tree.edges]},
        "cardinalities": cards,
        "schedule": {
            "forward": [s.describe() for s in schedule.forward],
            "backward": [s.describe() for s in schedule.backward],
        },
    }
    json.dump(report, sys.stdout, indent=2)
    print()
    return 0


def _prune_flags(raw: str | None) -> PruneFlags:
    if not raw:
        return PruneFlags()
    flags = {f.strip() for f in raw.split(",") if f.strip()}
    known = {"skip-trivial", "skip-backward"}
    unknown = flags - known
    if unknown:
        raise ValueError(f"unknown prune flags {sorted(unknown)}; known: {sorted(known)}")
    return PruneFlags(
        skip_trivial="skip-trivial" in flags,
        skip_backward_aligned="skip-backward" in flags,
    )


def cmd_run(args) -> int:
    query = querydoc.load_query(args.query)
    instance = querydoc.load_instance(query, Path(args.query).parent)
    with Path(args.plan).open("r", encoding="utf-8") as fh:
        doc = json.load(fh)
    plan = planner.JoinPlan.from_json(doc)
    # the plan document may carry mode/prune; command-line flags override
    mode_name = args.mode or doc.get("mode", "exact")
    if mode_name not in ("exact", "bloom"):
        raise ValueError(f"unknown mode {mode_name!r} in plan document")
    mode = SemiJoinMode.EXACT if mode_name == "exact" else SemiJoinMode.BLOOM
    doc_prune = doc.get("prune", ())
    raw_prune = args.prune if args.prune is not None else ",".join(doc_prune)
    prune = _prune_flags(raw_prune)  # bad flags are a usage error
    try:
        result, stats = executor.execute(
            query,
            instance,
            plan,
            mode=mode,
            prune=prune,
            target_fpr=args.fpr,
            seed=_master_seed(args.seed),
            record_wall_time=True,
        )
    except ValueError as err:
        print(f"run: {err}", file=sys.stderr)
        return 1
    report = {"output_rows": visible_count(result), "plan": plan.describe(), **stats.to_json()}
    json.dump(report, sys.stdout, indent=2)
    print()
    return 0


def cmd_verify(args) -> int:
    query = querydoc.load_query(args.query)
    instance = querydoc.load_instance(query, Path(args.query).parent)
    try:
        report = harness.verify(query, instance, budget=args.budget)
    except harness.HarnessError as err:
        print(f"verify: {err}", file=sys.stderr)
        return 1
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        line = f"{status} {check.name}"
        if check.detail:
            line += f" ({check.detail})"
        print(line)
    print(f"classification: {report.classification}")
    return 0 if report.passed else 1


def cmd_sweep(args) -> int:
    query = querydoc.load_query(args.query)
    instance = querydoc.load_instance(query, Path(args.query).parent)
    budget = args.plans if args.plans == "formula" else int(args.plans)
    try:
        report = harness.robustness_sweep(
            query,
            instance,
            variants=tuple(args.variants.split(",")),
            shapes=tuple(args.shape.split(",")),
            budget=budget,
            master_seed=_master_seed(args.seed),
            record_wall_time=args.wall_clock,
            target_fpr=args.fpr,
        )
    except harness.HarnessError as err:
        print(f"sweep: {err}", file=sys.stderr)
        return 2
    harness.emit_report(report, args.format, args.out)
    for s in report.summary:
        print(f"{s.variant:10s} {s.shape:10s} rf={s.rf:.4g} min={s.metric_min} max={s.metric_max}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rpt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic instance")
    p.add_argument("generator", choices=generators.generator_names())
    p.add_argument("params", nargs="*", help="generator parameters as key=value")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("analyze", help="report acyclicity, join tree, and schedule")
    p.add_argument("query")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("run", help="execute one plan")
    p.add_argument("query")
    p.add_argument("plan")
    p.add_argument("--mode", choices=("exact", "bloom"), default=None)
    p.add_argument("--prune", default=None, help="comma list: skip-trivial,skip-backward")
    p.add_argument("--fpr", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("verify", help="run the oracle property battery")
    p.add_argument("query")
    p.add_argument("--budget", type=int, default=harness.DEFAULT_ORACLE_BUDGET)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("sweep", help="robustness sweep over random plans")
    p.add_argument("query")
    p.add_argument("--variants", default=",".join(harness.VARIANTS))
    p.add_argument("--shape", default="left_deep", help="comma list: left_deep,bushy")
    p.add_argument("--plans", default="formula", help="plan count or 'formula'")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", required=True)
    p.add_argument("--wall-clock", action="store_true")
    p.add_argument("--fpr", type=float, default=0.02)
    p.set_defaults(fn=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ValueError as err:
        print(f"rpt: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"rpt: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
