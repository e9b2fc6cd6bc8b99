#!/usr/bin/env python3
"""Desk-scale robustness experiments.

Generates the standard workloads, sweeps random left-deep and bushy plans
under each engine variant, and prints a robustness-factor table.  Reports
land in --out (CSV per query plus a JSON summary).

    python scripts/run_robustness_experiments.py --out results/ --seed 2025
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

from rpt.executor import SemiJoinMode, execute
from rpt.generators import SyntheticSpec, build_instance
from rpt.harness import emit_report, robustness_factor, robustness_sweep
from rpt.joingraph import AcyclicityClass, classify_acyclicity, safe_subjoin
from rpt.planner import enumerate_left_deep
from rpt.querydoc import apply_base_filters
from rpt.relstore import visible_count

WORKLOADS = [
    SyntheticSpec("chain", {"k": 6, "n": 10_000}),
    SyntheticSpec("star", {"k": 5, "n": 10_000, "sel": 0.01}, seed=8),
    SyntheticSpec("blowup3", {"n": 1_000}),
    SyntheticSpec("unsafe3", {"n": 100}),
]


def supervised_rf(query, instance) -> tuple[float, int, int]:
    """Transfer-variant RF over only the join orders whose prefixes are all safe.

    For queries that are acyclic but not fully safe under every order, the
    safe-subjoin check is how an optimizer would be supervised; the RF over
    the admitted plans shows what that supervision buys.
    """
    g = query.join_graph()
    filtered = apply_base_filters(instance, query)
    cards = {name: visible_count(rel) for name, rel in filtered.items()}
    plans = enumerate_left_deep(g)
    admitted = [
        plan
        for plan in plans
        if all(
            safe_subjoin(g, plan.order[:i], cards) for i in range(2, len(plan.order))
        )
    ]
    metrics = []
    for plan in admitted:
        _, stats = execute(query, instance, plan, mode=SemiJoinMode.EXACT)
        metrics.append(stats.total_intermediate + sum(stats.transfer_survivors.values()))
    return robustness_factor(metrics), len(admitted), len(plans)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results")
    parser.add_argument("--seed", type=int, default=2025)
    parser.add_argument("--plans", default="formula", help="plan count per shape, or 'formula'")
    parser.add_argument("--shapes", default="left_deep,bushy")
    args = parser.parse_args()
    master_seed = int(os.environ.get("RPT_SEED", args.seed))
    budget = args.plans if args.plans == "formula" else int(args.plans)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    summary = []
    print(f"{'query':16s} {'variant':10s} {'shape':10s} {'plans':>5s} {'RF':>10s} {'min':>10s} {'max':>10s}")
    for spec in WORKLOADS:
        query, instance = build_instance(spec)
        t0 = time.time()
        report = robustness_sweep(
            query,
            instance,
            shapes=tuple(args.shapes.split(",")),
            budget=budget,
            master_seed=master_seed,
        )
        emit_report(report, "csv", out_dir / f"{query.name}.csv")
        for s in report.summary:
            print(
                f"{query.name:16s} {s.variant:10s} {s.shape:10s} {s.n_plans:5d} "
                f"{s.rf:10.4f} {s.metric_min:10d} {s.metric_max:10d}"
            )
            summary.append({"query": query.name, **vars(s)})
        g = query.join_graph()
        if (
            classify_acyclicity(g) is AcyclicityClass.ALPHA_ACYCLIC_ONLY
            and len(g.vertices) <= 7
        ):
            rf, kept, total_plans = supervised_rf(query, instance)
            print(
                f"{query.name:16s} {'rpt-exact':10s} {'safe-only':10s} {kept:5d} "
                f"{rf:10.4f}   ({kept}/{total_plans} orders admitted by the safety check)"
            )
            summary.append(
                {"query": query.name, "variant": "rpt-exact", "shape": "safe-only",
                 "rf": rf, "n_plans": kept}
            )
        print(f"{'':16s} ... {time.time() - t0:.1f}s")

    with (out_dir / "summary.json").open("w", encoding="utf-8") as fh:
        json.dump({"master_seed": master_seed, "rf": summary}, fh, indent=2)
        fh.write("\n")
    print(f"\nreports written to {out_dir}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
