"""Verification battery, robustness sweeps, and report emission.

The robustness metric is the total intermediate tuple count: deterministic,
machine-independent, and the quantity the safety analysis actually bounds.
For the transfer variants the reduced base tables count toward the metric,
since the baseline never pays for materializing them.  Wall-clock time is
recorded only on request (it breaks byte-level report reproducibility).
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import executor, oracle, planner
from .executor import ExecStats, MetricBudgetExceeded, PruneFlags, SemiJoinMode
from .joingraph import (
    AcyclicityClass,
    classify_acyclicity,
    derive_schedule,
    largest_root,
    safe_subjoin,
)
from .planner import JoinPlan, plan_budget
from .querydoc import QuerySpec, apply_base_filters
from .relstore import Relation, visible_count

VARIANTS = ("baseline", "rpt-exact", "rpt-bloom")
SHAPES = ("left_deep", "bushy")
DEFAULT_TIMEOUT_FACTOR = 1000
DEFAULT_ORACLE_BUDGET = 100_000


class HarnessError(ValueError):
    pass


# ---------------------------------------------------------------------------
# verification battery


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class VerifyReport:
    query: str
    classification: str
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        return {
            "query": self.query,
            "classification": self.classification,
            "passed": self.passed,
            "checks": [vars(c) for c in self.checks],
        }


def _canonical_plans(query: QuerySpec) -> list[JoinPlan]:
    g = query.join_graph()
    if len(g.vertices) <= planner.MAX_ENUMERABLE:
        return planner.enumerate_left_deep(g)
    tree = largest_root(g)
    order = [tree.root]
    for child, _parent in tree.edges:
        order.append(child)
    return [JoinPlan("left_deep", order=tuple(order))]


def _plan_prefixes(plan: JoinPlan) -> list[tuple[str, ...]]:
    assert plan.kind == "left_deep"
    return [tuple(plan.order[:i]) for i in range(2, len(plan.order))]


def verify(
    query: QuerySpec,
    instance: dict[str, Relation],
    budget: int = DEFAULT_ORACLE_BUDGET,
) -> VerifyReport:
    """Oracle battery: output equality, full reduction, Bloom superset, safety bounds."""
    total = sum(rel.num_rows for rel in instance.values())
    if total > budget:
        raise HarnessError(f"instance has {total} tuples, over the oracle budget {budget}")

    filtered = apply_base_filters(instance, query)
    g = query.join_graph()
    classification = classify_acyclicity(g)
    checks: list[CheckResult] = []
    ref = oracle.nested_loop_join(filtered)
    plans = _canonical_plans(query)

    # output equality, exact mode, over every canonical plan
    bad = 0
    for plan in plans:
        result, _ = executor.execute(query, instance, plan, mode=SemiJoinMode.EXACT)
        if not oracle.same_multiset(ref.attrs, ref.values, result.attrs, oracle.relation_values(result)):
            bad += 1
    checks.append(
        CheckResult("output-equality-exact", bad == 0, f"{len(plans) - bad}/{len(plans)} plans match")
    )

    result, _ = executor.execute(query, instance, plans[0], mode=SemiJoinMode.BLOOM)
    checks.append(
        CheckResult(
            "output-equality-bloom",
            oracle.same_multiset(ref.attrs, ref.values, result.attrs, oracle.relation_values(result)),
        )
    )

    cards = {name: visible_count(rel) for name, rel in filtered.items()}
    tree = largest_root(g, cards)
    schedule = derive_schedule(tree, g)
    reduced_exact, _ = executor.transfer_phase(filtered, schedule, SemiJoinMode.EXACT)
    reduced_bloom, _ = executor.transfer_phase(filtered, schedule, SemiJoinMode.BLOOM)

    if classification is AcyclicityClass.CYCLIC:
        checks.append(
            CheckResult("full-reduction-exact", True, "skipped: query is cyclic, no guarantee")
        )
    else:
        mismatched = [
            name
            for name in filtered
            if not np.array_equal(
                reduced_exact[name].visible_indices(), ref.contributing_rows(name)
            )
        ]
        checks.append(
            CheckResult(
                "full-reduction-exact",
                not mismatched,
                "survivors equal oracle-contributing rows"
                if not mismatched
                else f"extra or missing survivors in {mismatched}",
            )
        )

    superset_ok = all(
        np.isin(reduced_exact[name].visible_indices(), reduced_bloom[name].visible_indices()).all()
        for name in filtered
    )
    checks.append(CheckResult("bloom-superset", superset_ok))

    if classification is AcyclicityClass.CYCLIC:
        checks.append(CheckResult("safety-bound", True, "skipped: query is cyclic"))
    else:
        checks.append(_safety_check(query, g, reduced_exact, classification, cards))

    return VerifyReport(query.name, classification.value, tuple(checks))


def _safety_check(query, g, reduced, classification, cards) -> CheckResult:
    """Intermediate-size bounds over all enumerable plans on the reduced instance.

    Gamma-acyclic: every Cartesian-free plan must respect the bounds.
    Alpha-acyclic only: plans whose prefixes are all safe subjoins must
    respect them; violators must contain an unsafe prefix.
    """
    try:
        plans = planner.enumerate_left_deep(g)
    except planner.PlannerError:
        return CheckResult("safety-bound", True, "skipped: too many relations to enumerate")
    out, _ = executor.join_phase(reduced, plans[0])
    out_size = out.num_rows
    m = len(g.vertices)
    violations = []
    for plan in plans:
        _, stats = executor.join_phase(reduced, plan)
        sizes = stats.join_output_sizes
        if any(s > out_size for s in sizes) or sum(sizes) > (m - 1) * out_size:
            violations.append(plan)
    if classification is AcyclicityClass.GAMMA_ACYCLIC:
        return CheckResult(
            "safety-bound",
            not violations,
            f"all {len(plans)} plans within bounds"
            if not violations
            else f"{len(violations)} plans exceed the output bound",
        )
    # alpha-acyclic but not gamma: violations must be explained by an unsafe prefix
    unexplained = [
        plan
        for plan in violations
        if all(safe_subjoin(g, prefix, cards) for prefix in _plan_prefixes(plan))
    ]
    return CheckResult(
        "safety-bound-unsafe-prefixes",
        not unexplained,
        f"{len(violations)}/{len(plans)} plans exceed bounds, all flagged unsafe"
        if not unexplained
        else f"{len(unexplained)} safe-prefix plans exceed the bound",
    )


# ---------------------------------------------------------------------------
# robustness sweep


@dataclass(frozen=True)
class PlanRun:
    variant: str
    shape: str
    plan_id: str
    seed: int
    metric: int
    is_timeout: bool
    wall_time: float | None = None


@dataclass(frozen=True)
class RfSummary:
    variant: str
    shape: str
    rf: float
    metric_min: int
    metric_max: int
    n_plans: int


@dataclass(frozen=True)
class RobustnessReport:
    query: str
    master_seed: int
    metric: str
    rows: tuple[PlanRun, ...]
    summary: tuple[RfSummary, ...]

    def to_json(self) -> dict:
        return {
            "query": self.query,
            "master_seed": self.master_seed,
            "metric": self.metric,
            "rows": [vars(r) for r in self.rows],
            "rf_summary": [vars(s) for s in self.summary],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "RobustnessReport":
        rows = tuple(PlanRun(**r) for r in doc["rows"])
        summary = tuple(RfSummary(**s) for s in doc["rf_summary"])
        return cls(doc["query"], doc["master_seed"], doc["metric"], rows, summary)


def robustness_factor(metrics: list[int]) -> float:
    if not metrics:
        return 1.0
    lo, hi = min(metrics), max(metrics)
    if lo == hi:
        return 1.0
    if lo == 0:
        return math.inf
    return hi / lo


def _generate_plans(g, shape: str, n_plans: int, master_seed: int) -> list[JoinPlan]:
    shape_idx = SHAPES.index(shape)
    plans = []
    for i in range(n_plans):
        seed = planner.derive_seed(master_seed, shape_idx, i)
        rng = planner.rng_from_seed(seed)
        if shape == "left_deep":
            plans.append(planner.random_left_deep(g, rng, seed=seed))
        else:
            plans.append(planner.random_bushy(g, rng, seed=seed))
    return plans


def robustness_sweep(
    query: QuerySpec,
    instance: dict[str, Relation],
    variants=VARIANTS,
    shapes=("left_deep",),
    budget: int | str = "formula",
    master_seed: int = 0,
    timeout_factor: int = DEFAULT_TIMEOUT_FACTOR,
    record_wall_time: bool = False,
    target_fpr: float = 0.02,
) -> RobustnessReport:
    """Execute the same random plans under each engine variant and compare metrics.

    The baseline variant joins the filtered base tables directly; the
    transfer variants run the semi-join passes once (the reduced instance
    is plan-independent) and are charged the reduced base-table sizes.
    """
    for v in variants:
        if v not in VARIANTS:
            raise HarnessError(f"unknown variant {v!r}; expected one of {VARIANTS}")
    for s in shapes:
        if s not in SHAPES:
            raise HarnessError(f"unknown shape {s!r}; expected one of {SHAPES}")
    filtered = apply_base_filters(instance, query)
    g = query.join_graph()
    m = len(g.vertices) - 1
    n_plans = plan_budget(m) if budget == "formula" else int(budget)

    prepared: dict[str, tuple[dict[str, Relation], int]] = {}
    for variant in variants:
        if variant == "baseline":
            prepared[variant] = (filtered, 0)
        else:
            mode = SemiJoinMode.EXACT if variant == "rpt-exact" else SemiJoinMode.BLOOM
            cards = {name: visible_count(rel) for name, rel in filtered.items()}
            tree = largest_root(g, cards)
            schedule = derive_schedule(tree, g)
            reduced, tstats = executor.transfer_phase(
                filtered, schedule, mode=mode, query=query, target_fpr=target_fpr,
                seed=planner.derive_seed(master_seed, 0xB100),
            )
            prepared[variant] = (reduced, sum(tstats.transfer_survivors.values()))

    rows: list[PlanRun] = []
    summary: list[RfSummary] = []
    for shape in shapes:
        plans = _generate_plans(g, shape, n_plans, master_seed)
        for variant in variants:
            relations, base_metric = prepared[variant]
            best: int | None = None
            metrics: list[int] = []
            for i, plan in enumerate(plans):
                join_budget = None
                if best is not None:
                    join_budget = max(timeout_factor * max(best, 1) - base_metric, 0)
                t0 = time.perf_counter() if record_wall_time else None
                stats = ExecStats()
                timed_out = False
                try:
                    executor.join_phase(relations, plan, metric_budget=join_budget, stats=stats)
                except MetricBudgetExceeded:
                    timed_out = True
                metric = base_metric + stats.total_intermediate
                wall = (time.perf_counter() - t0) if record_wall_time else None
                rows.append(
                    PlanRun(variant, shape, f"{shape}-{i:04d}", plan.seed or 0, metric, timed_out, wall)
                )
                metrics.append(metric)
                if not timed_out:
                    best = metric if best is None else min(best, metric)
            summary.append(
                RfSummary(
                    variant,
                    shape,
                    robustness_factor(metrics),
                    min(metrics, default=0),
                    max(metrics, default=0),
                    len(metrics),
                )
            )
    return RobustnessReport(query.name, master_seed, "total_intermediate", tuple(rows), tuple(summary))


# ---------------------------------------------------------------------------
# report emission


def emit_report(report: RobustnessReport, fmt: str, path) -> Path:
    path = Path(path)
    if fmt == "csv":
        with_wall = any(r.wall_time is not None for r in report.rows)
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            header = ["variant", "shape", "plan_id", "seed", "metric", "is_timeout"]
            if with_wall:
                header.append("wall_time")
            writer.writerow(header)
            for r in report.rows:
                row = [r.variant, r.shape, r.plan_id, r.seed, r.metric, str(r.is_timeout).lower()]
                if with_wall:
                    row.append("" if r.wall_time is None else f"{r.wall_time:.6f}")
                writer.writerow(row)
    elif fmt == "json":
        with path.open("w", encoding="utf-8") as fh:
            json.dump(report.to_json(), fh, indent=2)
            fh.write("\n")
    else:
        raise HarnessError(f"unknown report format {fmt!r}")
    return path


def load_report(path) -> RobustnessReport:
    with Path(path).open("r", encoding="utf-8") as fh:
        return RobustnessReport.from_json(json.load(fh))
