"""Transfer-phase and join-phase execution with per-step statistics.

The transfer phase walks a schedule's forward and backward semi-join steps,
narrowing each target relation's selection vector either exactly (hash set
of the source's visible keys) or approximately (blocked Bloom filter built
on the source, probed by the target).  The join phase then runs binary
hash joins over an explicit plan, materializing every intermediate so its
cardinality is observable.
"""

from __future__ import annotations

import enum
import time
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from . import bloom
from .joingraph import (
    AcyclicityClass,
    TransferSchedule,
    classify_acyclicity,
    derive_schedule,
    largest_root,
)
from .planner import JoinPlan
from .querydoc import QuerySpec, apply_base_filters
from .relstore import Relation, visible_count


class ExecutionError(ValueError):
    pass


class MetricBudgetExceeded(ExecutionError):
    """Join phase crossed its intermediate-tuple budget (treated as a timeout)."""

    def __init__(self, spent: int, budget: int):
        super().__init__(f"intermediate budget exceeded: {spent} > {budget}")
        self.spent = spent
        self.budget = budget


class SemiJoinMode(enum.Enum):
    EXACT = "exact"
    BLOOM = "bloom"


@dataclass(frozen=True)
class PruneFlags:
    """Transfer-phase pruning.

    skip_trivial drops forward steps whose source is an unfiltered
    primary-key side of a key-foreign-key edge (the semi-join cannot
    eliminate anything).  skip_backward_aligned drops the whole backward
    pass; the caller must certify that the join order follows the transfer
    tree bottom-up, otherwise reduction is incomplete (the final output is
    still correct, only intermediate bounds are lost).
    """

    skip_trivial: bool = False
    skip_backward_aligned: bool = False


@dataclass(frozen=True)
class ReducedInstance(Mapping):
    """Relations after a transfer phase, tagged with what produced them.

    Behaves as a read-only mapping from relation name to Relation, so it
    drops in wherever a plain instance dict is accepted.
    """

    relations: dict[str, Relation]
    mode: "SemiJoinMode"
    schedule: TransferSchedule

    def __getitem__(self, name: str) -> Relation:
        return self.relations[name]

    def __iter__(self):
        return iter(self.relations)

    def __len__(self) -> int:
        return len(self.relations)


@dataclass
class StepStat:
    phase: str            # "forward" | "backward"
    target: str
    source: str
    survivors: int
    skipped: bool = False
    estimated_fpr: float | None = None


@dataclass
class JoinStat:
    left: str
    right: str
    output_rows: int


@dataclass
class ExecStats:
    steps: list[StepStat] = field(default_factory=list)
    joins: list[JoinStat] = field(default_factory=list)
    transfer_survivors: dict[str, int] = field(default_factory=dict)
    bloom_builds: int = 0
    bloom_probes: int = 0
    cyclic_warning: bool = False
    timed_out: bool = False
    wall_time: float | None = None

    @property
    def total_intermediate(self) -> int:
        """Sum of join output cardinalities, excluding the final result.

        A timed-out run never produced its final join, so every recorded
        join counts.
        """
        joins = self.joins if self.timed_out else self.joins[:-1]
        return sum(j.output_rows for j in joins)

    @property
    def join_output_sizes(self) -> list[int]:
        return [j.output_rows for j in self.joins]

    def to_json(self) -> dict:
        return {
            "steps": [vars(s) for s in self.steps],
            "joins": [vars(j) for j in self.joins],
            "transfer_survivors": self.transfer_survivors,
            "total_intermediate": self.total_intermediate,
            "bloom_builds": self.bloom_builds,
            "bloom_probes": self.bloom_probes,
            "cyclic_warning": self.cyclic_warning,
            "timed_out": self.timed_out,
            "wall_time": self.wall_time,
        }


def _check_attrs(rel: Relation, attrs) -> tuple[str, ...]:
    attrs = tuple(attrs)
    if not attrs:
        raise ExecutionError("semi-join needs at least one shared attribute")
    missing = [a for a in attrs if a not in rel.attrs]
    if missing:
        raise ExecutionError(f"{rel.name}: attributes {missing} not in schema")
    return attrs


def _joint_codes(left_cols, right_cols):
    """Factorize composite keys of two column lists into comparable int codes."""
    n_left = left_cols[0].size
    code = None
    for lc, rc in zip(left_cols, right_cols):
        both = np.concatenate([lc, rc])
        uniq, inv = np.unique(both, return_inverse=True)
        code = inv if code is None else code * uniq.size + inv
        if code.max(initial=0) > 2**62:
            _, code = np.unique(code, return_inverse=True)
    return code[:n_left], code[n_left:]


def semi_join_exact(target: Relation, source: Relation, attrs) -> np.ndarray:
    """Physical positions of target's visible rows whose key appears in source."""
    attrs = _check_attrs(target, attrs)
    _check_attrs(source, attrs)
    tcols = [target.column(a) for a in attrs]
    scols = [source.column(a) for a in attrs]
    tcode, scode = _joint_codes(tcols, scols)
    mask = np.isin(tcode, scode)
    return target.visible_indices()[mask]


def build_semi_join_filter(
    source: Relation, attrs, target_fpr: float = bloom.DEFAULT_FPR, seed: int = bloom.DEFAULT_SEED
) -> bloom.BlockedBloomFilter:
    attrs = _check_attrs(source, attrs)
    keys = np.stack([source.column(a) for a in attrs], axis=1)
    return bloom.bf_build(keys, target_fpr=target_fpr, hash_seed=seed)


def semi_join_bloom(target: Relation, filt: bloom.BlockedBloomFilter, attrs) -> np.ndarray:
    """Superset of the exact semi-join selection (Bloom false positives only)."""
    attrs = _check_attrs(target, attrs)
    keys = np.stack([target.column(a) for a in attrs], axis=1)
    bits = bloom.bf_probe_batch(filt, keys)
    return bloom.bits_to_selection(bits, target.visible_indices())


def transfer_phase(
    instance: Mapping[str, Relation],
    schedule: TransferSchedule,
    mode: SemiJoinMode = SemiJoinMode.EXACT,
    prune: PruneFlags = PruneFlags(),
    query: QuerySpec | None = None,
    target_fpr: float = bloom.DEFAULT_FPR,
    seed: int = bloom.DEFAULT_SEED,
) -> tuple[ReducedInstance, ExecStats]:
    """Run the forward then backward semi-join passes over `instance`.

    Base-table predicates must already be applied.  Returns the reduced
    instance (new Relation values, original untouched) and the stats.
    """
    reduced = dict(instance)
    stats = ExecStats()
    base_filtered = {r.name for r in query.relations if r.filters} if query else set()
    pk = {r.name: set(r.primary_key) for r in query.relations} if query else {}
    touched: set[str] = set()

    def run_step(step, phase: str, step_no: int) -> None:
        if step.target not in reduced or step.source not in reduced:
            raise ExecutionError(f"schedule references unknown relation in {step.describe()}")
        source = reduced[step.source]
        target = reduced[step.target]
        if (
            phase == "forward"
            and prune.skip_trivial
            and step.source not in base_filtered
            and step.source not in touched
            and pk.get(step.source) == set(step.attrs)
        ):
            stats.steps.append(
                StepStat(phase, step.target, step.source, visible_count(target), skipped=True)
            )
            return
        if mode is SemiJoinMode.EXACT:
            sel = semi_join_exact(target, source, step.attrs)
            fpr = None
        else:
            step_seed = np.asarray([(seed + step_no) & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
            filt = build_semi_join_filter(
                source, step.attrs, target_fpr, seed=int(bloom.mix64(step_seed)[0])
            )
            stats.bloom_builds += 1
            stats.bloom_probes += visible_count(target)
            sel = semi_join_bloom(target, filt, step.attrs)
            fpr = filt.estimated_fpr()
        reduced[step.target] = target.with_selection(sel)
        touched.add(step.target)
        stats.steps.append(
            StepStat(phase, step.target, step.source, int(sel.size), estimated_fpr=fpr)
        )

    step_no = 0
    for step in schedule.forward:
        run_step(step, "forward", step_no)
        step_no += 1
    if not prune.skip_backward_aligned:
        for step in schedule.backward:
            run_step(step, "backward", step_no)
            step_no += 1
    stats.transfer_survivors = {name: visible_count(rel) for name, rel in reduced.items()}
    return ReducedInstance(reduced, mode, schedule), stats


def hash_join(left: Relation, right: Relation, attrs=None) -> Relation:
    """Bag-semantics natural equi-join; `right` is the build side."""
    shared = tuple(a for a in left.attrs if a in right.attrs)
    if attrs is not None:
        attrs = tuple(attrs)
        if set(attrs) != set(shared):
            raise ExecutionError(
                f"declared join attrs {attrs} != shared attrs {shared} "
                f"of {left.name} and {right.name}"
            )
    if not shared:
        raise ExecutionError(
            f"no shared attributes between {left.name} and {right.name} (Cartesian product)"
        )
    lcode, rcode = _joint_codes(
        [left.column(a) for a in shared], [right.column(a) for a in shared]
    )
    order = np.argsort(rcode, kind="stable")
    sorted_codes = rcode[order]
    lo = np.searchsorted(sorted_codes, lcode, side="left")
    hi = np.searchsorted(sorted_codes, lcode, side="right")
    counts = hi - lo
    total = int(counts.sum())
    left_rows = np.repeat(np.arange(lcode.size), counts)
    # per output row: offset within its probe row's match run
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    right_rows = order[np.repeat(lo, counts) + (np.arange(total) - starts)]

    out_attrs = left.attrs + tuple(a for a in right.attrs if a not in left.attrs)
    columns = {}
    for a in left.attrs:
        columns[a] = left.column(a)[left_rows]
    for a in right.attrs:
        if a not in columns:
            columns[a] = right.column(a)[right_rows]
    return Relation(f"({left.name}*{right.name})", out_attrs, columns)


def join_phase(
    instance: Mapping[str, Relation],
    plan: JoinPlan,
    metric_budget: int | None = None,
    stats: ExecStats | None = None,
) -> tuple[Relation, ExecStats]:
    """Execute an explicit plan over (reduced or raw) relations.

    Every join output is materialized and counted; if the running sum of
    non-final intermediate rows crosses `metric_budget`, the plan is
    abandoned with MetricBudgetExceeded.
    """
    stats = stats if stats is not None else ExecStats()
    missing = plan.relations() - set(instance)
    if missing:
        raise ExecutionError(f"plan references unknown relations {sorted(missing)}")

    spent = 0

    def charge(rows: int, is_final: bool) -> None:
        nonlocal spent
        if not is_final:
            spent += rows
            if metric_budget is not None and spent > metric_budget:
                stats.timed_out = True
                err = MetricBudgetExceeded(spent, metric_budget)
                err.stats = stats
                raise err

    if plan.kind == "left_deep":
        order = plan.order
        current = instance[order[0]]
        for i, name in enumerate(order[1:]):
            probe_name = current.name
            current = hash_join(current, instance[name])
            stats.joins.append(JoinStat(probe_name, name, current.num_rows))
            charge(current.num_rows, is_final=(i == len(order) - 2))
        return current, stats

    def eval_node(node) -> Relation:
        if isinstance(node, str):
            return instance[node]
        probe = eval_node(node.probe)
        build = eval_node(node.build)
        out = hash_join(probe, build)
        stats.joins.append(JoinStat(probe.name, build.name, out.num_rows))
        charge(out.num_rows, is_final=(node is plan.tree))
        return out

    return eval_node(plan.tree), stats


def execute(
    query: QuerySpec,
    instance: Mapping[str, Relation],
    plan: JoinPlan,
    mode: SemiJoinMode = SemiJoinMode.EXACT,
    prune: PruneFlags = PruneFlags(),
    target_fpr: float = bloom.DEFAULT_FPR,
    seed: int = bloom.DEFAULT_SEED,
    metric_budget: int | None = None,
    record_wall_time: bool = False,
) -> tuple[Relation, ExecStats]:
    """Full pipeline: base filters, transfer schedule from the largest-root
    join tree, semi-join passes, then the join phase over `plan`."""
    t0 = time.perf_counter() if record_wall_time else None
    filtered = apply_base_filters(instance, query)
    g = query.join_graph()
    cards = {name: visible_count(rel) for name, rel in filtered.items()}
    tree = largest_root(g, cards)
    schedule = derive_schedule(tree, g)
    reduced, stats = transfer_phase(
        filtered, schedule, mode=mode, prune=prune, query=query, target_fpr=target_fpr, seed=seed
    )
    stats.cyclic_warning = classify_acyclicity(g) is AcyclicityClass.CYCLIC
    if len(query.relations) == 1:
        only = query.relations[0].name
        result = reduced[only]
    else:
        result, stats = join_phase(reduced, plan, metric_budget=metric_budget, stats=stats)
    if record_wall_time:
        stats.wall_time = time.perf_counter() - t0
    return result, stats
