"""Join-order-robust execution of acyclic joins via predicate transfer."""

from .bloom import BlockedBloomFilter, bf_build, bf_probe_batch, bits_to_selection
from .executor import (
    ExecStats,
    PruneFlags,
    ReducedInstance,
    SemiJoinMode,
    execute,
    hash_join,
    join_phase,
    semi_join_bloom,
    semi_join_exact,
    transfer_phase,
)
from .joingraph import (
    AcyclicityClass,
    JoinGraph,
    JoinTree,
    TransferSchedule,
    build_join_graph,
    classify_acyclicity,
    derive_schedule,
    gyo_reduce,
    is_join_tree,
    largest_root,
    safe_subjoin,
    small2large_schedule,
)
from .planner import (
    JoinPlan,
    enumerate_left_deep,
    plan_budget,
    random_bushy,
    random_left_deep,
)
from .querydoc import Filter, QuerySpec, RelationSpec
from .relstore import Relation, apply_selection, load_csv, visible_count

__all__ = [name for name in dir() if not name.startswith("_")]
