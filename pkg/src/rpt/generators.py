"""Synthetic instances: generators for the oracle and robustness experiments.

Every generator is deterministic given its seed and returns (query, instance)
in memory; `gen_instance` also writes the CSVs plus a query document.

The chain and star generators thread a small backbone of contributing rows
through every relation and pad the rest with distractor rows that survive
exactly one pairwise join before dying.  That keeps the final output small
and plan-independent while a bad join order still has to materialize the
distractors, which is what separates the robustness of reduced and
unreduced execution at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .planner import rng_from_seed
from .querydoc import Filter, QuerySpec, RelationSpec, save_query
from .relstore import Relation, write_csv


class GeneratorError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    generator: str
    params: dict = field(default_factory=dict)
    seed: int = 0


# value-range bases keeping backbone, thread, and per-relation garbage keys disjoint
_BASE = 10**9


def _garbage(j: int, side: int) -> int:
    return _BASE * (2 + 2 * j + side)


_THREAD = _BASE


def build_unsafe3(n: int) -> tuple[QuerySpec, dict[str, Relation]]:
    """Three relations sharing composite keys; joining S with T first blows up to n^2."""
    i = np.arange(1, n + 1, dtype=np.int64)
    ones = np.ones(n, dtype=np.int64)
    instance = {
        "R": Relation("R", ("A", "B", "C"), {"A": i, "B": ones, "C": i}),
        "S": Relation("S", ("A", "B"), {"A": i, "B": ones}),
        "T": Relation("T", ("B", "C"), {"B": ones, "C": i}),
    }
    query = QuerySpec(
        f"unsafe3_n{n}",
        (
            RelationSpec("R", ("A", "B", "C")),
            RelationSpec("S", ("A", "B")),
            RelationSpec("T", ("B", "C")),
        ),
    )
    return query, instance


def build_blowup3(n: int) -> tuple[QuerySpec, dict[str, Relation]]:
    """Empty-output chain where every unreduced binary plan materializes n^2/2 rows."""
    half = n // 2
    r_a = np.arange(n, dtype=np.int64)
    r_b = np.zeros(n, dtype=np.int64)
    s_b = np.concatenate([np.zeros(half, dtype=np.int64), np.arange(1, n - half + 1, dtype=np.int64)])
    s_c = np.concatenate([np.arange(1, half + 1, dtype=np.int64) + _BASE, np.zeros(n - half, dtype=np.int64)])
    t_c = np.zeros(n, dtype=np.int64)
    t_d = np.arange(n, dtype=np.int64)
    instance = {
        "R": Relation("R", ("A", "B"), {"A": r_a, "B": r_b}),
        "S": Relation("S", ("B", "C"), {"B": s_b, "C": s_c}),
        "T": Relation("T", ("C", "D"), {"C": t_c, "D": t_d}),
    }
    query = QuerySpec(
        f"blowup3_n{n}",
        (
            RelationSpec("R", ("A", "B")),
            RelationSpec("S", ("B", "C")),
            RelationSpec("T", ("C", "D")),
        ),
    )
    return query, instance


def _chain_names(k: int) -> tuple[list[str], list[str]]:
    rels = [f"R{i:02d}" for i in range(1, k + 1)]
    attrs = [f"A{i:02d}" for i in range(k + 1)]
    return rels, attrs


def build_chain(k: int, n: int) -> tuple[QuerySpec, dict[str, Relation]]:
    """k-relation chain; contributing backbone plus a distractor block on one interior edge."""
    if k < 2:
        raise GeneratorError("chain generator needs k >= 2")
    if n < 0:
        raise GeneratorError("chain generator needs n >= 0")
    rels, attrs = _chain_names(k)
    out = min(n, max(1, n // 25))
    d = n - out
    backbone = np.arange(out, dtype=np.int64)
    x = np.arange(d, dtype=np.int64)
    mid = k // 2  # distractor rows live in relations mid and mid+1 (1-based)

    instance = {}
    specs = []
    for j in range(1, k + 1):
        left_attr, right_attr = attrs[j - 1], attrs[j]
        if j == mid:
            left = np.concatenate([backbone, _garbage(j, 0) + x])
            right = np.concatenate([backbone, _THREAD + x])
        elif j == mid + 1:
            left = np.concatenate([backbone, _THREAD + x])
            right = np.concatenate([backbone, _garbage(j, 1) + x])
        else:
            left = np.concatenate([backbone, _garbage(j, 0) + x])
            right = np.concatenate([backbone, _garbage(j, 1) + x])
        name = rels[j - 1]
        instance[name] = Relation(name, (left_attr, right_attr), {left_attr: left, right_attr: right})
        specs.append(RelationSpec(name, (left_attr, right_attr)))
    return QuerySpec(f"chain{k}_n{n}", tuple(specs)), instance


def build_star(k: int, n: int, sel: float, seed: int = 0) -> tuple[QuerySpec, dict[str, Relation]]:
    """Fact table with k key-matched dimensions, each filtered to `sel` selectivity.

    Distractor fact rows reference filtered-out keys of the first two
    dimensions, so they survive any join that has not yet touched either.
    """
    if k < 1:
        raise GeneratorError("star generator needs k >= 1")
    if not 0.0 < sel <= 1.0:
        raise GeneratorError("star selectivity must be in (0, 1]")
    rng = rng_from_seed(seed)
    keep = min(n, max(1, round(sel * n)))
    out = min(n, max(1, n // 20))
    d = n - out
    x = np.arange(d, dtype=np.int64)
    kill_dims = {1, 2} if k >= 2 else {1}

    fact_cols = {}
    for j in range(1, k + 1):
        attr = f"K{j}"
        live = rng.integers(0, keep, size=out, dtype=np.int64)
        if j in kill_dims and n > keep:
            dead = keep + ((x * (2 * j + 5)) % (n - keep))
        else:
            dead = rng.integers(0, keep, size=d, dtype=np.int64)
        fact_cols[attr] = np.concatenate([live, dead])

    instance = {"fact": Relation("fact", tuple(fact_cols), fact_cols)}
    specs = [RelationSpec("fact", tuple(fact_cols))]
    for j in range(1, k + 1):
        name = f"dim{j}"
        key = np.arange(n, dtype=np.int64)
        cols = {f"K{j}": key, f"V{j}": key.copy()}
        instance[name] = Relation(name, (f"K{j}", f"V{j}"), cols)
        filters = (Filter(f"V{j}", "<", keep),) if sel < 1.0 else ()
        specs.append(RelationSpec(name, (f"K{j}", f"V{j}"), filters=filters, primary_key=(f"K{j}",)))
    return QuerySpec(f"star{k}_n{n}", tuple(specs)), instance


def build_triangle(n: int, seed: int = 0) -> tuple[QuerySpec, dict[str, Relation]]:
    """Cyclic three-relation query with uniform keys."""
    rng = rng_from_seed(seed)
    dom = max(1, n)

    def col():
        return rng.integers(0, dom, size=n, dtype=np.int64)

    instance = {
        "R": Relation("R", ("A", "B"), {"A": col(), "B": col()}),
        "S": Relation("S", ("B", "C"), {"B": col(), "C": col()}),
        "T": Relation("T", ("C", "A"), {"C": col(), "A": col()}),
    }
    query = QuerySpec(
        f"triangle_n{n}",
        (
            RelationSpec("R", ("A", "B")),
            RelationSpec("S", ("B", "C")),
            RelationSpec("T", ("C", "A")),
        ),
    )
    return query, instance


def build_fig2(n: int) -> tuple[QuerySpec, dict[str, Relation]]:
    """R(A,B) * S(A,C) * T(B,D) with |R| < |S| < |T| and a selective predicate on S.

    The predicate kills S's row for key 0; a small-to-large transfer never
    propagates that to T, so T's key-0 row survives incompletely reduced.
    """
    if n < 1:
        raise GeneratorError("fig2 generator needs n >= 1")
    i = np.arange(n, dtype=np.int64)
    s_extra = np.arange(n, n + 2, dtype=np.int64)
    t_extra = np.arange(n, n + 5, dtype=np.int64)
    instance = {
        "R": Relation("R", ("A", "B"), {"A": i, "B": i}),
        "S": Relation(
            "S", ("A", "C"), {"A": np.concatenate([i, s_extra]), "C": np.concatenate([i, s_extra])}
        ),
        "T": Relation(
            "T", ("B", "D"), {"B": np.concatenate([i, t_extra]), "D": np.concatenate([i, t_extra])}
        ),
    }
    query = QuerySpec(
        f"fig2_n{n}",
        (
            RelationSpec("R", ("A", "B")),
            RelationSpec("S", ("A", "C"), filters=(Filter("C", ">=", 1),)),
            RelationSpec("T", ("B", "D")),
        ),
    )
    return query, instance


_GENERATORS = {
    "unsafe3": (build_unsafe3, ("n",)),
    "blowup3": (build_blowup3, ("n",)),
    "chain": (build_chain, ("k", "n")),
    "star": (build_star, ("k", "n", "sel")),
    "triangle": (build_triangle, ("n",)),
    "fig2": (build_fig2, ("n",)),
}

_SEEDED = {"star", "triangle"}


def generator_names() -> list[str]:
    return sorted(_GENERATORS)


def build_instance(spec: SyntheticSpec) -> tuple[QuerySpec, dict[str, Relation]]:
    if spec.generator not in _GENERATORS:
        raise GeneratorError(
            f"unknown generator {spec.generator!r}; available: {', '.join(generator_names())}"
        )
    fn, wanted = _GENERATORS[spec.generator]
    missing = [p for p in wanted if p not in spec.params]
    if missing:
        raise GeneratorError(f"{spec.generator}: missing parameters {missing}")
    extra = [p for p in spec.params if p not in wanted]
    if extra:
        raise GeneratorError(f"{spec.generator}: unknown parameters {extra}")
    kwargs = {p: spec.params[p] for p in wanted}
    for key in ("k", "n"):
        if key in kwargs:
            kwargs[key] = int(kwargs[key])
    if spec.generator in _SEEDED:
        kwargs["seed"] = spec.seed
    return fn(**kwargs)


def gen_instance(spec: SyntheticSpec, out_dir) -> Path:
    """Write the instance CSVs and query document; returns the query path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    query, instance = build_instance(spec)
    with_data = []
    for rel_spec in query.relations:
        csv_name = f"{rel_spec.name}.csv"
        write_csv(instance[rel_spec.name], out / csv_name)
        with_data.append(
            RelationSpec(rel_spec.name, rel_spec.attrs, csv_name, rel_spec.filters, rel_spec.primary_key)
        )
    query_path = out / "query.json"
    save_query(QuerySpec(query.name, tuple(with_data)), query_path)
    return query_path
