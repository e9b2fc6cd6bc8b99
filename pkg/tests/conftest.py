"""Shared builders for randomized queries, instances, and graphs."""

from __future__ import annotations

import numpy as np

from rpt.generators import SyntheticSpec, build_instance
from rpt.joingraph import JoinGraph, build_join_graph
from rpt.querydoc import Filter, QuerySpec, RelationSpec
from rpt.relstore import Relation


def make_relation(name, attrs, rows):
    data = np.asarray(rows, dtype=np.int64).reshape(len(rows), len(attrs))
    return Relation(name, tuple(attrs), {a: data[:, i] for i, a in enumerate(attrs)})


def make_query(schemas, filters=None, primary_keys=None, name="q"):
    filters = filters or {}
    primary_keys = primary_keys or {}
    return QuerySpec(
        name,
        tuple(
            RelationSpec(
                n,
                tuple(attrs),
                filters=tuple(Filter(*f) for f in filters.get(n, ())),
                primary_key=tuple(primary_keys.get(n, ())),
            )
            for n, attrs in schemas.items()
        ),
    )


def random_acyclic_schemas(rng: np.random.Generator, max_relations=7):
    """Random alpha-acyclic schemas: each attribute spans a random subtree of a random tree."""
    k = int(rng.integers(2, max_relations + 1))
    names = [f"N{i}" for i in range(k)]
    parent = {0: None}
    children = {i: [] for i in range(k)}
    for i in range(1, k):
        p = int(rng.integers(0, i))
        parent[i] = p
        children[p].append(i)
    n_attrs = int(rng.integers(k - 1, 2 * k))
    schemas = {n: set() for n in names}
    for a in range(n_attrs):
        root = int(rng.integers(0, k))
        members = [root]
        frontier = [root]
        while frontier:
            v = frontier.pop()
            for c in children[v]:
                if c not in members and rng.random() < 0.5:
                    members.append(c)
                    frontier.append(c)
        for m in members:
            schemas[names[m]].add(f"X{a}")
    # tree edges must stay connected in the join graph: give each a backbone attr
    for i in range(1, k):
        shared = schemas[names[i]] & schemas[names[parent[i]]]
        if not shared:
            schemas[names[i]].add(f"E{i}")
            schemas[names[parent[i]]].add(f"E{i}")
    return {n: tuple(sorted(attrs)) for n, attrs in schemas.items()}


def random_connected_graph(rng: np.random.Generator, max_relations=7) -> JoinGraph:
    """Random connected weighted join graph (not necessarily acyclic)."""
    k = int(rng.integers(2, max_relations + 1))
    names = [f"N{i}" for i in range(k)]
    schemas = {n: set() for n in names}
    attr = 0
    # spanning backbone keeps it connected
    for i in range(1, k):
        j = int(rng.integers(0, i))
        for _ in range(int(rng.integers(1, 4))):
            schemas[names[i]].add(f"X{attr}")
            schemas[names[j]].add(f"X{attr}")
            attr += 1
    extra = int(rng.integers(0, 2 * k))
    for _ in range(extra):
        i, j = rng.choice(k, size=2, replace=False)
        schemas[names[i]].add(f"X{attr}")
        schemas[names[j]].add(f"X{attr}")
        attr += 1
    return build_join_graph({n: tuple(sorted(s)) for n, s in schemas.items()})


def random_instance_for(schemas, rng: np.random.Generator, max_rows=50):
    """Random small instance: key domains sized for partial overlap."""
    instance = {}
    for name, attrs in schemas.items():
        n = int(rng.integers(1, max_rows + 1))
        cols = {a: rng.integers(0, max(2, max_rows // 2), size=n, dtype=np.int64) for a in attrs}
        instance[name] = Relation(name, tuple(attrs), cols)
    return instance


def random_generated_query(rng: np.random.Generator, max_rows=50):
    """Mixed chain/star/fig2 instance with random predicates, per the oracle battery."""
    shape = ("chain", "star", "fig2")[int(rng.integers(3))]
    if shape == "chain":
        k = int(rng.integers(3, 7))
        spec = SyntheticSpec("chain", {"k": k, "n": int(rng.integers(0, max_rows + 1))})
    elif shape == "star":
        k = int(rng.integers(2, 6))
        spec = SyntheticSpec(
            "star",
            {"k": k, "n": int(rng.integers(4, max_rows + 1)), "sel": float(rng.uniform(0.2, 1.0))},
            seed=int(rng.integers(2**31)),
        )
    else:
        spec = SyntheticSpec("fig2", {"n": int(rng.integers(1, max_rows + 1))})
    query, instance = build_instance(spec)
    query = _with_random_predicates(query, instance, rng)
    return query, instance


def _with_random_predicates(query, instance, rng):
    relations = []
    for rel_spec in query.relations:
        filters = list(rel_spec.filters)
        if rng.random() < 0.4:
            attr = rel_spec.attrs[int(rng.integers(len(rel_spec.attrs)))]
            col = instance[rel_spec.name].columns[attr]
            if col.size:
                value = int(col[int(rng.integers(col.size))])
                op = ("<", ">", "<=", ">=", "=")[int(rng.integers(5))]
                filters.append(Filter(attr, op, value))
        relations.append(
            RelationSpec(rel_spec.name, rel_spec.attrs, rel_spec.data, tuple(filters), rel_spec.primary_key)
        )
    return QuerySpec(query.name, tuple(relations))
