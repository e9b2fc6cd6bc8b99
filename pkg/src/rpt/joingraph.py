"""Join graphs, join trees, acyclicity classes, and transfer schedules.

The join graph of a natural-join query connects two relations iff they
share attributes; the edge weight is the number of shared attributes.  A
join tree is a spanning tree in which, for every attribute, the relations
containing it induce a connected subtree; equivalently, for acyclic
queries, a maximum spanning tree of the weighted join graph.  The tree
builder here grows an MST Prim-style from the largest relation so that big
tables sit near the root and get filtered before they feed any filter of
their own.  Safe-subjoin checking reuses the same machinery: a subjoin is
safe iff its own spanning tree can be extended to a maximum spanning tree
of the whole query.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .relstore import Schema, check_schema


class JoinGraphError(ValueError):
    pass


class DisconnectedGraphError(JoinGraphError):
    """Join graph falls apart into multiple components (Cartesian product)."""

    def __init__(self, components: list[set[str]]):
        parts = " | ".join("{" + ",".join(sorted(c)) + "}" for c in components)
        super().__init__(f"join graph is disconnected: {parts}")
        self.components = components


@dataclass(frozen=True)
class Edge:
    u: str
    v: str
    shared: Schema

    @property
    def weight(self) -> int:
        return len(self.shared)

    def other(self, vertex: str) -> str:
        return self.v if vertex == self.u else self.u


@dataclass(frozen=True)
class JoinGraph:
    schemas: Mapping[str, Schema]
    edges: tuple[Edge, ...]

    @property
    def vertices(self) -> tuple[str, ...]:
        return tuple(self.schemas)

    def edges_at(self, vertex: str) -> list[Edge]:
        return [e for e in self.edges if vertex in (e.u, e.v)]

    def edge_between(self, a: str, b: str) -> Edge | None:
        for e in self.edges:
            if {e.u, e.v} == {a, b}:
                return e
        return None

    def induced(self, subset: Iterable[str]) -> "JoinGraph":
        subset = set(subset)
        unknown = subset - set(self.schemas)
        if unknown:
            raise JoinGraphError(f"unknown relations {sorted(unknown)}")
        return JoinGraph(
            {n: s for n, s in self.schemas.items() if n in subset},
            tuple(e for e in self.edges if e.u in subset and e.v in subset),
        )

    def total_weight(self, edges: Iterable[tuple[str, str]]) -> int:
        total = 0
        for a, b in edges:
            e = self.edge_between(a, b)
            if e is None:
                raise JoinGraphError(f"no join-graph edge between {a} and {b}")
            total += e.weight
        return total


def _components(vertices: Sequence[str], edges: Sequence[Edge]) -> list[set[str]]:
    remaining = set(vertices)
    comps = []
    adj: dict[str, set[str]] = {v: set() for v in vertices}
    for e in edges:
        adj[e.u].add(e.v)
        adj[e.v].add(e.u)
    while remaining:
        start = remaining.pop()
        comp = {start}
        stack = [start]
        while stack:
            for nxt in adj[stack.pop()]:
                if nxt not in comp:
                    comp.add(nxt)
                    stack.append(nxt)
        remaining -= comp
        comps.append(comp)
    return comps


def build_join_graph(schemas: Mapping[str, Sequence[str]], require_connected: bool = True) -> JoinGraph:
    """Edges are exactly the relation pairs with nonempty shared attribute sets."""
    if not schemas:
        raise JoinGraphError("need at least one relation")
    checked = {name: check_schema(attrs) for name, attrs in schemas.items()}
    names = sorted(checked)
    edges = []
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            shared = tuple(x for x in checked[a] if x in checked[b])
            if shared:
                edges.append(Edge(a, b, shared))
    graph = JoinGraph(checked, tuple(edges))
    if require_connected:
        comps = _components(names, edges)
        if len(comps) > 1:
            raise DisconnectedGraphError(comps)
    return graph


@dataclass(frozen=True)
class JoinTree:
    """Spanning arborescence: each (child, parent) edge points toward the root."""

    root: str
    edges: tuple[tuple[str, str], ...]  # (child, parent), in construction order

    def __post_init__(self):
        children = [c for c, _ in self.edges]
        if len(set(children)) != len(children) or self.root in children:
            raise JoinGraphError("every non-root vertex needs exactly one parent")
        vertices = {self.root, *children, *(p for _, p in self.edges)}
        if len(self.edges) != len(vertices) - 1:
            raise JoinGraphError("edge count must be vertex count - 1")
        parent = dict(self.edges)
        for v in vertices:
            seen = set()
            while v != self.root:
                if v in seen or v not in parent:
                    raise JoinGraphError("tree edges do not all reach the root")
                seen.add(v)
                v = parent[v]

    @property
    def vertices(self) -> set[str]:
        return {self.root, *(c for c, _ in self.edges)}

    def parent_of(self) -> dict[str, str]:
        return dict(self.edges)

    def children_of(self) -> dict[str, list[str]]:
        kids: dict[str, list[str]] = {v: [] for v in self.vertices}
        for child, parent in self.edges:
            kids[parent].append(child)
        return kids

    def depths(self) -> dict[str, int]:
        parent = self.parent_of()
        depth = {self.root: 0}

        def walk(v: str) -> int:
            if v not in depth:
                depth[v] = walk(parent[v]) + 1
            return depth[v]

        for v in self.vertices:
            walk(v)
        return depth


class AcyclicityClass(enum.Enum):
    GAMMA_ACYCLIC = "gamma-acyclic"
    ALPHA_ACYCLIC_ONLY = "alpha-acyclic-only"
    CYCLIC = "cyclic"


@dataclass(frozen=True)
class SemiJoinStep:
    """One semi-join reduction: keep target rows with a match in source on `attrs`."""

    target: str
    source: str
    attrs: Schema

    def describe(self) -> str:
        return f"{self.target} <| {self.source} on ({','.join(self.attrs)})"


@dataclass(frozen=True)
class TransferSchedule:
    forward: tuple[SemiJoinStep, ...]
    backward: tuple[SemiJoinStep, ...]


def _rank(cardinalities: Mapping[str, int] | None, name: str) -> tuple:
    card = 0 if cardinalities is None else cardinalities.get(name, 0)
    return (card, name)


def largest_root(g: JoinGraph, cardinalities: Mapping[str, int] | None = None) -> JoinTree:
    """Prim-style maximum spanning tree rooted at the largest relation.

    Edge choice prefers, in order: largest weight, largest new vertex R
    (visible row count, then name), then the tree vertex S of smallest
    depth (flatter trees), then smallest name.
    """
    root = max(g.vertices, key=lambda n: _rank(cardinalities, n))
    return _grow_mst(g, cardinalities, seed_edges=(), visited={root}, root=root)


def _grow_mst(
    g: JoinGraph,
    cardinalities: Mapping[str, int] | None,
    seed_edges: tuple[tuple[str, str], ...],
    visited: set[str],
    root: str,
) -> JoinTree:
    edges = list(seed_edges)
    visited = set(visited)
    depth = JoinTree(root, tuple(seed_edges)).depths() if seed_edges else {root: 0}
    vertices = set(g.vertices)
    while visited != vertices:
        best = None
        best_key = None
        # candidates scanned in (old, new) name order; strict > keeps the
        # first seen, so equal keys resolve to the smallest tree vertex name
        frontier = sorted(
            (old, new, e.weight)
            for e in g.edges
            for new, old in ((e.u, e.v), (e.v, e.u))
            if new not in visited and old in visited
        )
        for old, new, weight in frontier:
            key = (weight, _rank(cardinalities, new), -depth[old])
            if best_key is None or key > best_key:
                best_key = key
                best = (new, old)
        if best is None:
            raise DisconnectedGraphError(_components(tuple(vertices), g.edges))
        new, old = best
        edges.append((new, old))
        visited.add(new)
        depth[new] = depth[old] + 1
    return JoinTree(root, tuple(edges))


def is_join_tree(t: JoinTree, g: JoinGraph) -> bool:
    """True iff every attribute's relations induce a connected subtree of t."""
    if t.vertices != set(g.vertices):
        raise JoinGraphError("tree does not span the join graph")
    attrs = {a for schema in g.schemas.values() for a in schema}
    for a in attrs:
        holders = {n for n, schema in g.schemas.items() if a in schema}
        if len(holders) <= 1:
            continue
        # count connected components of the induced subgraph of t
        parent = {v: v for v in holders}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for child, par in t.edges:
            if child in holders and par in holders:
                parent[find(child)] = find(par)
        roots = {find(v) for v in holders}
        if len(roots) > 1:
            return False
    return True


def mst_weight(g: JoinGraph, cardinalities: Mapping[str, int] | None = None) -> int:
    t = largest_root(g, cardinalities)
    return g.total_weight(t.edges)


def _join_attrs(g: JoinGraph) -> dict[str, frozenset[str]]:
    """Per relation: attributes shared with at least one other relation."""
    counts: dict[str, int] = {}
    for schema in g.schemas.values():
        for a in schema:
            counts[a] = counts.get(a, 0) + 1
    shared = {a for a, c in counts.items() if c >= 2}
    return {n: frozenset(schema) & shared for n, schema in g.schemas.items()}


def _has_size3_gamma_cycle(g: JoinGraph) -> bool:
    """Match the three-relation pattern P(x,y), Q(y,z), W(x,y,z) on join attributes.

    x, y, z are disjoint nonempty attribute groups with {x,y} <= P,
    {y,z} <= Q, and {x,y,z} <= W, scanned over all relation triples and
    role assignments.  Groups match iff single representatives do, so one
    attribute per group suffices.
    """
    jattrs = _join_attrs(g)
    names = list(g.vertices)
    for w in names:
        W = jattrs[w]
        if len(W) < 3:
            continue
        for p in names:
            if p == w:
                continue
            for q in names:
                if q in (w, p):
                    continue
                P, Q = jattrs[p], jattrs[q]
                ys = P & Q & W
                if not ys:
                    continue
                xs = P & W
                zs = Q & W
                for y in ys:
                    for x in xs:
                        if x == y:
                            continue
                        for z in zs:
                            if z != x and z != y:
                                return True
    return False


def classify_acyclicity(g: JoinGraph) -> AcyclicityClass:
    if not is_join_tree(largest_root(g), g):
        return AcyclicityClass.CYCLIC
    # shortcut: with no composite-key joins, alpha-acyclic implies gamma-acyclic
    if all(e.weight <= 1 for e in g.edges):
        return AcyclicityClass.GAMMA_ACYCLIC
    if _has_size3_gamma_cycle(g):
        return AcyclicityClass.ALPHA_ACYCLIC_ONLY
    return AcyclicityClass.GAMMA_ACYCLIC


def gyo_reduce(g: JoinGraph) -> bool:
    """Independent alpha-acyclicity oracle via ear removal.

    Repeatedly drop attributes private to a single relation and relations
    whose attributes are contained in another relation; acyclic iff
    everything is eventually removed.
    """
    hyper: dict[str, set[str]] = {n: set(s) for n, s in g.schemas.items()}
    changed = True
    while changed and hyper:
        changed = False
        counts: dict[str, int] = {}
        for attrs in hyper.values():
            for a in attrs:
                counts[a] = counts.get(a, 0) + 1
        for name, attrs in hyper.items():
            private = {a for a in attrs if counts[a] == 1}
            if private:
                attrs -= private
                changed = True
        for name in list(hyper):
            attrs = hyper[name]
            if not attrs or any(
                other != name and attrs <= hyper[other] for other in hyper
            ):
                del hyper[name]
                changed = True
                break
    return not hyper


def safe_subjoin(
    g: JoinGraph,
    subset: Iterable[str],
    cardinalities: Mapping[str, int] | None = None,
) -> bool:
    """True iff joining exactly `subset` first can never exceed the final output size.

    Builds a maximum spanning tree of the induced subgraph, extends it
    greedily over the full graph, and accepts iff the extension reaches the
    full graph's maximum spanning-tree weight (i.e. some join tree keeps
    the subset connected).
    """
    subset = set(subset)
    unknown = subset - set(g.vertices)
    if unknown:
        raise JoinGraphError(f"unknown relations {sorted(unknown)}")
    if not subset:
        raise JoinGraphError("subjoin must contain at least one relation")
    sub = g.induced(subset)
    comps = _components(tuple(sub.vertices), sub.edges)
    if len(comps) > 1:
        raise DisconnectedGraphError(comps)
    inner = largest_root(sub, cardinalities)
    seeded = _grow_mst(g, cardinalities, seed_edges=inner.edges, visited=subset, root=inner.root)
    return g.total_weight(seeded.edges) == mst_weight(g, cardinalities)


def derive_schedule(t: JoinTree, g: JoinGraph) -> TransferSchedule:
    """Forward pass: post-order, each parent reduced by its children.
    Backward pass: level-order from the root, each child reduced by its parent.
    Children are visited in tree-edge construction order.
    """
    kids = t.children_of()

    def step(target: str, source: str) -> SemiJoinStep:
        edge = g.edge_between(target, source)
        if edge is None:
            raise JoinGraphError(f"tree edge {target}-{source} is not a join-graph edge")
        return SemiJoinStep(target, source, edge.shared)

    forward: list[SemiJoinStep] = []

    def post(v: str) -> None:
        for c in kids[v]:
            post(c)
            forward.append(step(v, c))  # parent <| child

    post(t.root)

    backward: list[SemiJoinStep] = []
    queue = [t.root]
    while queue:
        v = queue.pop(0)
        for c in kids[v]:
            backward.append(step(c, v))  # child <| parent
            queue.append(c)

    return TransferSchedule(tuple(forward), tuple(backward))


def small2large_schedule(
    g: JoinGraph, cardinalities: Mapping[str, int] | None = None
) -> TransferSchedule:
    """Comparison baseline: direct every edge small-to-large, no tree.

    Forward steps follow a Kahn topological order of the resulting DAG
    (name ties broken lexicographically); the backward pass replays the
    forward steps with target and source swapped.  Kept because it can
    leave acyclic queries incompletely reduced.
    """
    direction: list[tuple[str, str, Schema]] = []  # (small, large, attrs)
    for e in g.edges:
        small, large = sorted((e.u, e.v), key=lambda n: _rank(cardinalities, n))
        direction.append((small, large, e.shared))
    out_edges: dict[str, list[tuple[str, Schema]]] = {v: [] for v in g.vertices}
    indeg = {v: 0 for v in g.vertices}
    for small, large, attrs in direction:
        out_edges[small].append((large, attrs))
        indeg[large] += 1
    ready = sorted(v for v, d in indeg.items() if d == 0)
    forward: list[SemiJoinStep] = []
    while ready:
        v = ready.pop(0)
        for large, attrs in sorted(out_edges[v]):
            forward.append(SemiJoinStep(large, v, attrs))
            indeg[large] -= 1
            if indeg[large] == 0:
                ready.append(large)
                ready.sort()
    backward = tuple(SemiJoinStep(s.source, s.target, s.attrs) for s in forward)
    return TransferSchedule(tuple(forward), backward)
