"""Brute-force oracles: all-pairs join, contributing rows, spanning trees.

These deliberately avoid the hash-based machinery of the execution path.
The join oracle compares every pair of candidate rows with broadcast
equality tests and tracks, for each output row, which physical input row
of each relation produced it, so full-reduction checks can compare exact
survivor sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .joingraph import JoinGraph
from .relstore import Relation


@dataclass(frozen=True)
class OracleJoin:
    """Join output with provenance: one physical row index per input relation."""

    order: tuple[str, ...]          # relation evaluation order
    attrs: tuple[str, ...]          # output schema (first-seen order)
    values: np.ndarray              # (rows, |attrs|) int64
    row_indices: np.ndarray         # (rows, |order|) physical positions

    @property
    def num_rows(self) -> int:
        return self.values.shape[0]

    def contributing_rows(self, relation: str) -> np.ndarray:
        """Sorted physical row positions of `relation` that reach the output."""
        pos = self.order.index(relation)
        return np.unique(self.row_indices[:, pos])


def _bfs_order(instance: Mapping[str, Relation]) -> list[str]:
    # keep successive relations joinable so intermediates stay small
    names = sorted(instance)
    attr_map = {n: set(instance[n].attrs) for n in names}
    order = [names[0]]
    seen_attrs = set(attr_map[names[0]])
    remaining = set(names[1:])
    while remaining:
        nxt = next((n for n in sorted(remaining) if attr_map[n] & seen_attrs), None)
        if nxt is None:
            nxt = sorted(remaining)[0]  # disconnected: fall back to Cartesian
        order.append(nxt)
        seen_attrs |= attr_map[nxt]
        remaining.discard(nxt)
    return order


def nested_loop_join(instance: Mapping[str, Relation]) -> OracleJoin:
    """Bag-semantics natural join of the visible rows of all relations."""
    order = _bfs_order(instance)
    first = instance[order[0]]
    attrs = list(first.attrs)
    cols = {a: first.column(a).copy() for a in attrs}
    phys = first.visible_indices()
    rows = np.arange(phys.size)
    index_cols = [phys[rows]]

    for name in order[1:]:
        rel = instance[name]
        rel_phys = rel.visible_indices()
        shared = [a for a in attrs if a in rel.attrs]
        n_left = index_cols[0].size
        n_right = rel_phys.size
        mask = np.ones((n_left, n_right), dtype=bool)
        for a in shared:
            mask &= cols[a][:, None] == rel.column(a)[None, :]
        li, ri = np.nonzero(mask)
        cols = {a: cols[a][li] for a in attrs}
        index_cols = [c[li] for c in index_cols]
        index_cols.append(rel_phys[ri])
        for a in rel.attrs:
            if a not in cols:
                attrs.append(a)
                cols[a] = rel.column(a)[ri]

    values = (
        np.stack([cols[a] for a in attrs], axis=1)
        if attrs
        else np.zeros((index_cols[0].size, 0), dtype=np.int64)
    )
    return OracleJoin(tuple(order), tuple(attrs), values, np.stack(index_cols, axis=1))


def multiset_rows(values: np.ndarray) -> np.ndarray:
    """Canonical (sorted) row order for multiset comparison."""
    if values.shape[0] == 0:
        return values
    return values[np.lexsort(values.T[::-1])]


def same_multiset(a_attrs: Sequence[str], a_values: np.ndarray, b_attrs: Sequence[str], b_values: np.ndarray) -> bool:
    """Compare two row bags, aligning column order by attribute name."""
    if set(a_attrs) != set(b_attrs) or a_values.shape[0] != b_values.shape[0]:
        return False
    perm = [list(b_attrs).index(a) for a in a_attrs]
    return bool(np.array_equal(multiset_rows(a_values), multiset_rows(b_values[:, perm])))


def relation_values(rel: Relation) -> np.ndarray:
    cols = [rel.column(a) for a in rel.attrs]
    if not cols:
        return np.zeros((0, 0), dtype=np.int64)
    return np.stack(cols, axis=1)


def max_spanning_tree_weight(g: JoinGraph) -> int:
    """Exhaustive maximum over all spanning trees (small graphs only)."""
    vertices = list(g.vertices)
    if len(vertices) == 1:
        return 0
    n = len(vertices)
    index = {v: i for i, v in enumerate(vertices)}
    best = None
    for subset in combinations(g.edges, n - 1):
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        merged = 0
        for e in subset:
            ru, rv = find(index[e.u]), find(index[e.v])
            if ru == rv:
                break
            parent[ru] = rv
            merged += 1
        if merged == n - 1:
            weight = sum(e.weight for e in subset)
            if best is None or weight > best:
                best = weight
    if best is None:
        raise ValueError("graph has no spanning tree (disconnected)")
    return best


def all_spanning_trees(g: JoinGraph):
    """Yield spanning trees as edge tuples (small graphs only)."""
    vertices = list(g.vertices)
    n = len(vertices)
    if n == 1:
        yield ()
        return
    index = {v: i for i, v in enumerate(vertices)}
    for subset in combinations(g.edges, n - 1):
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        ok = True
        for e in subset:
            ru, rv = find(index[e.u]), find(index[e.v])
            if ru == rv:
                ok = False
                break
            parent[ru] = rv
        if ok:
            yield subset
