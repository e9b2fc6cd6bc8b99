"""Random and exhaustive Cartesian-product-free join plans.

Left-deep plans grow one joinable base relation at a time; bushy plans
contract a candidate set by repeatedly joining two joinable members.
Randomness comes from a numpy PCG64 generator so plan sequences are
reproducible across platforms from a single integer seed; seeds for
independent draws are derived with SeedSequence-style spawning.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .joingraph import JoinGraph


class PlannerError(ValueError):
    pass


BUDGET_SLOPE = 70
BUDGET_OFFSET = 190
BUDGET_MIN_JOINS = 3
BUDGET_MAX_JOINS = 17


def plan_budget(num_joins: int) -> int:
    """Random-plan count per shape: 70*m - 190, clamped to m in [3, 17]."""
    m = min(max(num_joins, BUDGET_MIN_JOINS), BUDGET_MAX_JOINS)
    return BUDGET_SLOPE * m - BUDGET_OFFSET


@dataclass(frozen=True)
class BushyNode:
    probe: "BushyNode | str"
    build: "BushyNode | str"

    def relations(self) -> set[str]:
        out = set()
        for side in (self.probe, self.build):
            out |= {side} if isinstance(side, str) else side.relations()
        return out

    def to_json(self):
        enc = lambda s: s if isinstance(s, str) else s.to_json()
        return {"probe": enc(self.probe), "build": enc(self.build)}

    @classmethod
    def from_json(cls, doc) -> "BushyNode | str":
        if isinstance(doc, str):
            return doc
        return cls(cls.from_json(doc["probe"]), cls.from_json(doc["build"]))


@dataclass(frozen=True)
class JoinPlan:
    kind: str                                # "left_deep" | "bushy"
    order: tuple[str, ...] | None = None
    tree: BushyNode | str | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.kind == "left_deep":
            if not self.order:
                raise PlannerError("left-deep plan needs a relation order")
        elif self.kind == "bushy":
            if self.tree is None:
                raise PlannerError("bushy plan needs a tree")
        else:
            raise PlannerError(f"unknown plan kind {self.kind!r}")

    def relations(self) -> set[str]:
        if self.kind == "left_deep":
            return set(self.order)
        return {self.tree} if isinstance(self.tree, str) else self.tree.relations()

    def describe(self) -> str:
        if self.kind == "left_deep":
            return ">".join(self.order)

        def fmt(node):
            if isinstance(node, str):
                return node
            return f"({fmt(node.probe)}*{fmt(node.build)})"

        return fmt(self.tree)

    def to_json(self) -> dict:
        doc: dict = {}
        if self.kind == "left_deep":
            doc["left_deep"] = list(self.order)
        else:
            doc["bushy"] = self.tree if isinstance(self.tree, str) else self.tree.to_json()
        if self.seed is not None:
            doc["seed"] = self.seed
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "JoinPlan":
        if "left_deep" in doc:
            return cls("left_deep", order=tuple(doc["left_deep"]), seed=doc.get("seed"))
        if "bushy" in doc:
            return cls("bushy", tree=BushyNode.from_json(doc["bushy"]), seed=doc.get("seed"))
        raise PlannerError("plan document needs a 'left_deep' or 'bushy' field")


def _attr_map(g: JoinGraph) -> dict[str, set[str]]:
    return {n: set(s) for n, s in g.schemas.items()}


def _joinable(attrs_a: set[str], attrs_b: set[str]) -> bool:
    return bool(attrs_a & attrs_b)


def random_left_deep(g: JoinGraph, rng: np.random.Generator, seed: int | None = None) -> JoinPlan:
    """Uniform start, then a uniform joinable extension at every step."""
    attrs = _attr_map(g)
    names = sorted(g.vertices)
    order = [names[int(rng.integers(len(names)))]]
    covered = set(attrs[order[0]])
    remaining = [n for n in names if n != order[0]]
    while remaining:
        candidates = [n for n in remaining if _joinable(attrs[n], covered)]
        if not candidates:
            raise PlannerError("join graph is disconnected; no joinable extension")
        pick = candidates[int(rng.integers(len(candidates)))]
        order.append(pick)
        covered |= attrs[pick]
        remaining.remove(pick)
    return JoinPlan("left_deep", order=tuple(order), seed=seed)


def random_bushy(g: JoinGraph, rng: np.random.Generator, seed: int | None = None) -> JoinPlan:
    """Contract a uniformly chosen joinable pair until one plan remains."""
    attrs = _attr_map(g)
    candidates: list[tuple[BushyNode | str, set[str]]] = [
        (n, set(attrs[n])) for n in sorted(g.vertices)
    ]
    while len(candidates) > 1:
        pairs = [
            (i, j)
            for i in range(len(candidates))
            for j in range(i + 1, len(candidates))
            if _joinable(candidates[i][1], candidates[j][1])
        ]
        if not pairs:
            raise PlannerError("join graph is disconnected; no joinable pair")
        i, j = pairs[int(rng.integers(len(pairs)))]
        (node_a, attrs_a), (node_b, attrs_b) = candidates[i], candidates[j]
        if int(rng.integers(2)):
            node_a, node_b = node_b, node_a
        merged = (BushyNode(probe=node_a, build=node_b), attrs_a | attrs_b)
        candidates = [c for k, c in enumerate(candidates) if k not in (i, j)]
        candidates.append(merged)
    node = candidates[0][0]
    return JoinPlan("bushy", tree=node, seed=seed)


MAX_ENUMERABLE = 7


def enumerate_left_deep(g: JoinGraph, max_relations: int = MAX_ENUMERABLE) -> list[JoinPlan]:
    """All left-deep orders whose every prefix is connected, in lexicographic order."""
    names = sorted(g.vertices)
    if len(names) > max_relations:
        raise PlannerError(
            f"{len(names)} relations exceed the enumeration cap of {max_relations}"
        )
    attrs = _attr_map(g)
    plans = []
    for perm in permutations(names):
        covered = set(attrs[perm[0]])
        ok = True
        for n in perm[1:]:
            if not _joinable(attrs[n], covered):
                ok = False
                break
            covered |= attrs[n]
        if ok:
            plans.append(JoinPlan("left_deep", order=perm))
    return plans


def derive_seed(master_seed: int, *indices: int) -> int:
    """Stable per-draw seed from a master seed and an index path."""
    x = np.uint64(master_seed & 0xFFFFFFFFFFFFFFFF)
    from .bloom import mix64

    for idx in indices:
        x = mix64(np.asarray([x], dtype=np.uint64), seed=idx)[0]
    return int(x)


def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed))
