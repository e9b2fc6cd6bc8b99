"""Query specification documents and instance loading.

A query document lists relations (name, attributes, optional CSV path),
optional per-relation filter predicates, and optional primary-key
declarations used by the trivial-semi-join pruning rule.  Equality joins
are natural joins: columns meant to join must already carry the same
attribute name.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import relstore
from .joingraph import JoinGraph, build_join_graph
from .relstore import Relation

_OP_ALIASES = {"==": "=", "≤": "<=", "≥": ">="}


@dataclass(frozen=True)
class Filter:
    attr: str
    op: str
    value: int

    def __post_init__(self):
        op = _OP_ALIASES.get(self.op, self.op)
        object.__setattr__(self, "op", op)
        if op not in relstore.FILTER_OPS:
            raise ValueError(f"unsupported filter operator {self.op!r}")


@dataclass(frozen=True)
class RelationSpec:
    name: str
    attrs: tuple[str, ...]
    data: str | None = None                       # CSV path, relative to the document
    filters: tuple[Filter, ...] = ()
    primary_key: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "attrs", relstore.check_schema(self.attrs))
        object.__setattr__(self, "filters", tuple(self.filters))
        object.__setattr__(self, "primary_key", tuple(self.primary_key))
        for a in self.primary_key:
            if a not in self.attrs:
                raise ValueError(f"{self.name}: primary key attr {a!r} not in schema")


@dataclass(frozen=True)
class QuerySpec:
    name: str
    relations: tuple[RelationSpec, ...]

    def __post_init__(self):
        names = [r.name for r in self.relations]
        if len(set(names)) != len(names):
            raise ValueError("duplicate relation name in query")

    def relation(self, name: str) -> RelationSpec:
        for r in self.relations:
            if r.name == name:
                return r
        raise KeyError(name)

    def schemas(self) -> dict[str, tuple[str, ...]]:
        return {r.name: r.attrs for r in self.relations}

    def join_graph(self) -> JoinGraph:
        return build_join_graph(self.schemas())

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "relations": [
                {
                    "name": r.name,
                    "attrs": list(r.attrs),
                    **({"data": r.data} if r.data else {}),
                    **(
                        {"filters": [{"attr": f.attr, "op": f.op, "value": f.value} for f in r.filters]}
                        if r.filters
                        else {}
                    ),
                    **({"primary_key": list(r.primary_key)} if r.primary_key else {}),
                }
                for r in self.relations
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "QuerySpec":
        relations = tuple(
            RelationSpec(
                name=r["name"],
                attrs=tuple(r["attrs"]),
                data=r.get("data"),
                filters=tuple(Filter(f["attr"], f["op"], int(f["value"])) for f in r.get("filters", ())),
                primary_key=tuple(r.get("primary_key", ())),
            )
            for r in doc["relations"]
        )
        return cls(doc.get("name", "query"), relations)


def load_query(path) -> QuerySpec:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        return QuerySpec.from_json(json.load(fh))


def save_query(query: QuerySpec, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(query.to_json(), fh, indent=2)
        fh.write("\n")


def load_instance(query: QuerySpec, base_dir) -> dict[str, Relation]:
    """Read each relation's CSV (paths resolved against `base_dir`)."""
    base = Path(base_dir)
    instance = {}
    for spec in query.relations:
        if spec.data is None:
            raise ValueError(f"relation {spec.name} has no data path")
        instance[spec.name] = relstore.load_csv(base / spec.data, spec.attrs, name=spec.name)
    return instance


def apply_base_filters(instance: dict[str, Relation], query: QuerySpec) -> dict[str, Relation]:
    filtered = {}
    for spec in query.relations:
        rel = instance[spec.name]
        for f in spec.filters:
            rel = relstore.select_where(rel, f.attr, f.op, f.value)
        filtered[spec.name] = rel
    return filtered


def filtered_relations(query: QuerySpec) -> set[str]:
    return {r.name for r in query.relations if r.filters}
