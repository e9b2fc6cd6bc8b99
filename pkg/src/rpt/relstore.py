"""In-memory columnar relations over 64-bit integers.

A relation is a named set of equal-length int64 columns plus an optional
selection vector listing the physical row positions that are currently
visible.  Semi-join reduction never deletes rows; it only narrows the
selection, so reduction steps cost O(survivors) and relations stay
immutable and shareable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

Schema = tuple[str, ...]

DEFAULT_BATCH_SIZE = 2048

FILTER_OPS = ("=", "<", ">", "<=", ">=")


class RelationError(ValueError):
    """Malformed relation, schema, or selection vector."""


class CsvParseError(RelationError):
    """CSV input that does not match the declared schema; carries the line number."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


def check_schema(attrs: Sequence[str]) -> Schema:
    attrs = tuple(attrs)
    if len(set(attrs)) != len(attrs):
        raise RelationError(f"duplicate attribute in schema {attrs}")
    return attrs


def as_selection(indices, num_rows: int) -> np.ndarray:
    """Validate and canonicalize a selection vector for a relation of `num_rows` rows."""
    sel = np.asarray(indices, dtype=np.int64)
    if sel.ndim != 1:
        raise RelationError("selection vector must be one-dimensional")
    if sel.size:
        if sel[0] < 0 or sel[-1] >= num_rows:
            raise RelationError(
                f"selection index out of range (rows={num_rows}, "
                f"min={sel.min()}, max={sel.max()})"
            )
        if not (np.diff(sel) > 0).all():
            raise RelationError("selection vector must be strictly increasing")
    return sel


@dataclass(frozen=True, eq=False)
class Relation:
    """Columnar table; `selection` (physical row positions) marks the visible rows."""

    name: str
    attrs: Schema
    columns: Mapping[str, np.ndarray]
    selection: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "attrs", check_schema(self.attrs))
        cols = {}
        length = None
        for a in self.attrs:
            if a not in self.columns:
                raise RelationError(f"{self.name}: missing column {a!r}")
            col = np.asarray(self.columns[a], dtype=np.int64)
            if col.ndim != 1:
                raise RelationError(f"{self.name}: column {a!r} must be one-dimensional")
            if length is None:
                length = col.size
            elif col.size != length:
                raise RelationError(
                    f"{self.name}: column {a!r} has {col.size} rows, expected {length}"
                )
            cols[a] = col
        object.__setattr__(self, "columns", cols)
        if length is None:
            length = 0
        if self.selection is not None:
            object.__setattr__(self, "selection", as_selection(self.selection, length))

    @property
    def num_rows(self) -> int:
        """Physical row count, ignoring the selection."""
        if not self.attrs:
            return 0
        return self.columns[self.attrs[0]].size

    def visible_indices(self) -> np.ndarray:
        if self.selection is None:
            return np.arange(self.num_rows, dtype=np.int64)
        return self.selection

    def column(self, attr: str) -> np.ndarray:
        """Visible values of one attribute, in selection order."""
        col = self.columns[attr]
        if self.selection is None:
            return col
        return col[self.selection]

    def with_selection(self, selection) -> "Relation":
        """Replacement selection in physical coordinates (no intersection)."""
        return Relation(self.name, self.attrs, self.columns, selection)

    def with_name(self, name: str) -> "Relation":
        return Relation(name, self.attrs, self.columns, self.selection)


def from_rows(name: str, attrs: Sequence[str], rows: Sequence[Sequence[int]]) -> Relation:
    attrs = check_schema(attrs)
    data = np.asarray(rows, dtype=np.int64).reshape(len(rows), len(attrs))
    return Relation(name, attrs, {a: data[:, i] for i, a in enumerate(attrs)})


def visible_count(r: Relation) -> int:
    if r.selection is None:
        return r.num_rows
    return int(r.selection.size)


def apply_selection(r: Relation, sel) -> Relation:
    """Narrow r's visible rows to those also listed in `sel` (physical positions)."""
    sel = as_selection(sel, r.num_rows)
    if r.selection is None:
        return r.with_selection(sel)
    return r.with_selection(np.intersect1d(r.selection, sel))


def select_where(r: Relation, attr: str, op: str, value: int) -> Relation:
    """Base-table predicate: keep visible rows with `column <op> value`."""
    if attr not in r.attrs:
        raise RelationError(f"{r.name}: unknown attribute {attr!r}")
    if op not in FILTER_OPS:
        raise RelationError(f"unsupported filter operator {op!r}")
    col = r.column(attr)
    if op == "=":
        mask = col == value
    elif op == "<":
        mask = col < value
    elif op == ">":
        mask = col > value
    elif op == "<=":
        mask = col <= value
    else:
        mask = col >= value
    return r.with_selection(r.visible_indices()[mask])


@dataclass(frozen=True)
class Batch:
    """Up to `batch_size` visible rows of a relation, in selection order."""

    attrs: Schema
    columns: Mapping[str, np.ndarray]
    positions: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return int(self.positions.size)


def iter_batches(r: Relation, batch_size: int = DEFAULT_BATCH_SIZE) -> Iterator[Batch]:
    if batch_size <= 0:
        raise RelationError("batch size must be positive")
    idx = r.visible_indices()
    for start in range(0, idx.size, batch_size):
        part = idx[start : start + batch_size]
        yield Batch(r.attrs, {a: r.columns[a][part] for a in r.attrs}, part)


def load_csv(path, attrs: Sequence[str], name: str | None = None) -> Relation:
    """Read a headerless CSV of 64-bit integers; row order is preserved."""
    path = Path(path)
    attrs = check_schema(attrs)
    arity = len(attrs)
    cols: list[list[int]] = [[] for _ in range(arity)]
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != arity:
                raise CsvParseError(
                    path, line_no, f"expected {arity} fields, found {len(fields)}"
                )
            try:
                parsed = [int(f) for f in fields]
            except ValueError:
                raise CsvParseError(path, line_no, f"non-integer field in {line!r}") from None
            for c, v in zip(cols, parsed):
                c.append(v)
    columns = {a: np.asarray(c, dtype=np.int64) for a, c in zip(attrs, cols)}
    return Relation(name or path.stem, attrs, columns)


def write_csv(r: Relation, path) -> None:
    """Canonical CSV form: visible rows, comma-separated base-10, newline-terminated."""
    path = Path(path)
    cols = [r.column(a) for a in r.attrs]
    with path.open("w", encoding="utf-8") as fh:
        for row in zip(*cols) if cols else ():
            fh.write(",".join(str(int(v)) for v in row))
            fh.write("\n")
