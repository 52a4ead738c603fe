"""Insert-only maintenance over an optimal tree decomposition.

Full mode keeps the bottom-up views, which is enough to enumerate the
result from the root. Delta mode also keeps the top-down views, so the
tuples created by the latest insert can be enumerated by starting at a
bag that holds the inserted atom.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .query import Query, QueryError
from .views import ViewTree
from .width import TreeDecomposition, fhtw


class UnsupportedOperation(QueryError):
    pass


class StaleHandle(QueryError):
    pass


@dataclass(frozen=True)
class DeltaHandle:
    clock: int
    sign: str
    relation: str
    tuple: tuple
    changed: bool


class InsertOnlyEngine:
    def __init__(self, q: Query, mode: str = "full", td: TreeDecomposition | None = None):
        if mode not in ("full", "delta"):
            raise ValueError(f"mode must be 'full' or 'delta', not {mode!r}")
        self.query = q
        self.mode = mode
        self.td = td if td is not None else fhtw(q)[1]
        self.views = ViewTree(q, self.td, topdown=(mode == "delta"))
        self.clock = 0

    def insert(self, relation: str, t: tuple) -> DeltaHandle:
        atom = self.query.atom(relation)
        if len(t) != len(atom.schema):
            raise QueryError(f"arity mismatch for {relation}: {t}")
        self.clock += 1
        changed = self.views.insert(relation, tuple(t))
        return DeltaHandle(self.clock, "+", relation, tuple(t), changed)

    def delete(self, relation: str, t: tuple) -> DeltaHandle:
        raise UnsupportedOperation("the insert-only engine does not support deletes")

    def enumerate_full(self) -> Iterator[tuple]:
        return self.views.enumerate()

    def enumerate_delta(self, handle: DeltaHandle) -> Iterator[tuple]:
        if self.mode != "delta":
            raise QueryError("delta enumeration needs an engine in delta mode")
        if handle.clock != self.clock:
            raise StaleHandle(f"handle from update {handle.clock}, engine is at {self.clock}")
        if not handle.changed:
            return iter(())
        return self.views.enumerate_using(handle.relation, handle.tuple)

    def size(self) -> int:
        return self.views.size()
