"""Reference maintainers used as ground truth and as benchmark baselines.

``NaiveEngine`` recomputes the whole result after every update.
``DeltaEngine`` keeps the result materialised and applies the first-order
delta of each update, evaluated as a join with the updated atom bound. A
candidate removal is re-checked against the updated database before it is
dropped.

Both accept any stream: re-inserting a present tuple or deleting an absent
one is a no-op with an empty delta.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

from .query import Query, QueryError, Update
from .storage import IndexedRelation
from .wcoj import JoinPlan


@dataclass(frozen=True)
class Step:
    """Result after one update, and the signed change it caused."""

    full: frozenset
    delta: frozenset  # of ("+" | "-", tuple)


class _Base:
    def __init__(self, q: Query):
        self.query = q
        self.rels = [IndexedRelation(a.schema, name=a.relation) for a in q.atoms]
        self.index = {a.relation: i for i, a in enumerate(q.atoms)}

    def _rel(self, relation: str, t: tuple) -> IndexedRelation:
        if relation not in self.index:
            raise QueryError(f"unknown relation {relation!r}")
        rel = self.rels[self.index[relation]]
        if len(t) != len(rel.schema):
            raise QueryError(f"arity mismatch for {relation}: {t}")
        return rel

    def size(self) -> int:
        return sum(len(r) for r in self.rels)


class NaiveEngine(_Base):
    def __init__(self, q: Query):
        super().__init__(q)
        self.plan = JoinPlan([a.schema for a in q.atoms], q.head)

    def insert(self, relation: str, t: tuple) -> bool:
        return self._rel(relation, t).insert(tuple(t))

    def delete(self, relation: str, t: tuple) -> bool:
        return self._rel(relation, t).delete(tuple(t))

    def result(self) -> set[tuple]:
        return set(self.plan.run(self.rels))


class DeltaEngine(_Base):
    def __init__(self, q: Query):
        super().__init__(q)
        schemas = [a.schema for a in q.atoms]
        self.plans = [JoinPlan(schemas, q.head, fixed=i) for i in range(len(schemas))]
        self.materialised: set[tuple] = set()
        self.pos = {v: i for i, v in enumerate(q.head)}

    def _delta(self, relation: str, t: tuple) -> set[tuple]:
        return set(self.plans[self.index[relation]].run(self.rels, tuple(t)))

    def _supported(self, x: tuple) -> bool:
        return all(tuple(x[self.pos[v]] for v in r.schema) in r for r in self.rels)

    def insert(self, relation: str, t: tuple) -> set[tuple]:
        """Apply the insert; returns the new result tuples."""
        if not self._rel(relation, t).insert(tuple(t)):
            return set()
        new = self._delta(relation, t)
        self.materialised |= new
        return new

    def delete(self, relation: str, t: tuple) -> set[tuple]:
        """Apply the delete; returns the result tuples that vanished."""
        rel = self._rel(relation, t)
        if tuple(t) not in rel:
            return set()
        candidates = self._delta(relation, t)
        rel.delete(tuple(t))
        gone = {x for x in candidates if not self._supported(x)}
        self.materialised -= gone
        return gone

    def result(self) -> set[tuple]:
        return set(self.materialised)


def naive_maintain(q: Query, stream: Iterable[Update]) -> Iterator[Step]:
    engine = NaiveEngine(q)
    prev: frozenset = frozenset()
    for u in stream:
        (engine.insert if u.sign == "+" else engine.delete)(u.relation, u.tuple)
        cur = frozenset(engine.result())
        delta = frozenset(("+", t) for t in cur - prev) | frozenset(("-", t) for t in prev - cur)
        yield Step(cur, delta)
        prev = cur


def delta_maintain(q: Query, stream: Iterable[Update]) -> Iterator[Step]:
    engine = DeltaEngine(q)
    for u in stream:
        if u.sign == "+":
            delta = frozenset(("+", t) for t in engine.insert(u.relation, u.tuple))
        else:
            delta = frozenset(("-", t) for t in engine.delete(u.relation, u.tuple))
        yield Step(frozenset(engine.materialised), delta)
