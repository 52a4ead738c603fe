"""Worst-case optimal join (generic join) over hash tries.

Variables are bound one at a time. For each variable the participating
relations are intersected by scanning the smallest child set under the
current prefix and probing the others. ``JoinPlan`` compiles the index
orders once; ``delta_join`` binds the changed relation's variables first,
which evaluates the join semijoined with a single new tuple.
"""
from __future__ import annotations

import itertools
from typing import Iterator, Mapping, Sequence

from .query import Database, Query, QueryError
from .storage import IndexedRelation


class JoinPlan:
    """A compiled generic join over relations with the given schemas.

    ``fixed`` names an input whose tuple is supplied at run time; its
    variables are bound before the search starts and it is not probed.
    """

    def __init__(
        self,
        schemas: Sequence[Sequence[str]],
        out_vars: Sequence[str],
        var_order: Sequence[str] | None = None,
        fixed: int | None = None,
    ):
        self.schemas = [tuple(s) for s in schemas]
        self.out_vars = tuple(out_vars)
        all_vars = {v for s in self.schemas for v in s}
        if not all_vars <= set(self.out_vars):
            raise QueryError("output variables must include every input variable")
        order = list(var_order) if var_order is not None else list(self.out_vars)
        self.fixed = fixed
        bound = list(self.schemas[fixed]) if fixed is not None else []
        free = [v for v in order if v not in bound]
        self.free = free
        self.bound = bound
        pos = {v: i for i, v in enumerate(self.out_vars)}
        self.bound_pos = [pos[v] for v in bound]
        self.free_pos = [pos[v] for v in free]
        # per input: (index order, number of leading bound variables)
        self.orders: list[tuple[tuple[str, ...], int] | None] = []
        # per input: how many of its variables are bound up front
        self.initial: list[tuple[int, ...]] = []
        for i, s in enumerate(self.schemas):
            if i == fixed:
                self.orders.append(None)
                self.initial.append(())
                continue
            pre = [v for v in s if v in bound]  # any order works for a bound prefix
            rest = [v for v in free if v in s]
            self.orders.append((tuple(pre + rest), len(pre) if len(pre) >= 2 else 0))
            self.initial.append(tuple(pos[v] for v in pre))
        # steps[j] = indices of inputs that contain free[j]
        self.steps = [
            [i for i, s in enumerate(self.schemas) if i != fixed and v in s] for v in free
        ]

    def prepare(self, rels: Sequence[IndexedRelation]) -> None:
        """Build the index orders up front (``run`` also builds them lazily)."""
        for rel, order in zip(rels, self.orders):
            if order is not None:
                rel.ensure_order(*order)

    def run(self, rels: Sequence[IndexedRelation], fixed_tuple: tuple | None = None) -> Iterator[tuple]:
        """Yield the join output. Relations must not change while it runs."""
        orders = self.orders
        for i, order in enumerate(orders):
            if order is not None and not rels[i].tuples:
                return
        vals: list = [None] * len(self.out_vars)
        if self.fixed is not None:
            if fixed_tuple is None or len(fixed_tuple) != len(self.bound):
                raise QueryError("fixed tuple does not match the fixed input's schema")
            for p, v in zip(self.bound_pos, fixed_tuple):
                vals[p] = v
        nodes: list = [None] * len(self.schemas)
        for i, order in enumerate(orders):
            if order is None:
                continue
            idx = rels[i].tries.get(order)
            if idx is None:
                idx = rels[i].ensure_order(*order)
            node = idx.find([vals[p] for p in self.initial[i]])
            if node is None or not node[0]:
                return
            nodes[i] = node
        yield from self._search(0, nodes, vals)

    def _search(self, j, nodes, vals) -> Iterator[tuple]:
        if j == len(self.free):
            yield tuple(vals)
            return
        parts = self.steps[j]
        p_out = self.free_pos[j]
        if len(parts) == 1:
            i = parts[0]
            base = nodes[i]
            for val, child in base[1].items():
                vals[p_out] = val
                nodes[i] = child
                yield from self._search(j + 1, nodes, vals)
            nodes[i] = base
            return
        best, best_kids = None, None
        for i in parts:
            kids = nodes[i][1]
            if best_kids is None or len(kids) < len(best_kids):
                best, best_kids = i, kids
        saved = [nodes[i] for i in parts]
        others = [(i, nodes[i][1]) for i in parts if i != best]
        for val, child in best_kids.items():
            found = []
            for i, kids in others:
                c = kids.get(val)
                if c is None:
                    break
                found.append((i, c))
            else:
                nodes[best] = child
                for i, c in found:
                    nodes[i] = c
                vals[p_out] = val
                yield from self._search(j + 1, nodes, vals)
        for i, s in zip(parts, saved):
            nodes[i] = s


def _indexed(q: Query, db: Database | Mapping[str, set]) -> list[IndexedRelation]:
    rels = []
    for a in q.atoms:
        data = db[a.relation]
        r = IndexedRelation(a.schema, name=a.relation)
        for t in data:
            if len(t) != len(a.schema):
                raise QueryError(f"arity mismatch in {a.relation}: {t}")
            r.insert(tuple(t))
        rels.append(r)
    return rels


def generic_join(q: Query, db: Database | Mapping[str, set], var_order: Sequence[str] | None = None) -> set[tuple]:
    """The natural join of ``q`` over ``db``; tuples follow ``q.head``."""
    rels = _indexed(q, db)
    plan = JoinPlan([a.schema for a in q.atoms], q.head, var_order)
    plan.prepare(rels)
    return set(plan.run(rels))


def delta_join(q: Query, db: Database | Mapping[str, set], relation: str, inserted: tuple,
               var_order: Sequence[str] | None = None) -> set[tuple]:
    """Output tuples of ``q`` that use ``inserted`` from ``relation``.

    ``db`` must already contain the insert; for an insert that changed the
    database this is exactly the set of new output tuples.
    """
    names = q.relations()
    if relation not in names:
        raise QueryError(f"unknown relation {relation!r}")
    k = names.index(relation)
    if len(inserted) != len(q.atoms[k].schema):
        raise QueryError(f"arity mismatch for {relation}: {inserted}")
    rels = _indexed(q, db)
    plan = JoinPlan([a.schema for a in q.atoms], q.head, var_order, fixed=k)
    plan.prepare(rels)
    return set(plan.run(rels, tuple(inserted)))


def brute_force_join(q: Query, db: Database | Mapping[str, set]) -> set[tuple]:
    """Nested-loop oracle: extend partial assignments atom by atom."""
    partial: list[dict] = [{}]
    for a in q.atoms:
        nxt = []
        for asg in partial:
            for t in db[a.relation]:
                if all(asg.get(v, t[i]) == t[i] for i, v in enumerate(a.schema)):
                    new = dict(asg)
                    new.update(zip(a.schema, t))
                    nxt.append(new)
        partial = nxt
    return {tuple(asg[v] for v in q.head) for asg in partial}


def agm_bound(q: Query, db: Database | Mapping[str, set], cover: Mapping[str, float]) -> float:
    """``prod |R|^lambda_R`` over the atoms of ``q`` for a fractional edge cover."""
    out = 1.0
    for a in q.atoms:
        out *= float(len(db[a.relation])) ** float(cover.get(a.relation, 0))
    return out


def decomposed_agm(q: Query, db: Database | Mapping[str, set], cover: Mapping[str, float],
                   y: Sequence[str]) -> float:
    """Sum over tuples ``t`` on ``y`` of ``prod |R semijoin t|^lambda_R``.

    Only tuples over the active domain of each variable can give a
    non-zero term, since every variable is covered by some atom with a
    positive weight.
    """
    y = list(y)
    domains = []
    for v in y:
        vals = set()
        for a in q.atoms:
            if v in a.schema:
                p = a.schema.index(v)
                vals |= {t[p] for t in db[a.relation]}
        domains.append(sorted(vals, key=repr))
    total = 0.0
    for combo in itertools.product(*domains):
        fixed = dict(zip(y, combo))
        term = 1.0
        for a in q.atoms:
            lam = float(cover.get(a.relation, 0))
            checks = [(i, fixed[v]) for i, v in enumerate(a.schema) if v in fixed]
            size = sum(1 for t in db[a.relation] if all(t[i] == c for i, c in checks))
            term *= float(size) ** lam
            if term == 0.0:
                break
        total += term
    return total
