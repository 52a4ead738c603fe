"""Materialised bag views over a rooted tree decomposition.

Every bag ``t`` joins the projections of all atoms onto its bag (atoms
that miss the bag entirely become nullary presence checks) with the
projections of its children's views onto their separators. Views are
kept exact under single-tuple inserts and deletes:

* a new input tuple is pushed through the bag join with that tuple bound
  (a delta join), and new view tuples flow to the parent through the
  separator projection;
* a vanished input tuple removes the view tuples carrying it, found by a
  group index, and removals flow upward when a separator count hits zero.

With ``topdown`` enabled a second view per bag holds the bag projection
of the full result (the top-down pass), which supports enumerating the
tuples that use one given input tuple from any bag holding that atom.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Iterator, Sequence

from .query import Query, QueryError
from .storage import IndexedRelation, Projection
from .wcoj import JoinPlan
from .width import TreeDecomposition


@lru_cache(maxsize=4096)
def _plan(inputs: tuple, schema: tuple, order: tuple, fixed: int) -> JoinPlan:
    # Plans hold no data, so views over the same layout share them.
    return JoinPlan(inputs, schema, order, fixed=fixed)


class _Spec:
    """Data-independent part of one bag, shared by all trees of a layout."""

    __slots__ = ("id", "schema", "parent", "children", "sep", "inputs", "atoms", "plans",
                 "groups", "child_sep_pos", "groups2")


@lru_cache(maxsize=256)
def _layout(q: Query, bags: tuple, parent: tuple, root: int, root_prefix: tuple,
            topdown: bool) -> tuple[_Spec, ...]:
    specs = []
    for i, bag in enumerate(bags):
        n = _Spec()
        n.id = i
        n.parent = parent[i]
        n.children = [c for c, p in enumerate(parent) if p == i]
        if n.parent is None:
            lead = [v for v in root_prefix if v in bag]
            if len(lead) != len(root_prefix):
                raise QueryError("root bag must hold every enumeration prefix variable")
        else:
            parent_bag = set(bags[n.parent])
            lead = [v for v in bag if v in parent_bag]
        n.schema = tuple(lead + [v for v in bag if v not in lead])
        n.sep = tuple(lead) if n.parent is not None else ()
        specs.append(n)
    for n in specs:
        bagset = set(n.schema)
        n.atoms = [(a.relation, a.schema, tuple(v for v in a.schema if v in bagset)) for a in q.atoms]
        n.inputs = [vars_ for _, _, vars_ in n.atoms] + [specs[c].sep for c in n.children]
        # One variable order for every bag keeps the number of distinct
        # index orders on shared projections small.
        order = tuple(v for v in q.head if v in bagset)
        n.plans = [_plan(tuple(n.inputs), n.schema, order, k) for k in range(len(n.inputs))]
        n.groups = list(dict.fromkeys(n.inputs + ([n.sep] if n.parent is not None else [])))
        if n.parent is None and root_prefix:
            n.groups.append(tuple(root_prefix))
        n.child_sep_pos = {c: tuple(n.schema.index(v) for v in specs[c].sep) for c in n.children}
        n.groups2 = []
        if topdown:
            nbrs = n.children + ([n.parent] if n.parent is not None else [])
            for m in nbrs:
                n.groups2.append(tuple(v for v in n.schema if v in set(bags[m])))
            for a in q.atoms:
                if set(a.schema) <= bagset:
                    n.groups2.append(a.schema)
    return tuple(specs)


class _Node:
    __slots__ = (
        "id", "schema", "parent", "children", "sep", "view", "inputs", "plans",
        "input_rels", "up", "up_slot", "view2", "down_counts", "child_sep_pos",
    )


class InputStore:
    """Base relations and their projections.

    Relations are keyed by ``(name, schema)``. Several view trees may share
    one store; a projection then notifies the bags of every tree that
    reads it. With ``counted`` set, base tuples carry multiplicities and
    only the first copy (or the last removal) is propagated.
    """

    def __init__(self, counted: bool = False):
        self.counted = counted
        self.base: dict[tuple, dict[tuple, int]] = {}
        self.projs: dict[tuple, list[Projection]] = {}
        self._proj: dict[tuple, Projection] = {}

    def projection(self, relation: str, schema: tuple, vars_: tuple) -> Projection:
        key = (relation, schema, vars_)
        proj = self._proj.get(key)
        if proj is None:
            proj = self._proj[key] = Projection(schema, vars_, name=f"{relation}{vars_}")
            self.projs.setdefault((relation, schema), []).append(proj)
            self.base.setdefault((relation, schema), {})
        return proj

    def clear(self) -> None:
        """Drop all data; the trees reading this store must be cleared too."""
        for base in self.base.values():
            base.clear()
        for proj in self._proj.values():
            proj.clear()

    def insert(self, relation: str, schema: tuple, t: tuple) -> bool:
        """Add ``t``; returns True if it became present."""
        base = self.base[(relation, schema)]
        c = base.get(t, 0)
        if c and not self.counted:
            return False
        base[t] = c + 1
        if c:
            return False
        for proj in self.projs[(relation, schema)]:
            key = proj.add(t)
            if key is not None:
                for tree, node, slot in proj.subscribers:
                    tree._input_added(node, slot, key)
        return True

    def delete(self, relation: str, schema: tuple, t: tuple) -> bool:
        """Remove ``t`` (one copy when counted); returns True if it vanished."""
        base = self.base[(relation, schema)]
        c = base.get(t, 0)
        if not c:
            return False
        if c > 1:
            base[t] = c - 1
            return False
        del base[t]
        for proj in self.projs[(relation, schema)]:
            key = proj.remove(t)
            if key is not None:
                for tree, node, slot in proj.subscribers:
                    tree._input_removed(node, slot, key)
        return True


class ViewTree:
    def __init__(self, q: Query, td: TreeDecomposition, root_prefix: Sequence[str] = (),
                 topdown: bool = False, counted_base: bool = False, store: InputStore | None = None):
        self.q = q
        self.td = td
        self.topdown = topdown
        self._own_store = store is None
        if store is None:
            store = InputStore(counted_base)
        elif store.counted != counted_base:
            raise QueryError("shared store disagrees on counted base relations")
        if any(store.base.get((a.relation, a.schema)) for a in q.atoms):
            raise QueryError("views must be built before data enters a shared store")
        self.store = store
        self.head_pos = {v: i for i, v in enumerate(q.head)}
        self.schemas = {a.relation: a.schema for a in q.atoms}

        specs = _layout(q, tuple(tuple(b) for b in td.bags), tuple(td.parent), td.root,
                        tuple(root_prefix), topdown)
        self.nodes: list[_Node] = []
        for spec in specs:
            n = _Node()
            for attr in ("id", "schema", "parent", "children", "sep", "inputs", "plans", "child_sep_pos"):
                setattr(n, attr, getattr(spec, attr))
            n.view = IndexedRelation(n.schema, name=f"view{n.id}")
            for g in spec.groups:
                n.view.ensure_group(g)
            n.down_counts = {}
            n.view2 = None
            if topdown:
                n.view2 = IndexedRelation(n.schema, name=f"full{n.id}")
                for g in spec.groups2:
                    n.view2.ensure_group(g)
            self.nodes.append(n)
        for n, spec in zip(self.nodes, specs):
            n.input_rels = []
            for slot, (rel, schema, vars_) in enumerate(spec.atoms):
                proj = store.projection(rel, schema, vars_)
                proj.subscribers.append((self, n, slot))
                n.input_rels.append(proj.rel)
            for c in n.children:
                child = self.nodes[c]
                child.up = Projection(child.schema, child.sep, name=f"sep{c}")
                child.up_slot = len(n.input_rels)
                n.input_rels.append(child.up.rel)
        self.root = self.nodes[td.root]
        self.root_prefix = tuple(root_prefix)
        self.root_trie = self.root.view.ensure_order(self.root.schema) if root_prefix else None
        self.preorder = td.preorder()

    def clear(self) -> None:
        """Empty every view. A private store is emptied as well."""
        if self._own_store:
            self.store.clear()
        for n in self.nodes:
            n.view.clear()
            if n.parent is not None:
                n.up.clear()
            if n.view2 is not None:
                n.view2.clear()
                n.down_counts.clear()

    @property
    def base(self) -> dict[str, dict[tuple, int]]:
        return {r: self.store.base[(r, s)] for r, s in self.schemas.items()}

    # -------------------------------------------------------------- updates

    def insert(self, relation: str, t: tuple) -> bool:
        """Add ``t`` to a base relation; returns False if it was present."""
        return self.store.insert(relation, self.schemas[relation], t)

    def delete(self, relation: str, t: tuple) -> bool:
        """Remove ``t`` (one support when counted); returns True if it vanished."""
        if self.topdown:
            raise QueryError("top-down views support inserts only")
        return self.store.delete(relation, self.schemas[relation], t)

    def _input_added(self, n: _Node, slot: int, key: tuple) -> None:
        new = list(n.plans[slot].run(n.input_rels, key))
        for x in new:
            self._view_added(n, x)

    def _view_added(self, n: _Node, x: tuple) -> None:
        if not n.view.insert(x):
            return
        if n.parent is not None:
            key = n.up.add(x)
            if key is not None:
                self._input_added(self.nodes[n.parent], n.up_slot, key)
        if self.topdown and (n.parent is None or x[: len(n.sep)] in n.down_counts):
            self._full_added(n, x)

    def _full_added(self, n: _Node, x: tuple) -> None:
        if not n.view2.insert(x):
            return
        for c in n.children:
            child = self.nodes[c]
            key = tuple(x[p] for p in n.child_sep_pos[c])
            cnt = child.down_counts.get(key, 0)
            child.down_counts[key] = cnt + 1
            if cnt == 0:
                for y in list(child.view.select(child.sep, key)):
                    self._full_added(child, y)

    def _input_removed(self, n: _Node, slot: int, key: tuple) -> None:
        for x in list(n.view.select(n.inputs[slot], key)):
            self._view_removed(n, x)

    def _view_removed(self, n: _Node, x: tuple) -> None:
        n.view.delete(x)
        if n.parent is not None:
            key = n.up.remove(x)
            if key is not None:
                self._input_removed(self.nodes[n.parent], n.up_slot, key)

    # ---------------------------------------------------------- enumeration

    def size(self) -> int:
        return sum(len(self.store.base[(r, s)]) for r, s in self.schemas.items())

    def enumerate(self, prefix: tuple | None = None) -> Iterator[tuple]:
        """Full result in head order, optionally with the root's leading
        variables fixed to ``prefix``."""
        root = self.root
        if prefix is None:
            first = root.view
        else:
            first = root.view.select(self.root_prefix, prefix)
        yield from self._walk(self.preorder, first, lambda n: n.view)

    def enumerate_using(self, relation: str, t: tuple) -> Iterator[tuple]:
        """Result tuples that use ``t`` from ``relation`` (top-down views)."""
        if not self.topdown:
            raise QueryError("delta enumeration needs top-down views")
        atom = self.q.atom(relation)
        start = next(n for n in self.nodes if set(atom.schema) <= set(n.schema))
        order = [start.id]
        parent_of = {start.id: None}
        i = 0
        while i < len(order):
            for m in self.td.neighbours(order[i]):
                if m not in parent_of:
                    parent_of[m] = order[i]
                    order.append(m)
            i += 1
        first = start.view2.select(atom.schema, t)
        yield from self._walk(order, first, lambda n: n.view2, parent_of)

    def _walk(self, order, first, view_of, parent_of=None) -> Iterator[tuple]:
        nodes = [self.nodes[i] for i in order]
        hp = self.head_pos
        out_pos = [tuple(hp[v] for v in n.schema) for n in nodes]
        links = []
        for j, n in enumerate(nodes):
            if j == 0:
                links.append(None)
                continue
            par = n.parent if parent_of is None else parent_of[n.id]
            other = set(self.nodes[par].schema)
            shared = tuple(v for v in n.schema if v in other)
            links.append((shared, tuple(hp[v] for v in shared)))
        vals: list = [None] * len(self.q.head)
        depth = len(nodes)

        def rec(j: int, rows) -> Iterator[tuple]:
            pos = out_pos[j]
            for x in rows:
                for p, v in zip(pos, x):
                    vals[p] = v
                if j + 1 == depth:
                    yield tuple(vals)
                else:
                    shared, spos = links[j + 1]
                    nxt = view_of(nodes[j + 1]).select(shared, tuple(vals[p] for p in spos))
                    yield from rec(j + 1, nxt)

        yield from rec(0, first)
