"""Fully dynamic maintenance through lifespans and segment-tree partitions.

Every data tuple carries a lifespan: an insert at time τ opens ``[τ, ∞]``
and a delete at τ truncates it to ``[τ', τ]``. Lifespans are mapped into
the component instances of the multivariate extension by canonical
partitions over a segment tree of capacity N, with an open end read as N.
Each component keeps bag views over its decomposition, rooted at a bag
holding every Z variable, so a fixed split of one leaf bitstring selects
a slice of the component result.

Full enumeration after update τ stabs time τ + 1. Exactly the spans that
are still open contain it, so a tuple deleted at τ is no longer reported.
Delta enumeration uses the point spans ``[τ, τ]`` added in delta mode.

Capacity doubles (with a rebuild) whenever τ + 1 would exceed N. The
engine is rebuilt from the live tuples after every ``max(1, ⌊|D|/2⌋)``
updates, where ``|D|`` is the size at the previous rebuild.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from . import segtree as st
from .insert_only import DeltaHandle, StaleHandle
from .query import Query, QueryError
from .views import InputStore, ViewTree
from .width import MultivariateExtension, multivariate_extension


@dataclass
class _Component:
    label: str
    k: int
    level: dict[str, int]
    views: ViewTree


@dataclass
class Stats:
    doublings: int = 0
    resets: int = 0
    collisions: int = 0


class InsertDeleteEngine:
    def __init__(self, q: Query, mode: str = "full", capacity: int = 1, reset: bool = True,
                 debug: bool = False, ext: MultivariateExtension | None = None):
        if mode not in ("full", "delta"):
            raise ValueError(f"mode must be 'full' or 'delta', not {mode!r}")
        st.log2_exact(capacity)
        self.query = q
        self.mode = mode
        self.ext = ext if ext is not None else multivariate_extension(q)
        self.use_reset = reset
        self.debug = debug
        self.stats = Stats()
        self.clock = 0  # external update counter, used by handles
        self.updates_since_reset = 0
        self.size_at_reset = 0
        self._build_components()
        self._start(capacity)

    # ------------------------------------------------------------- state

    def _start(self, capacity: int) -> None:
        self.n = capacity
        self.tau = 0
        self.open: dict[str, dict[tuple, int]] = {a.relation: {} for a in self.query.atoms}
        self.closed: dict[str, list[tuple[int, int, tuple]]] = {a.relation: [] for a in self.query.atoms}
        self._clear_components()

    def _clear_components(self) -> None:
        self.store.clear()
        for comp in self.components:
            comp.views.clear()

    def _build_components(self) -> None:
        # A relation at level i holds the same split tuples in every
        # component, so all components share one input store.
        self.store = InputStore(counted=True)
        self.components = []
        self.schemas: dict[str, dict[int, tuple]] = {r: {} for r in self.query.relations()}
        for c in self.ext.components:
            level = {r: c.level(r) for r in self.query.relations()}
            views = ViewTree(c.query, c.td, root_prefix=c.zvars, counted_base=True, store=self.store)
            self.components.append(_Component(c.label, len(c.zvars), level, views))
            for r, i in level.items():
                self.schemas[r][i] = views.schemas[r]

    def _apply(self, relation: str, lo: int, hi: int, data: tuple, sign: int) -> None:
        op = self.store.insert if sign > 0 else self.store.delete
        levels = sorted(self.schemas[relation].items())
        for node in st.cp(self.n, lo, hi):
            for i, schema in levels:
                for zs in st.splits(node, i):
                    op(relation, schema, zs + data)

    def _rebuild(self) -> None:
        self._clear_components()
        for rel in self.query.relations():
            for lo, hi, data in self.closed[rel]:
                self._apply(rel, lo, hi, data, +1)
            for data, lo in self.open[rel].items():
                self._apply(rel, lo, self.n, data, +1)

    def _advance(self) -> None:
        self.tau += 1
        if self.tau + 1 > self.n:
            while self.tau + 1 > self.n:
                self.n *= 2
            self.stats.doublings += 1
            self._rebuild()

    def _maybe_reset(self) -> None:
        if not self.use_reset:
            return
        if self.updates_since_reset < max(1, self.size_at_reset // 2):
            return
        live = [(rel, data) for rel in self.query.relations() for data in self.open[rel]]
        self.stats.resets += 1
        # Size the tree for the replay and the updates until the next reset,
        # so no doubling happens in between.
        horizon = len(live) + max(1, len(live) // 2) + 1
        self._start(1 << (horizon - 1).bit_length())
        for rel, data in live:
            self._insert(rel, data)
        self.size_at_reset = len(live)
        self.updates_since_reset = 0

    def live_size(self) -> int:
        return sum(len(v) for v in self.open.values())

    # ----------------------------------------------------------- updates

    def _check(self, relation: str, t: tuple) -> tuple:
        atom = self.query.atom(relation)
        if len(t) != len(atom.schema):
            raise QueryError(f"arity mismatch for {relation}: {t}")
        return tuple(t)

    def _insert(self, relation: str, data: tuple) -> None:
        self._advance()
        if self.debug:
            self._assert_indistinguishable()
        self.open[relation][data] = self.tau
        self._apply(relation, self.tau, self.n, data, +1)
        if self.mode == "delta":
            self.closed[relation].append((self.tau, self.tau, data))
            self._apply(relation, self.tau, self.tau, data, +1)

    def insert(self, relation: str, t: tuple) -> DeltaHandle:
        data = self._check(relation, t)
        if data in self.open[relation]:
            raise QueryError(f"duplicate insert {relation}{data}")
        self._maybe_reset()
        self._insert(relation, data)
        self.updates_since_reset += 1
        self.clock += 1
        return DeltaHandle(self.clock, "+", relation, data, True)

    def delete(self, relation: str, t: tuple) -> DeltaHandle:
        data = self._check(relation, t)
        if data not in self.open[relation]:
            raise QueryError(f"delete of absent tuple {relation}{data}")
        self._maybe_reset()
        self._advance()
        start = self.open[relation].pop(data)
        if self.debug:
            self._assert_truncation_local(start)
        self.closed[relation].append((start, self.tau, data))
        # New span first so nodes shared with the old span never leave the views.
        self._apply(relation, start, self.tau, data, +1)
        self._apply(relation, start, self.n, data, -1)
        if self.mode == "delta":
            self.closed[relation].append((self.tau, self.tau, data))
            self._apply(relation, self.tau, self.tau, data, +1)
        self.updates_since_reset += 1
        self.clock += 1
        return DeltaHandle(self.clock, "-", relation, data, True)

    # ------------------------------------------------------- enumeration

    def _slices(self, point: int, parts: int) -> Iterator[tuple]:
        """Union over components of the results whose Z values split a
        prefix of leaf(point) (``parts = k + 1``) or the whole leaf
        (``parts = k``), projected to the head."""
        seen: set[tuple] = set()
        head_n = len(self.query.head)
        leaf = st.leaf(self.n, point)
        for comp in self.components:
            views = comp.views
            for prefix in _prefixes_along(views.root_trie.root, comp.k, leaf, parts == comp.k):
                for out in views.enumerate(prefix):
                    x = out[-head_n:]
                    if x in seen:
                        self.stats.collisions += 1
                        continue
                    seen.add(x)
                    yield x

    def enumerate_full(self) -> Iterator[tuple]:
        k = len(self.query.atoms)
        return self._slices(self.tau + 1, k + 1)

    def enumerate_delta(self, handle: DeltaHandle) -> Iterator[tuple[str, tuple]]:
        """``(sign, tuple)`` pairs of the change caused by the latest update."""
        if self.mode != "delta":
            raise QueryError("delta enumeration needs an engine in delta mode")
        if handle.clock != self.clock:
            raise StaleHandle(f"handle from update {handle.clock}, engine is at {self.clock}")
        sign = handle.sign
        return ((sign, x) for x in self._slices(self.tau, len(self.query.atoms)))

    # ------------------------------------------------------------ checks

    def timed_database(self) -> dict[str, set[st.TimedTuple]]:
        """The lifespan instance, with open spans left open."""
        out = {}
        for rel in self.query.relations():
            s = {st.TimedTuple(st.Lifespan(lo, hi), d) for lo, hi, d in self.closed[rel]}
            s |= {st.TimedTuple(st.Lifespan(lo), d) for d, lo in self.open[rel].items()}
            out[rel] = s
        return out

    def component_instance(self, idx: int) -> dict[str, set[tuple]]:
        """The tuples currently present in one component's base relations."""
        return {r: set(v) for r, v in self.components[idx].views.base.items()}

    def _assert_truncation_local(self, start: int) -> None:
        # A span meets [start, ∞] exactly when it meets [start, τ] as long as
        # nothing starts after τ, so the truncated tuple keeps its partners.
        for rel in self.query.relations():
            assert all(lo <= self.tau for lo, _, _ in self.closed[rel])
            assert all(lo <= self.tau for lo in self.open[rel].values())

    def _assert_indistinguishable(self) -> None:
        for rel in self.query.relations():
            for lo in self.open[rel].values():
                assert lo < self.tau
            for lo, hi, _ in self.closed[rel]:
                assert hi < self.tau


def _prefixes_along(node: list, k: int, path: st.Bits, exact: bool) -> Iterator[tuple]:
    """Present Z prefixes ``(z1..zk)`` whose concatenation is a prefix of
    ``path`` (equal to it when ``exact``), read from a trie over Z1..Zk."""
    plen, pval = path
    out: list = [None] * k

    def rec(node: list, i: int, used: int) -> Iterator[tuple]:
        if i == k:
            if not exact or used == plen:
                yield tuple(out)
            return
        kids = node[1]
        if not kids:
            return
        room = plen - used
        for z, child in kids.items():
            ln, v = z
            if ln > room or (pval >> (room - ln)) & ((1 << ln) - 1) != v:
                continue
            out[i] = z
            yield from rec(child, i + 1, used + ln)

    return rec(node, 0, 0)
