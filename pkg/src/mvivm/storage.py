"""In-memory relations with hash-trie and hash-group indices.

A trie index for a variable order maps every value prefix to its child
values and to the number of tuples extending it, so point lookups, prefix
counts and child enumeration are all constant time. A group index maps a
key (the values of a fixed variable subset) to the tuples carrying it,
which gives constant-delay selection.
"""
from __future__ import annotations

from functools import lru_cache
from operator import itemgetter
from typing import Iterable, Iterator, Sequence


class StorageError(ValueError):
    pass


@lru_cache(maxsize=None)
def _positions(schema: tuple, vars_: tuple) -> tuple[int, ...]:
    try:
        return tuple(schema.index(v) for v in vars_)
    except ValueError:
        raise StorageError(f"{vars_} is not a subset of {schema}") from None


@lru_cache(maxsize=None)
def key_function(pos: tuple[int, ...]):
    """A function mapping a tuple to the tuple of its values at ``pos``."""
    if len(pos) == 1:
        p = pos[0]
        return lambda t: (t[p],)
    if not pos:
        return lambda t: ()
    return itemgetter(*pos)


@lru_cache(maxsize=None)
def _permutation(schema: tuple, order: tuple) -> tuple[int, ...]:
    if sorted(order) != sorted(schema) or len(set(order)) != len(order):
        raise StorageError(f"order {order} is not a permutation of {schema}")
    return _positions(schema, order)


class TrieIndex:
    """Nested hash trie. A node is ``[count, children]`` where ``count`` is
    the number of tuples below it and ``children`` maps the next value to
    its node (``None`` at the leaves).

    With ``split >= 2`` the first ``split`` variables of the order form a
    single level keyed by their value tuple, which is cheaper when they are
    always looked up together.
    """

    __slots__ = ("order", "perm", "root", "split", "head", "inner", "last")

    def __init__(self, schema: Sequence[str], order: Sequence[str], split: int = 0):
        self.order = tuple(order)
        self.perm = _permutation(tuple(schema), self.order)
        self.split = split if split >= 2 else 0
        self.head = itemgetter(*self.perm[: self.split]) if self.split else None
        tail = self.perm[self.split:]
        self.inner = tail[:-1]
        self.last = tail[-1] if tail else None
        depth = len(tail) + (1 if self.split else 0)
        self.root: list = [0, {} if depth else None]

    def clear(self) -> None:
        self.root = [0, {} if self.root[1] is not None else None]

    def _keys(self, t: tuple) -> list:
        keys = [self.head(t)] if self.head is not None else []
        keys += [t[p] for p in self.inner]
        if self.last is not None:
            keys.append(t[self.last])
        return keys

    def add(self, t: tuple) -> None:
        node = self.root
        node[0] += 1
        if self.head is not None:
            v = self.head(t)
            kids = node[1]
            nxt = kids.get(v)
            if nxt is None:
                nxt = kids[v] = [0, {} if self.last is not None else None]
            nxt[0] += 1
            node = nxt
        for p in self.inner:
            v = t[p]
            kids = node[1]
            nxt = kids.get(v)
            if nxt is None:
                nxt = kids[v] = [0, {}]
            nxt[0] += 1
            node = nxt
        if self.last is not None:
            kids = node[1]
            v = t[self.last]
            nxt = kids.get(v)
            if nxt is None:
                kids[v] = [1, None]
            else:
                nxt[0] += 1

    def remove(self, t: tuple) -> None:
        node = self.root
        node[0] -= 1
        for v in self._keys(t):
            kids = node[1]
            nxt = kids[v]
            nxt[0] -= 1
            if not nxt[0]:
                del kids[v]
                return
            node = nxt

    def find(self, prefix: Sequence) -> list | None:
        """The node under ``prefix`` (values along ``order``), or None."""
        if self.split and prefix:
            if len(prefix) < self.split:
                raise StorageError(f"prefix shorter than the hashed head of {self.order}")
            prefix = [tuple(prefix[: self.split])] + list(prefix[self.split:])
        node = self.root
        for v in prefix:
            kids = node[1]
            if not kids:
                return None
            node = kids.get(v)
            if node is None:
                return None
        return node


class IndexedRelation:
    """A set of tuples over ``schema`` with any number of indices."""

    def __init__(self, schema: Sequence[str], orders: Iterable[Sequence[str]] = (), name: str = ""):
        self.name = name
        self.schema = tuple(schema)
        self.tuples: dict[tuple, None] = {}
        self.tries: dict[tuple, TrieIndex] = {}
        self.groups: dict[tuple, tuple[tuple[int, ...], dict]] = {}
        for o in orders:
            self.ensure_order(o)

    def __len__(self) -> int:
        return len(self.tuples)

    def __contains__(self, t: tuple) -> bool:
        return t in self.tuples

    def __iter__(self) -> Iterator[tuple]:
        return iter(self.tuples)

    def ensure_order(self, order: Sequence[str], split: int = 0) -> TrieIndex:
        """Trie in ``order``; ``split`` leading variables may share one level."""
        key = (tuple(order), split if split >= 2 else 0)
        idx = self.tries.get(key)
        if idx is None:
            idx = TrieIndex(self.schema, key[0], key[1])
            for t in self.tuples:
                idx.add(t)
            self.tries[key] = idx
        return idx

    def ensure_group(self, vars_: Sequence[str]) -> dict:
        vars_ = tuple(vars_)
        g = self.groups.get(vars_)
        if g is None:
            key = key_function(_positions(self.schema, vars_))
            table: dict[tuple, dict] = {}
            for t in self.tuples:
                table.setdefault(key(t), {})[t] = None
            g = (key, table)
            self.groups[vars_] = g
        return g[1]

    def clear(self) -> None:
        if not self.tuples:
            return
        self.tuples.clear()
        for idx in self.tries.values():
            idx.clear()
        for _, table in self.groups.values():
            table.clear()

    def insert(self, t: tuple) -> bool:
        if len(t) != len(self.schema):
            raise StorageError(f"arity mismatch: {t} for schema {self.schema}")
        if t in self.tuples:
            return False
        self.tuples[t] = None
        for idx in self.tries.values():
            idx.add(t)
        for keyfn, table in self.groups.values():
            key = keyfn(t)
            bucket = table.get(key)
            if bucket is None:
                table[key] = {t: None}
            else:
                bucket[t] = None
        return True

    def delete(self, t: tuple) -> bool:
        if len(t) != len(self.schema):
            raise StorageError(f"arity mismatch: {t} for schema {self.schema}")
        if t not in self.tuples:
            return False
        del self.tuples[t]
        for idx in self.tries.values():
            idx.remove(t)
        for keyfn, table in self.groups.values():
            key = keyfn(t)
            bucket = table[key]
            del bucket[t]
            if not bucket:
                del table[key]
        return True

    def select_count(self, order: Sequence[str], prefix: tuple) -> int:
        """Number of tuples whose values along ``order`` start with ``prefix``."""
        try:
            idx = self.tries[(tuple(order), 0)]
        except KeyError:
            raise StorageError(f"no index in order {tuple(order)}") from None
        node = idx.find(prefix)
        return node[0] if node is not None else 0

    def iter_children(self, order: Sequence[str], prefix: tuple) -> Iterator:
        """Distinct values of the next variable of ``order`` below ``prefix``."""
        idx = self.tries.get((tuple(order), 0))
        if idx is None:
            raise StorageError(f"no index in order {tuple(order)}")
        node = idx.find(prefix)
        return iter(list(node[1] or ())) if node is not None else iter(())

    def select(self, vars_: Sequence[str], key: tuple) -> Iterator[tuple]:
        """Tuples whose values on ``vars_`` equal ``key`` (group index required)."""
        g = self.groups.get(tuple(vars_))
        if g is None:
            raise StorageError(f"no group index on {tuple(vars_)}")
        return iter(g[1].get(tuple(key), ()))


class Projection:
    """pi_vars of a source relation, maintained with support counts."""

    __slots__ = ("pos", "key", "counts", "rel", "subscribers")

    def __init__(self, src_schema: Sequence[str], vars_: Sequence[str], name: str = ""):
        self.pos = _positions(tuple(src_schema), tuple(vars_))
        self.key = key_function(self.pos)
        self.counts: dict[tuple, int] = {}
        self.rel = IndexedRelation(vars_, name=name)
        self.subscribers: list = []

    def add(self, t: tuple):
        """Count ``t``; return its projection if it just became present."""
        key = self.key(t)
        c = self.counts.get(key, 0)
        self.counts[key] = c + 1
        if c == 0:
            self.rel.insert(key)
            return key
        return None

    def clear(self) -> None:
        if self.counts:
            self.counts.clear()
            self.rel.clear()

    def remove(self, t: tuple):
        """Uncount ``t``; return its projection if it just vanished."""
        key = self.key(t)
        c = self.counts[key] - 1
        if c:
            self.counts[key] = c
            return None
        del self.counts[key]
        self.rel.delete(key)
        return key
