"""Width measures and query extensions.

* fractional edge cover number via an exact rational LP
* GYO acyclicity and the hierarchical property
* fractional hypertree width by exhaustive search over variable
  elimination orders (memoised on the set of remaining variables)
* the time extension (one interval variable per atom) and the
  multivariate extension (one component per atom permutation, atom
  ``sigma_i`` extended by ``Z1..Zi``) with Z-prefix-closed decompositions
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

from .lp import maximize
from .query import Atom, Query, QueryError, restrict

MAX_LP_VARS = 16
MAX_LP_ATOMS = 12
MAX_EXTENSION_ATOMS = 5


class WidthBudgetError(QueryError):
    """The query is too large for exact width computation."""


# ------------------------------------------------------------ edge covers


@dataclass(frozen=True)
class FractionalEdgeCover:
    weights: dict[str, Fraction]
    objective: Fraction

    def covers(self, q: Query) -> bool:
        return all(
            sum((self.weights[a.relation] for a in q.atoms if v in a.schema), Fraction(0)) >= 1
            for v in q.head
        )


def _check_budget(q: Query) -> None:
    if len(q.head) > MAX_LP_VARS or len(q.atoms) > MAX_LP_ATOMS:
        raise WidthBudgetError(
            f"query has {len(q.head)} variables and {len(q.atoms)} atoms; "
            f"limit is {MAX_LP_VARS} and {MAX_LP_ATOMS}"
        )


def rho_star(q: Query) -> tuple[Fraction, FractionalEdgeCover]:
    """Minimum total weight of a fractional edge cover of ``q``."""
    _check_budget(q)
    vars_ = list(q.head)
    if not vars_:
        return Fraction(0), FractionalEdgeCover({a.relation: Fraction(0) for a in q.atoms}, Fraction(0))
    # Packing LP over variables; its dual is the covering LP over atoms.
    A = [[1 if v in a.schema else 0 for v in vars_] for a in q.atoms]
    res = maximize([1] * len(vars_), A, [1] * len(q.atoms))
    weights = {a.relation: res.dual[i] for i, a in enumerate(q.atoms)}
    cover = FractionalEdgeCover(weights, res.value)
    assert cover.covers(q) and sum(weights.values()) == res.value
    return res.value, cover


@lru_cache(maxsize=None)
def _rho_of_edges(edges: frozenset) -> Fraction:
    """rho* of a hypergraph given as a set of variable sets."""
    vars_ = sorted({v for e in edges for v in e})
    if not vars_:
        return Fraction(0)
    es = sorted(edges, key=sorted)
    A = [[1 if v in e else 0 for v in vars_] for e in es]
    return maximize([1] * len(vars_), A, [1] * len(es)).value


def _maximal(edges: Iterable[frozenset]) -> frozenset:
    es = {e for e in edges if e}
    return frozenset(e for e in es if not any(e < f for f in es))


def rho_star_value(q: Query, bag: Iterable[str] | None = None) -> Fraction:
    """rho* of ``q`` (restricted to ``bag`` when given); cached on structure."""
    b = set(q.head) if bag is None else set(bag)
    return _rho_of_edges(_maximal(frozenset(a.schema) & b for a in q.atoms))


# ----------------------------------------------------- acyclicity, hierarchy


def gyo(q: Query) -> tuple[bool, list[str]]:
    """GYO reduction; returns (acyclic, trace of elimination steps)."""
    edges = [(a.relation, set(a.schema)) for a in q.atoms]
    trace: list[str] = []
    changed = True
    while changed and edges:
        changed = False
        for v in sorted({v for _, e in edges for v in e}):
            holders = [name for name, e in edges if v in e]
            if len(holders) == 1:
                next(e for name, e in edges if name == holders[0]).discard(v)
                trace.append(f"drop leaf variable {v} from {holders[0]}")
                changed = True
        for i, (name, e) in enumerate(edges):
            other = next((n2 for j, (n2, e2) in enumerate(edges) if j != i and e <= e2), None)
            if other is not None or not e:
                trace.append(f"remove {name}" + (f" (contained in {other})" if other else " (empty)"))
                del edges[i]
                changed = True
                break
    return not edges, trace


def is_acyclic(q: Query) -> bool:
    return gyo(q)[0]


def is_hierarchical(q: Query) -> bool:
    at = {v: {a.relation for a in q.atoms if v in a.schema} for v in q.head}
    for x, y in itertools.combinations(q.head, 2):
        ax, ay = at[x], at[y]
        if not (ax <= ay or ay <= ax or not (ax & ay)):
            return False
    return True


# ---------------------------------------------------- tree decompositions


@dataclass
class TreeDecomposition:
    bags: list[tuple[str, ...]]
    parent: list[int | None]
    root: int
    width: Fraction = Fraction(0)
    covers: list[FractionalEdgeCover] = field(default_factory=list)
    order: tuple[str, ...] = ()

    def children(self, node: int) -> list[int]:
        return [i for i, p in enumerate(self.parent) if p == node]

    def neighbours(self, node: int) -> list[int]:
        out = self.children(node)
        if self.parent[node] is not None:
            out.append(self.parent[node])
        return out

    def preorder(self) -> list[int]:
        out, stack = [], [self.root]
        while stack:
            n = stack.pop()
            out.append(n)
            stack.extend(reversed(self.children(n)))
        return out

    def reroot(self, new_root: int) -> "TreeDecomposition":
        adj = {i: set() for i in range(len(self.bags))}
        for i, p in enumerate(self.parent):
            if p is not None:
                adj[i].add(p)
                adj[p].add(i)
        parent: list[int | None] = [None] * len(self.bags)
        seen, stack = {new_root}, [new_root]
        while stack:
            n = stack.pop()
            for m in sorted(adj[n]):
                if m not in seen:
                    seen.add(m)
                    parent[m] = n
                    stack.append(m)
        return TreeDecomposition(list(self.bags), parent, new_root, self.width, list(self.covers), self.order)

    def validate(self, q: Query) -> None:
        """Raise AssertionError unless this is a tree decomposition of ``q``."""
        for a in q.atoms:
            assert any(set(a.schema) <= set(b) for b in self.bags), f"{a} not covered"
        for v in q.head:
            nodes = {i for i, b in enumerate(self.bags) if v in b}
            assert nodes, f"{v} in no bag"
            # connected iff exactly one node of the set has its parent outside it
            tops = [i for i in nodes if self.parent[i] not in nodes]
            assert len(tops) == 1, f"bags holding {v} are not connected"


class _Eliminator:
    """Exhaustive, memoised search over variable elimination orders."""

    def __init__(self, q: Query, rank: Sequence[str], zvars: Sequence[str] = ()):
        _check_budget(q)
        self.q = q
        self.vars = list(rank)
        self.idx = {v: i for i, v in enumerate(self.vars)}
        self.edges = [sum(1 << self.idx[v] for v in a.schema) for a in q.atoms]
        self.full = (1 << len(self.vars)) - 1
        self.zbits = [1 << self.idx[z] for z in zvars]
        self.cost_cache: dict[int, Fraction] = {}
        self.memo: dict[int, Fraction] = {}

    def bag(self, x: int, remaining: int) -> int:
        elim = self.full & ~remaining
        result, frontier, visited = 1 << x, 1 << x, 0
        while frontier:
            visited |= frontier
            new = 0
            for e in self.edges:
                if e & frontier:
                    new |= e
            result |= new
            frontier = new & elim & ~visited
        return result & remaining

    def cost(self, bag: int) -> Fraction:
        c = self.cost_cache.get(bag)
        if c is None:
            names = [v for i, v in enumerate(self.vars) if bag >> i & 1]
            c = rho_star_value(self.q, names)
            self.cost_cache[bag] = c
        return c

    def allowed(self, x: int, remaining: int) -> bool:
        bit = 1 << x
        if bit in self.zbits:
            # Z variables leave in decreasing index order, which keeps every
            # bag and every intermediate edge prefix-closed.
            pos = self.zbits.index(bit)
            return not any(remaining & zb for zb in self.zbits[pos + 1:])
        return True

    def best(self, remaining: int) -> Fraction:
        if remaining == 0:
            return Fraction(0)
        got = self.memo.get(remaining)
        if got is not None:
            return got
        incumbent: Fraction | None = None
        for x in range(len(self.vars)):
            if not (remaining >> x & 1) or not self.allowed(x, remaining):
                continue
            c = self.cost(self.bag(x, remaining))
            if incumbent is not None and c >= incumbent:
                continue
            v = max(c, self.best(remaining & ~(1 << x)))
            if incumbent is None or v < incumbent:
                incumbent = v
        self.memo[remaining] = incumbent
        return incumbent

    def optimal_order(self) -> tuple[Fraction, list[str], list[int]]:
        width = self.best(self.full)
        remaining, order, bags = self.full, [], []
        while remaining:
            for x in range(len(self.vars)):
                if not (remaining >> x & 1) or not self.allowed(x, remaining):
                    continue
                b = self.bag(x, remaining)
                if max(self.cost(b), self.best(remaining & ~(1 << x))) <= width:
                    order.append(self.vars[x])
                    bags.append(b)
                    remaining &= ~(1 << x)
                    break
        return width, order, bags

    def names(self, mask: int) -> tuple[str, ...]:
        return tuple(v for v in self.q.head if mask >> self.idx[v] & 1)


def _td_from_order(el: _Eliminator, order: list[str], masks: list[int]) -> tuple[list[int], list[int | None]]:
    pos = {v: i for i, v in enumerate(order)}
    parent: list[int | None] = []
    for i, (x, m) in enumerate(zip(order, masks)):
        later = [pos[v] for v in el.names(m) if v != x]
        parent.append(min(later) if later else None)
    # Join the elimination forest into one tree (empty separators).
    roots = [i for i, p in enumerate(parent) if p is None]
    for r in roots[:-1]:
        parent[r] = roots[-1]
    bags = list(masks)
    # Contract bags contained in a neighbour.
    alive = set(range(len(bags)))
    changed = True
    while changed:
        changed = False
        for i in sorted(alive):
            nbrs = [j for j in alive if parent[j] == i] + ([parent[i]] if parent[i] is not None else [])
            host = next((j for j in nbrs if bags[i] & ~bags[j] == 0), None)
            if host is None:
                continue
            for j in alive:
                if parent[j] == i and j != host:
                    parent[j] = host
            if parent[i] != host:  # host is a child: it takes i's place
                parent[host] = parent[i]
            alive.discard(i)
            changed = True
            break
    keep = sorted(alive)
    remap = {old: new for new, old in enumerate(keep)}
    return [bags[i] for i in keep], [None if parent[i] is None else remap[parent[i]] for i in keep]


def _decompose(q: Query, rank: Sequence[str], zvars: Sequence[str] = ()) -> TreeDecomposition:
    el = _Eliminator(q, rank, zvars)
    width, order, masks = el.optimal_order()
    bag_masks, parent = _td_from_order(el, order, masks)
    bags = [el.names(m) for m in bag_masks]
    root = next(i for i, p in enumerate(parent) if p is None)
    covers = [rho_star(restrict(q, b))[1] for b in bags]
    td = TreeDecomposition(bags, parent, root, width, covers, tuple(order))
    td.validate(q)
    return td


def fhtw(q: Query) -> tuple[Fraction, TreeDecomposition]:
    """Fractional hypertree width with a decomposition from an optimal order.

    Ties between optimal orders are broken by the lexicographically
    smallest order over the head variable order.
    """
    td = _decompose(q, q.head)
    return td.width, td


# --------------------------------------------------------------- extensions


def _fresh(base: Iterable[str], stem: str) -> str:
    used = set(base)
    prefix = ""
    while any(f"{prefix}{stem}{i}" in used for i in ("", *range(1, 10))):
        prefix += "_"
    return prefix + stem


@dataclass(frozen=True)
class TimeExtension:
    base: Query
    extended: Query
    interval_var: str


def time_extension(q: Query) -> TimeExtension:
    z = _fresh(q.head, "Z")
    atoms = tuple(Atom(a.relation, (z,) + a.schema) for a in q.atoms)
    return TimeExtension(q, Query(atoms, (z,) + q.head, q.name + "_time"), z)


@dataclass
class Component:
    perm: tuple[int, ...]  # perm[i] = 1-based atom index placed at position i+1
    query: Query
    zvars: tuple[str, ...]
    td: TreeDecomposition  # rooted at a bag holding every Z variable

    @property
    def label(self) -> str:
        return "".join(str(i) for i in self.perm)

    @property
    def width(self) -> Fraction:
        return self.td.width

    def level(self, relation: str) -> int:
        """Number of Z variables carried by ``relation`` in this component."""
        k = self.query.relations().index(relation) + 1
        return self.perm.index(k) + 1


@dataclass
class MultivariateExtension:
    base: Query
    components: list[Component]
    zvars: tuple[str, ...]

    @property
    def w_hat(self) -> Fraction:
        return max(c.width for c in self.components)


def component_query(q: Query, perm: Sequence[int], zvars: Sequence[str]) -> Query:
    """Atom ``perm[i-1]`` gets ``Z1..Zi``; atoms keep their original order."""
    level = {p: i + 1 for i, p in enumerate(perm)}
    atoms = tuple(
        Atom(a.relation, tuple(zvars[: level[j + 1]]) + a.schema) for j, a in enumerate(q.atoms)
    )
    return Query(atoms, tuple(zvars) + q.head, f"{q.name}_{''.join(map(str, perm))}")


def _component(q: Query, perm: tuple[int, ...], zvars: tuple[str, ...]) -> Component:
    cq = component_query(q, perm, zvars)
    td = _decompose(cq, tuple(q.head) + tuple(zvars), zvars)
    root = next(i for i, b in enumerate(td.bags) if set(zvars) <= set(b))
    return Component(perm, cq, zvars, td.reroot(root))


@lru_cache(maxsize=64)
def multivariate_extension(q: Query) -> MultivariateExtension:
    k = len(q.atoms)
    if k > MAX_EXTENSION_ATOMS:
        raise WidthBudgetError(f"{k} atoms exceed the multivariate budget of {MAX_EXTENSION_ATOMS}")
    stem = _fresh(q.head, "Z")
    zvars = tuple(f"{stem}{i}" for i in range(1, k + 1))
    comps = [_component(q, perm, zvars) for perm in itertools.permutations(range(1, k + 1))]
    return MultivariateExtension(q, comps, zvars)


def w_hat(q: Query) -> Fraction:
    return multivariate_extension(q).w_hat


def is_prefix_closed(bag: Iterable[str], zvars: Sequence[str]) -> bool:
    b = set(bag)
    flags = [z in b for z in zvars]
    return all(flags[i - 1] or not flags[i] for i in range(1, len(flags)))
