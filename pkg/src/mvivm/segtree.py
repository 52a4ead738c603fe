"""Segment trees over [1, N], canonical partitions and interval versions.

Nodes are bitstrings: the root is the empty string, and ``b0`` and ``b1``
are the children of ``b``. A bitstring is stored as ``(length, bits)``
so that the empty string and ``"0"`` differ. Intervals are closed pairs
``(lo, hi)`` of integers.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Iterable, Iterator, Sequence

Bits = tuple  # (length, packed value)
EMPTY: Bits = (0, 0)
OPEN = None  # end of a lifespan that has not been closed


class SegTreeError(ValueError):
    pass


def bits(s: str) -> Bits:
    """Parse ``"010"`` (or ``""``/``"ε"`` for the root) into a bitstring."""
    s = "" if s in ("ε", "eps") else s
    if any(c not in "01" for c in s):
        raise SegTreeError(f"not a bitstring: {s!r}")
    return (len(s), int(s, 2) if s else 0)


def bstr(b: Bits) -> str:
    n, v = b
    return format(v, f"0{n}b") if n else "ε"


def concat(*parts: Bits) -> Bits:
    n, v = 0, 0
    for ln, pv in parts:
        n, v = n + ln, (v << ln) | pv
    return (n, v)


def is_prefix(a: Bits, b: Bits) -> bool:
    return a[0] <= b[0] and (b[1] >> (b[0] - a[0])) == a[1]


def log2_exact(n: int) -> int:
    if n < 1 or n & (n - 1):
        raise SegTreeError(f"N must be a power of two, got {n}")
    return n.bit_length() - 1


def seg(n: int, b: Bits) -> tuple[int, int]:
    """The dyadic interval of node ``b`` in the tree over [1, n]."""
    depth = log2_exact(n)
    ln, v = b
    if ln > depth:
        raise SegTreeError(f"bitstring {bstr(b)} is longer than log2({n})")
    width = 1 << (depth - ln)
    return (v * width + 1, (v + 1) * width)


def cp(n: int, lo: int, hi: int) -> list[Bits]:
    """Canonical partition: the maximal nodes whose intervals lie in [lo, hi].

    Returned left to right.
    """
    depth = log2_exact(n)
    if not (1 <= lo <= hi <= n):
        raise SegTreeError(f"interval [{lo},{hi}] is not inside [1,{n}]")
    out: list[Bits] = []

    def walk(ln: int, v: int, a: int, b: int) -> None:
        if lo <= a and b <= hi:
            out.append((ln, v))
            return
        mid = (a + b) // 2
        if lo <= mid:
            walk(ln + 1, 2 * v, a, mid)
        if hi > mid:
            walk(ln + 1, 2 * v + 1, mid + 1, b)

    walk(0, 0, 1, n)
    return out


def cp_brute(n: int, lo: int, hi: int) -> set[Bits]:
    """Oracle: scan every node and keep the maximal ones inside [lo, hi]."""
    depth = log2_exact(n)
    inside = set()
    for ln in range(depth + 1):
        for v in range(1 << ln):
            a, b = seg(n, (ln, v))
            if lo <= a and b <= hi:
                inside.add((ln, v))
    return {(ln, v) for ln, v in inside if ln == 0 or (ln - 1, v >> 1) not in inside}


def stab(n: int, x: int) -> list[Bits]:
    """Root-to-leaf path of the nodes whose intervals contain ``x``."""
    depth = log2_exact(n)
    if not 1 <= x <= n:
        raise SegTreeError(f"{x} is not inside [1,{n}]")
    leaf = x - 1
    return [(ln, leaf >> (depth - ln)) for ln in range(depth + 1)]


def leaf(n: int, x: int) -> Bits:
    return stab(n, x)[-1]


def splits(b: Bits, parts: int) -> Iterator[tuple[Bits, ...]]:
    """All ``(z1..z_parts)`` with ``z1 ∘ … ∘ z_parts = b``; empty parts allowed.

    There are ``C(len(b) + parts - 1, parts - 1)`` of them.
    """
    ln, v = b
    for cuts in itertools.combinations_with_replacement(range(ln + 1), parts - 1):
        bounds = (0,) + cuts + (ln,)
        yield tuple(
            (bounds[i + 1] - bounds[i], (v >> (ln - bounds[i + 1])) & ((1 << (bounds[i + 1] - bounds[i])) - 1))
            for i in range(parts)
        )


def split_count(length: int, parts: int) -> int:
    return comb(length + parts - 1, parts - 1)


# ------------------------------------------------------- timed relations


@dataclass(frozen=True)
class Lifespan:
    start: int
    end: int | None = OPEN

    def __post_init__(self):
        if self.start < 1 or (self.end is not None and self.end < self.start):
            raise SegTreeError(f"bad lifespan [{self.start},{self.end}]")

    def closed(self, n: int) -> tuple[int, int]:
        """The span as a closed interval, with an open end read as ``n``."""
        return (self.start, n if self.end is None else self.end)


@dataclass(frozen=True)
class TimedTuple:
    span: Lifespan
    data: tuple


def cp_tuple(n: int, i: int, t: TimedTuple) -> set[tuple]:
    """All ``(z1, …, zi) + data`` with ``z1 ∘ … ∘ zi`` in the partition of the span."""
    lo, hi = t.span.closed(n)
    return {zs + tuple(t.data) for c in cp(n, lo, hi) for zs in splits(c, i)}


def cp_relation(n: int, i: int, rel: Iterable[TimedTuple]) -> set[tuple]:
    out: set[tuple] = set()
    for t in rel:
        out |= cp_tuple(n, i, t)
    return out


def cp_database(n: int, perm: Sequence[int], relations: Sequence[str],
                timed: dict[str, Iterable[TimedTuple]]) -> dict[str, set[tuple]]:
    """Component instance: relation ``perm[i-1]`` (1-based) gets i-way splits."""
    level = {relations[p - 1]: i + 1 for i, p in enumerate(perm)}
    return {r: cp_relation(n, level[r], timed.get(r, ())) for r in relations}


def g_map(k: int, t: tuple) -> tuple:
    """Concatenate the first ``k`` bitstring fields."""
    return (concat(*t[:k]),) + tuple(t[k:])


def h_map(k: int, n: int, interval: tuple[int, int], data: tuple) -> set[tuple]:
    """Equal-length k-way splits of the partition nodes of ``interval``."""
    out = set()
    for c in cp(n, *interval):
        ln, v = c
        if ln % k:
            continue
        w = ln // k
        parts = tuple((w, (v >> (ln - (j + 1) * w)) & ((1 << w) - 1)) for j in range(k))
        out.add(parts + tuple(data))
    return out


def interval_version(perm: Sequence[int], relations: Sequence[str], inst: dict[str, set[tuple]],
                     ell: int) -> tuple[int, dict[str, set[TimedTuple]]]:
    """Replace each tuple's bitstring prefix by the interval it names.

    Every bitstring field must have length ``ell``; the tree has
    ``N = 2**(k*ell)`` leaves.
    """
    k = len(relations)
    n = 1 << (k * ell)
    level = {relations[p - 1]: i + 1 for i, p in enumerate(perm)}
    out: dict[str, set[TimedTuple]] = {}
    for r in relations:
        i = level[r]
        rel = set()
        for t in inst.get(r, ()):
            zs = t[:i]
            if any(z[0] != ell for z in zs):
                raise SegTreeError(f"bitstring length mismatch in {r}{t}; expected {ell}")
            lo, hi = seg(n, concat(*zs))
            rel.add(TimedTuple(Lifespan(lo, hi), tuple(t[i:])))
        out[r] = rel
    return n, out


def pad(b: Bits, ell: int) -> Bits:
    """Right-pad with zeros to length ``ell``."""
    ln, v = b
    if ln > ell:
        raise SegTreeError(f"{bstr(b)} is longer than {ell}")
    return (ell, v << (ell - ln))


def chain_witnesses(n: int, intervals: Sequence[tuple[int, int]]) -> set[tuple[tuple[int, ...], tuple[Bits, ...]]]:
    """All ``(perm, (b1..bk))`` such that ``b1 ∘ … ∘ bj`` is a partition
    node of interval ``perm[j-1]`` for every j (0-based interval indices).

    The intervals intersect exactly when this set is non-empty, and the
    concatenations ``b1 ∘ … ∘ bk`` partition the intersection.
    """
    parts = [cp(n, lo, hi) for lo, hi in intervals]
    k = len(intervals)
    out = set()

    def rec(perm: tuple[int, ...], prefix: Bits, chosen: tuple[Bits, ...]) -> None:
        if len(perm) == k:
            out.add((perm, chosen))
            return
        for i in range(k):
            if i in perm:
                continue
            for c in parts[i]:
                if is_prefix(prefix, c):
                    rest = (c[0] - prefix[0], c[1] & ((1 << (c[0] - prefix[0])) - 1))
                    rec(perm + (i,), c, chosen + (rest,))

    rec((), EMPTY, ())
    return out
