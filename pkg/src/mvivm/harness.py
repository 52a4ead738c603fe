"""Workload generators, a uniform engine runner, timing and verification.

Generated values are strings, so a workload written as JSON Lines and read
back is identical to the generated one.
"""
from __future__ import annotations

import gc
import math
import random
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .baselines import DeltaEngine, NaiveEngine, Step
from .insert_delete import InsertDeleteEngine
from .insert_only import InsertOnlyEngine
from .query import Query, QueryError, Update

KINDS = ("insert_only_random", "insert_delete_random", "fifo", "oumv", "oumv_delta")
ENGINES = ("mvivm", "insert-only", "naive", "delta-base")


@dataclass
class Workload:
    kind: str
    updates: list[Update]
    probes: list[int] = field(default_factory=list)  # 1-based times followed by a probe
    probe: str | None = None  # "full" or "delta"


# ------------------------------------------------------------- generators


class _Live:
    """Live tuples per relation with O(1) uniform sampling and removal."""

    def __init__(self, q: Query):
        self.items: dict[str, list[tuple]] = {a.relation: [] for a in q.atoms}
        self.where: dict[str, dict[tuple, int]] = {a.relation: {} for a in q.atoms}
        self.order: list[tuple[str, tuple]] = []

    def __contains__(self, key: tuple[str, tuple]) -> bool:
        return key[1] in self.where[key[0]]

    def __len__(self) -> int:
        return sum(len(v) for v in self.items.values())

    def add(self, rel: str, t: tuple) -> None:
        self.where[rel][t] = len(self.items[rel])
        self.items[rel].append(t)
        self.order.append((rel, t))

    def remove(self, rel: str, t: tuple) -> None:
        items, where = self.items[rel], self.where[rel]
        i = where.pop(t)
        last = items.pop()
        if i < len(items):
            items[i] = last
            where[last] = i

    def sample(self, rng: random.Random) -> tuple[str, tuple]:
        total = len(self)
        r = rng.randrange(total)
        for rel, items in self.items.items():
            if r < len(items):
                return rel, items[r]
            r -= len(items)
        raise AssertionError("unreachable")


def _domain(q: Query, per_relation: float) -> int:
    return max(2, max(math.ceil(max(per_relation, 1) ** (1 / len(a.schema))) for a in q.atoms if a.schema))


def _fresh_tuple(rng: random.Random, arity: int, d: int, live: _Live, rel: str) -> tuple:
    while True:
        t = tuple(str(rng.randrange(d)) for _ in range(arity))
        if (rel, t) not in live:
            return t


def gen_stream(kind: str, q: Query, n: int, seed: int = 0, domain: int | None = None) -> Workload:
    """A legal update stream of about ``n`` updates (``n`` is the matrix
    dimension for the OuMv kinds). Deterministic for a given seed."""
    rng = random.Random(seed)
    if kind not in KINDS:
        raise QueryError(f"unknown workload {kind!r}; expected one of {', '.join(KINDS)}")
    if kind in ("oumv", "oumv_delta"):
        return _oumv(q, n, rng, delta=(kind == "oumv_delta"))
    k = len(q.atoms)
    atoms = [a for a in q.atoms]
    live = _Live(q)
    out: list[Update] = []
    if kind == "insert_only_random":
        d = domain or _domain(q, 2 * n / k)
        counts = [n // k + (1 if i < n % k else 0) for i in range(k)]
        picks = [a for a, c in zip(atoms, counts) for _ in range(c)]
        rng.shuffle(picks)
        for a in picks:
            if len(live.items[a.relation]) >= d ** len(a.schema):
                continue  # relation is full
            t = _fresh_tuple(rng, len(a.schema), d, live, a.relation)
            live.add(a.relation, t)
            out.append(Update("+", a.relation, t))
        return Workload(kind, out)
    if kind == "insert_delete_random":
        d = domain or _domain(q, n / k)
        for _ in range(n):
            if len(live) and rng.random() < 1 / 3:
                rel, t = live.sample(rng)
                live.remove(rel, t)
                out.append(Update("-", rel, t))
                continue
            a = rng.choice(atoms)
            if len(live.items[a.relation]) >= d ** len(a.schema):
                continue
            t = _fresh_tuple(rng, len(a.schema), d, live, a.relation)
            live.add(a.relation, t)
            out.append(Update("+", a.relation, t))
        return Workload(kind, out)
    # fifo: fill a window, then delete the oldest tuple before each insert
    window = max(1, n // 4)
    d = domain or _domain(q, 2 * window / k + 1)
    queue: deque = deque()
    while len(out) < n:
        if len(queue) >= window:
            rel, t = queue.popleft()
            live.remove(rel, t)
            out.append(Update("-", rel, t))
            continue
        a = rng.choice(atoms)
        t = _fresh_tuple(rng, len(a.schema), d, live, a.relation)
        live.add(a.relation, t)
        queue.append((a.relation, t))
        out.append(Update("+", a.relation, t))
    return Workload(kind, out)


def oumv_roles(q: Query) -> tuple[str, str]:
    """Variables ``(A, B)`` with atoms holding A only, B only, and both."""
    for x in q.head:
        for y in q.head:
            if x == y:
                continue
            ax = {a.relation for a in q.atoms if x in a.schema}
            ay = {a.relation for a in q.atoms if y in a.schema}
            if ax - ay and ay - ax and ax & ay:
                return x, y
    raise QueryError("the OuMv workload needs a non-hierarchical query")


def _oumv(q: Query, n: int, rng: random.Random, delta: bool) -> Workload:
    x, y = oumv_roles(q)
    out: list[Update] = []
    probes: list[int] = []

    def tup(a, i=None, j=None):
        return tuple(f"a{i}" if v == x else f"b{j}" if v == y else "0" for v in a.schema)

    rows = [a for a in q.atoms if x in a.schema and y not in a.schema]
    cols = [a for a in q.atoms if y in a.schema and x not in a.schema]
    both = [a for a in q.atoms if x in a.schema and y in a.schema]
    rest = [a for a in q.atoms if x not in a.schema and y not in a.schema]
    for a in rest:
        out.append(Update("+", a.relation, tup(a)))
    for i in range(n):
        for j in range(n):
            if rng.random() < 0.5:
                for a in both:
                    out.append(Update("+", a.relation, tup(a, i, j)))
    prev: list[Update] = []
    for _ in range(n):
        for u in prev:
            out.append(Update("-", u.relation, u.tuple))
        prev = []
        for i in range(n):
            if rng.random() < 0.5:
                prev += [Update("+", a.relation, tup(a, i=i)) for a in rows]
        for j in range(n):
            if rng.random() < 0.5:
                prev += [Update("+", a.relation, tup(a, j=j)) for a in cols]
        for u in prev:
            out.append(u)
            if delta:
                probes.append(len(out))
        if not delta:
            probes.append(len(out))
    return Workload("oumv_delta" if delta else "oumv", out, probes, "delta" if delta else "full")


# ----------------------------------------------------------------- runner


class Runner:
    """One engine behind a common interface.

    ``apply`` rejects a duplicate insert or a delete of an absent tuple,
    or skips it when ``lenient`` is set (returning False).
    """

    def __init__(self, engine: str, q: Query, mode: str = "full", lenient: bool = False):
        if engine not in ENGINES:
            raise QueryError(f"unknown engine {engine!r}; expected one of {', '.join(ENGINES)}")
        self.kind = engine
        self.query = q
        self.mode = mode
        self.lenient = lenient
        self.skipped = 0
        self.live = {a.relation: set() for a in q.atoms}
        self._handle = None
        self._delta: set = set()
        self._prev: set = set()
        if engine == "mvivm":
            self.engine = InsertDeleteEngine(q, mode)
        elif engine == "insert-only":
            self.engine = InsertOnlyEngine(q, mode)
        elif engine == "naive":
            self.engine = NaiveEngine(q)
        else:
            self.engine = DeltaEngine(q)

    def apply(self, u: Update) -> bool:
        live = self.live.get(u.relation)
        if live is None:
            raise QueryError(f"unknown relation {u.relation!r}")
        present = u.tuple in live
        if (u.sign == "+") == present:
            what = "duplicate insert" if present else "delete of absent tuple"
            if self.lenient:
                self.skipped += 1
                return False
            raise QueryError(f"{what} {u.relation}{u.tuple}")
        (live.add if u.sign == "+" else live.discard)(u.tuple)
        e = self.engine
        if self.kind in ("mvivm", "insert-only"):
            self._handle = e.insert(u.relation, u.tuple) if u.sign == "+" else e.delete(u.relation, u.tuple)
        elif self.kind == "naive":
            (e.insert if u.sign == "+" else e.delete)(u.relation, u.tuple)
            cur = e.result()
            self._delta = {("+", t) for t in cur - self._prev} | {("-", t) for t in self._prev - cur}
            self._prev = cur
        else:
            res = e.insert(u.relation, u.tuple) if u.sign == "+" else e.delete(u.relation, u.tuple)
            self._delta = {(u.sign, t) for t in res}
        return True

    def full(self) -> set[tuple]:
        if self.kind in ("mvivm", "insert-only"):
            return set(self.engine.enumerate_full())
        if self.kind == "naive":
            return set(self._prev)
        return self.engine.result()

    def delta(self) -> set[tuple[str, tuple]]:
        if self.kind == "mvivm":
            return set(self.engine.enumerate_delta(self._handle))
        if self.kind == "insert-only":
            return {("+", t) for t in self.engine.enumerate_delta(self._handle)}
        return set(self._delta)

    def probe(self, how: str) -> bool:
        """Whether the full result (or the last delta) is non-empty."""
        if self.kind in ("mvivm", "insert-only"):
            it = self.engine.enumerate_full() if how == "full" else self.engine.enumerate_delta(self._handle)
            return next(iter(it), None) is not None
        return bool(self.full() if how == "full" else self.delta())


def transcript(runner: Runner, updates: Iterable[Update], deltas: bool = True) -> list[Step]:
    out = []
    for u in updates:
        runner.apply(u)
        out.append(Step(frozenset(runner.full()), frozenset(runner.delta()) if deltas else frozenset()))
    return out


# ---------------------------------------------------------------- measure


@dataclass
class BenchRow:
    query: str
    engine: str
    kind: str
    n: int
    seed: int
    updates: int
    total_ms: float
    final_size: int
    max_size: int


@dataclass
class BenchReport:
    rows: list[BenchRow]
    slope: float
    r2: float


def fit_slope(ns: Sequence[float], totals: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of log(total) against log(n), with R²."""
    if len(ns) < 2:
        return float("nan"), float("nan")
    x, y = np.log(np.asarray(ns, float)), np.log(np.asarray(totals, float))
    slope, icept = np.polyfit(x, y, 1)
    resid = y - (slope * x + icept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot else 1.0
    return float(slope), r2


def _timed_run(engine: str, q: Query, w: Workload, mode: str) -> tuple[float, int, int]:
    runner = Runner(engine, q, mode)
    probes = set(w.probes)
    size = peak = 0
    # like timeit: no cyclic collections inside the timed region
    gc.collect()
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        t0 = time.perf_counter()
        for tau, u in enumerate(w.updates, 1):
            runner.apply(u)
            size += 1 if u.sign == "+" else -1
            peak = max(peak, size)
            if tau in probes:
                runner.probe(w.probe)
        elapsed = time.perf_counter() - t0
    finally:
        if was_enabled:
            gc.enable()
    return elapsed * 1000.0, size, peak


def measure(engine: str, q: Query, sizes: Sequence[int], kind: str, seed: int = 0,
            repeats: int = 1, mode: str = "full") -> BenchReport:
    """Total processing time per size (best of ``repeats``) and the log-log
    slope over all sizes. One untimed warm-up run at the smallest size
    comes first."""
    warm = gen_stream(kind, q, min(sizes), seed)
    _timed_run(engine, q, warm, mode)
    rows = []
    for n in sizes:
        w = gen_stream(kind, q, n, seed)
        best = None
        for _ in range(max(1, repeats)):
            ms, final, peak = _timed_run(engine, q, w, mode)
            best = ms if best is None else min(best, ms)
        rows.append(BenchRow(q.name, engine, kind, n, seed, len(w.updates), best, final, peak))
    slope, r2 = fit_slope([r.n for r in rows], [r.total_ms for r in rows])
    return BenchReport(rows, slope, r2)


# ----------------------------------------------------------------- verify


@dataclass
class Divergence:
    engine: str
    tau: int
    part: str  # "full" or "delta"
    expected: frozenset
    got: frozenset


@dataclass
class VerifyReport:
    ok: bool
    steps: int
    engines: list[str]
    divergences: list[Divergence]
    collisions: int = 0  # duplicate witnesses suppressed by the insert-delete engine

    def summary(self) -> str:
        if self.ok:
            return (f"ok: {self.steps} updates, engines {', '.join(self.engines)} agree with naive "
                    f"recomputation; {self.collisions} duplicate witnesses suppressed")
        lines = [f"FAILED after checking {self.steps} updates; {self.collisions} duplicate witnesses suppressed"]
        for d in self.divergences:
            missing = sorted(d.expected - d.got, key=repr)[:5]
            extra = sorted(d.got - d.expected, key=repr)[:5]
            lines.append(f"  {d.engine}: first divergence at tau={d.tau} ({d.part}); missing {missing}, extra {extra}")
        return "\n".join(lines)


def first_divergence(reference: Sequence[Step], other: Sequence[Step], deltas: bool = True):
    """``(tau, part, expected, got)`` of the first mismatch, or None."""
    for tau, (a, b) in enumerate(zip(reference, other), 1):
        if a.full != b.full:
            return tau, "full", a.full, b.full
        if deltas and a.delta != b.delta:
            return tau, "delta", a.delta, b.delta
    if len(reference) != len(other):
        return min(len(reference), len(other)) + 1, "length", frozenset(), frozenset()
    return None


def verify(q: Query, updates: Sequence[Update], engines: Sequence[str] | None = None) -> VerifyReport:
    """Run every applicable engine in delta mode and compare full and delta
    results with naive recomputation after every update."""
    updates = list(updates)
    reference = transcript(Runner("naive", q), updates)
    if engines is None:
        engines = ["delta-base", "mvivm"]
        if all(u.sign == "+" for u in updates):
            engines.append("insert-only")
    divs = []
    collisions = 0
    for name in engines:
        runner = Runner(name, q, mode="delta")
        got = transcript(runner, updates)
        if name == "mvivm":
            collisions = runner.engine.stats.collisions
        d = first_divergence(reference, got)
        if d is not None:
            divs.append(Divergence(name, *d))
    return VerifyReport(not divs, len(updates), list(engines), divs, collisions)

