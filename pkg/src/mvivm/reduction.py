"""Static evaluation of intersection joins and of extension components.

Forward direction: the time-extended query over lifespan data is answered
by evaluating every component of the multivariate extension over the
canonical partition of the data and concatenating the Z values.

Backward direction: one component over bitstring data is answered by the
insert-delete engine. The component instance is turned into lifespan data
(its interval version), the lifespans are swept as a stream of inserts and
deletes, each output tuple's appearance and disappearance give one
intersection, and equal-length splits recover the component's Z values.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from . import segtree as st
from .insert_delete import InsertDeleteEngine
from .query import Query, QueryError
from .wcoj import generic_join
from .width import Component, MultivariateExtension, multivariate_extension

TimedDB = Mapping[str, Iterable[st.TimedTuple]]


class ReductionError(QueryError):
    pass


# ------------------------------------------------------------ oracles


def brute_time_join(q: Query, timed: TimedDB, n: int | None = None) -> set[tuple]:
    """``([lo, hi], x)`` for every combination of timed tuples that agrees on
    shared variables and whose spans intersect. Open spans end at ``n``."""
    rels = [list(timed.get(a.relation, ())) for a in q.atoms]
    out = set()
    for combo in itertools.product(*rels):
        asg: dict = {}
        ok = True
        for a, t in zip(q.atoms, combo):
            for v, val in zip(a.schema, t.data):
                if asg.setdefault(v, val) != val:
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        spans = [_closed(t.span, n) for t in combo]
        lo = max(s[0] for s in spans)
        hi = min(s[1] for s in spans)
        if lo <= hi:
            out.add(((lo, hi), tuple(asg[v] for v in q.head)))
    return out


def _closed(span: st.Lifespan, n: int | None) -> tuple[int, int]:
    if span.end is None and n is None:
        raise ReductionError("open lifespan needs a segment-tree size")
    return span.closed(n)


def cp1(n: int, result: Iterable[tuple]) -> set[tuple]:
    """One-way canonical partition of ``([lo, hi], x)`` tuples."""
    return {(b,) + tuple(x) for (lo, hi), x in result for b in st.cp(n, lo, hi)}


def merge_segments(n: int, pieces: Iterable[tuple]) -> set[tuple]:
    """Invert ``cp1``: glue the dyadic pieces of each data tuple back into
    maximal intervals. Touching intervals of one tuple come out merged."""
    by_data: dict[tuple, list[tuple[int, int]]] = {}
    for b, *x in pieces:
        by_data.setdefault(tuple(x), []).append(st.seg(n, b))
    out = set()
    for x, segs in by_data.items():
        segs.sort()
        lo, hi = segs[0]
        for a, b in segs[1:]:
            if a <= hi + 1:
                hi = max(hi, b)
            else:
                out.add(((lo, hi), x))
                lo, hi = a, b
        out.add(((lo, hi), x))
    return out


# ------------------------------------------------------ forward direction


def component_instance(n: int, comp: Component, relations: Sequence[str], timed: TimedDB) -> dict[str, set[tuple]]:
    return st.cp_database(n, comp.perm, relations, timed)


def forward_reduction(q: Query, timed: TimedDB, n: int,
                      ext: MultivariateExtension | None = None) -> set[tuple]:
    """The one-way canonical partition of the intersection join, computed
    as the concatenated union of all component results."""
    ext = ext if ext is not None else multivariate_extension(q)
    k = len(q.atoms)
    rels = q.relations()
    out = set()
    for comp in ext.components:
        inst = component_instance(n, comp, rels, timed)
        for t in generic_join(comp.query, inst):
            out.add(st.g_map(k, t))
    return out


def intersection_join(q: Query, timed: TimedDB, n: int,
                      ext: MultivariateExtension | None = None) -> set[tuple]:
    """``([lo, hi], x)`` results of the intersection join via the forward
    reduction (touching results of one tuple merged)."""
    return merge_segments(n, forward_reduction(q, timed, n, ext))


# ----------------------------------------------------- backward direction


def eval_component_direct(comp: Component, inst: Mapping[str, Iterable[tuple]]) -> set[tuple]:
    """Static evaluation of the component query (head: Z values, then data)."""
    order = [v for b in comp.td.preorder() for v in comp.td.bags[b]]
    order = list(dict.fromkeys(order))
    return generic_join(comp.query, {r: set(inst.get(r, ())) for r in comp.query.relations()}, order)


@dataclass(frozen=True)
class SweepEvent:
    time: int
    kind: str  # "start" or "end"
    relation: str
    data: tuple


def sweep_events(timed: TimedDB) -> list[SweepEvent]:
    """Start and end events of closed lifespans, by time, starts first."""
    events = []
    for rel, tuples in timed.items():
        for t in tuples:
            if t.span.end is None:
                raise ReductionError("sweep needs closed lifespans")
            events.append(SweepEvent(t.span.start, "start", rel, tuple(t.data)))
            events.append(SweepEvent(t.span.end, "end", rel, tuple(t.data)))
    events.sort(key=lambda e: (e.time, e.kind != "start", e.relation, e.data))
    return events


def _encode(comp: Component, inst: Mapping[str, Iterable[tuple]]) -> tuple[dict, list[dict], int]:
    """Re-code every Z column with fixed-length bitstrings.

    Z values are only compared for equality inside the component, so any
    injective code per column keeps the result; returns the coded
    instance, the per-column decoders and the common length.
    """
    k = len(comp.zvars)
    rels = comp.query.relations()
    levels = {r: comp.level(r) for r in rels}
    columns: list[dict] = [{} for _ in range(k)]
    for r in rels:
        for t in inst.get(r, ()):
            for j in range(levels[r]):
                columns[j].setdefault(t[j], len(columns[j]))
    ell = max((len(c) - 1).bit_length() for c in columns) if any(columns) else 0
    coded = {}
    for r in rels:
        i = levels[r]
        coded[r] = {tuple((ell, columns[j][t[j]]) for j in range(i)) + tuple(t[i:]) for t in inst.get(r, ())}
    decoders = [{(ell, code): z for z, code in col.items()} for col in columns]
    return coded, decoders, ell


def eval_component_via_ivm(comp: Component, inst: Mapping[str, Iterable[tuple]], base: Query,
                           ext: MultivariateExtension | None = None) -> set[tuple]:
    """Evaluate the component with the insert-delete engine in delta mode.

    ``base`` is the query the component extends. Each result tuple's
    appearance and disappearance during the sweep give its intersection
    interval; equal-length splits of that interval recover the Z values.
    """
    k = len(comp.zvars)
    rels = base.relations()
    coded, decoders, ell = _encode(comp, inst)
    n, timed = st.interval_version(comp.perm, rels, coded, ell)
    events = sweep_events(timed)
    engine = InsertDeleteEngine(base, "delta", reset=False,
                                ext=ext if ext is not None else multivariate_extension(base))
    opened: dict[tuple, int] = {}
    results: set[tuple] = set()
    for e in events:
        if e.kind == "start":
            h = engine.insert(e.relation, e.data)
        else:
            h = engine.delete(e.relation, e.data)
        for sign, x in engine.enumerate_delta(h):
            if sign == "+":
                if x in opened:
                    raise ReductionError(f"{x} appeared twice without disappearing")
                opened[x] = e.time
            else:
                if x not in opened:
                    raise ReductionError(f"{x} disappeared before appearing")
                results.add(((opened.pop(x), e.time), x))
    if opened:
        raise ReductionError(f"unmatched appearances: {sorted(opened)}")
    out = set()
    for interval, x in results:
        for t in st.h_map(k, n, interval, x):
            out.add(tuple(decoders[j][t[j]] for j in range(k)) + tuple(t[k:]))
    return out


def backward_identity(comp: Component, base: Query, inst: Mapping[str, Iterable[tuple]]) -> tuple[set, set]:
    """Both sides of the backward identity on a bitstring instance with
    equal-length Z values: the component result, and the equal-length
    splits of the intersection join over the interval version (brute force)."""
    k = len(comp.zvars)
    rels = base.relations()
    lengths = {z[0] for r in rels for t in inst.get(r, ()) for z in t[: comp.level(r)]}
    if len(lengths) > 1:
        raise ReductionError(f"Z values of different lengths: {sorted(lengths)}")
    ell = lengths.pop() if lengths else 0
    n, timed = st.interval_version(comp.perm, rels, inst, ell)
    joined = brute_time_join(base, timed)
    right = set()
    for interval, x in joined:
        right |= st.h_map(k, n, interval, x)
    left = eval_component_direct(comp, inst)
    return left, right
