import random

import pytest
from hypothesis import given, settings, strategies as st

from mvivm import multivariate_extension, w_hat
from mvivm import segtree as sg
from mvivm.baselines import naive_maintain
from mvivm.insert_delete import InsertDeleteEngine
from mvivm.insert_only import StaleHandle
from mvivm.query import QueryError, Update, query
from mvivm.reduction import intersection_join

from conftest import ABC, TRACE, TRACE_DELTA, TRACE_FULL, q_of, random_stream


def apply(e, u):
    return e.insert(u.relation, u.tuple) if u.sign == "+" else e.delete(u.relation, u.tuple)


def T(lo, hi, *data):
    return sg.TimedTuple(sg.Lifespan(lo, hi), data)


LIFESPANS = {
    "R": {T(1, 8, "a1", "b1")},
    "S": {T(2, 5, "b1", "c1"), T(4, 6, "b2", "c1")},
    "T": {T(3, 7, "a1", "c1")},
}


def test_trace_full_and_delta(tri):
    full, delta = InsertDeleteEngine(tri), InsertDeleteEngine(tri, "delta")
    for u, ef, ed in zip(TRACE, TRACE_FULL, TRACE_DELTA):
        apply(full, u)
        h = apply(delta, u)
        assert set(full.enumerate_full()) == ef
        assert set(delta.enumerate_full()) == ef
        assert set(delta.enumerate_delta(h)) == ed


def test_trace_builds_lifespans(tri):
    e = InsertDeleteEngine(tri, capacity=8, reset=False)
    apply(e, TRACE[0])
    assert e.timed_database()["R"] == {sg.TimedTuple(sg.Lifespan(1), ("a1", "b1"))}
    for u in TRACE[1:]:
        apply(e, u)
    assert e.timed_database() == LIFESPANS
    assert intersection_join(tri, e.timed_database(), 8) == {((3, 5), ABC)}


def split_set(n, lo, hi, data):
    return {zs + data for b in sg.cp(n, lo, hi) for zs in sg.splits(b, 2)}


def test_component_123_contents(tri):
    e = InsertDeleteEngine(tri, capacity=8, reset=False)
    idx = next(i for i, c in enumerate(e.components) if c.label == "123")
    for u in TRACE[:2]:
        apply(e, u)
    assert e.component_instance(idx)["S"] == split_set(8, 2, 8, ("b1", "c1"))
    for u in TRACE[2:5]:
        apply(e, u)
    s = e.component_instance(idx)["S"]
    assert {t for t in s if t[2:] == ("b1", "c1")} == split_set(8, 2, 5, ("b1", "c1"))


def closed_view(e):
    return {r: {sg.TimedTuple(sg.Lifespan(*t.span.closed(e.n)), t.data) for t in ts}
            for r, ts in e.timed_database().items()}


@pytest.mark.parametrize("mode", ["full", "delta"])
def test_cp_invariant(mode, rng):
    q = q_of("tri")
    rels = q.relations()
    for _ in range(4):
        e = InsertDeleteEngine(q, mode, reset=False)
        for u in random_stream(q, 25, rng):
            apply(e, u)
            timed = closed_view(e)
            for i, c in enumerate(e.ext.components):
                assert e.component_instance(i) == sg.cp_database(e.n, c.perm, rels, timed)


def test_components():
    assert len(InsertDeleteEngine(q_of("tri")).components) == 6
    assert len(InsertDeleteEngine(query("R(A,B)")).components) == 1
    ext = multivariate_extension(q_of("3p"))
    assert len(ext.components) == 6
    assert max(c.width for c in ext.components) == w_hat(q_of("3p")) == 1.5


def test_empty_engine(tri):
    e = InsertDeleteEngine(tri)
    assert list(e.enumerate_full()) == []
    assert e.live_size() == 0


def test_first_insert(tri):
    e = InsertDeleteEngine(tri)
    e.insert("R", ("a", "b"))
    assert e.tau == 1 and e.live_size() == 1


def test_delete_right_after_insert(tri):
    e = InsertDeleteEngine(tri, capacity=8, reset=False)
    e.insert("R", ("a", "b"))
    e.delete("R", ("a", "b"))
    assert e.timed_database()["R"] == {T(1, 2, "a", "b")}


def test_errors(tri):
    e = InsertDeleteEngine(tri, "delta")
    h = e.insert("R", ("a", "b"))
    with pytest.raises(QueryError):
        e.insert("R", ("a", "b"))
    with pytest.raises(QueryError):
        e.delete("S", ("x", "y"))
    with pytest.raises(QueryError):
        e.insert("R", ("a",))
    e.insert("S", ("b", "c"))
    with pytest.raises(StaleHandle):
        e.enumerate_delta(h)
    f = InsertDeleteEngine(tri)
    with pytest.raises(QueryError):
        f.enumerate_delta(f.insert("R", ("a", "b")))


def transcript(e, stream):
    out = []
    for u in stream:
        h = apply(e, u)
        d = frozenset(e.enumerate_delta(h)) if e.mode == "delta" else frozenset()
        out.append((frozenset(e.enumerate_full()), d))
    return out


def test_doubling_preserves_transcripts(rng):
    q = q_of("tri")
    stream = random_stream(q, 60, rng)
    grow = InsertDeleteEngine(q, "delta", reset=False)
    fixed = InsertDeleteEngine(q, "delta", capacity=1024, reset=False)
    assert transcript(grow, stream) == transcript(fixed, stream)
    assert grow.stats.doublings >= 6 and fixed.stats.doublings == 0


def test_reset_after_half_the_size(tri):
    e = InsertDeleteEngine(tri)
    for i in range(4):
        e.insert("R", (str(i), "x"))
    resets = e.stats.resets
    e.size_at_reset, e.updates_since_reset = 4, 0
    e.insert("S", ("x", "1"))
    e.insert("S", ("x", "2"))
    assert e.stats.resets == resets
    e.insert("S", ("x", "3"))
    assert e.stats.resets == resets + 1
    assert e.size_at_reset == 6


def test_inserts_then_deletes_reset_often(tri):
    e = InsertDeleteEngine(tri)
    n = 64
    items = [("R", (str(i), str(i))) for i in range(n)]
    for r, t in items:
        e.insert(r, t)
    for r, t in items:
        e.delete(r, t)
    assert e.stats.resets >= n.bit_length()
    assert e.live_size() == 0
    assert list(e.enumerate_full()) == []


def test_debug_checks_hold(rng):
    q = q_of("tri")
    for mode in ("full", "delta"):
        e = InsertDeleteEngine(q, mode, debug=True)
        for u in random_stream(q, 80, rng):
            apply(e, u)


def reference(q, stream):
    return [(s.full, s.delta) for s in naive_maintain(q, stream)]


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["tri", "3p", "2tri", "h", "nh"]), st.integers(0, 10**6))
def test_matches_naive(name, seed):
    q = q_of(name)
    r = random.Random(seed)
    stream = random_stream(q, 5 if name == "2tri" else 18, r)
    ref = reference(q, stream)
    got = transcript(InsertDeleteEngine(q, "delta"), stream)
    assert got == ref
    assert [f for f, _ in transcript(InsertDeleteEngine(q), stream)] == [f for f, _ in ref]


def test_lw4_matches_naive(rng):
    q = q_of("lw4")
    for _ in range(3):
        stream = random_stream(q, 8, rng, domain=2)
        assert transcript(InsertDeleteEngine(q, "delta"), stream) == reference(q, stream)


def test_reinsert_after_delete(tri):
    stream = TRACE[:3] + [Update("-", "S", ("b1", "c1")), Update("+", "S", ("b1", "c1"))]
    e = InsertDeleteEngine(tri, "delta")
    got = transcript(e, stream)
    assert got[-1] == (frozenset({ABC}), frozenset({("+", ABC)}))
