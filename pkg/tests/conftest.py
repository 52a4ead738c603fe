import random

import pytest

from mvivm import query
from mvivm.query import Update

QUERIES = {
    "tri": "R(A,B), S(B,C), T(A,C)",
    "3p": "R(A,B), S(B,C), T(C,D)",
    "lw4": "R(A,B,C), S(B,C,D), T(C,D,A), U(D,A,B)",
    "2tri": "R(A,B), S(B,C), T(A,C), U(B,D), V(C,D)",
    "h": "R(A,B), S(A,C)",
    "nh": "R(A), S(A,B), T(B)",
}

# eight updates on the triangle query, with the result and change after each
TRACE = [
    Update("+", "R", ("a1", "b1")),
    Update("+", "S", ("b1", "c1")),
    Update("+", "T", ("a1", "c1")),
    Update("+", "S", ("b2", "c1")),
    Update("-", "S", ("b1", "c1")),
    Update("-", "S", ("b2", "c1")),
    Update("-", "T", ("a1", "c1")),
    Update("-", "R", ("a1", "b1")),
]
ABC = ("a1", "b1", "c1")
TRACE_FULL = [set(), set(), {ABC}, {ABC}, set(), set(), set(), set()]
TRACE_DELTA = [set(), set(), {("+", ABC)}, set(), {("-", ABC)}, set(), set(), set()]


@pytest.fixture
def tri():
    return query(QUERIES["tri"])


def q_of(name):
    return query(QUERIES[name])


def random_stream(q, length, rng, domain=3, p_delete=0.35, inserts_only=False):
    """A legal stream over a small domain, so joins and re-inserts are common.

    Stops early when every relation is full and no delete is allowed.
    """
    live = {a.relation: set() for a in q.atoms}
    room = {a.relation: domain ** len(a.schema) for a in q.atoms}
    out = []
    while len(out) < length:
        open_atoms = [a for a in q.atoms if len(live[a.relation]) < room[a.relation]]
        present = [(r, t) for r, ts in live.items() for t in ts]
        if present and not inserts_only and rng.random() < p_delete:
            r, t = rng.choice(sorted(present))
            live[r].discard(t)
            out.append(Update("-", r, t))
            continue
        if not open_atoms:
            if inserts_only or not present:
                break
            continue
        a = rng.choice(open_atoms)
        t = tuple(str(rng.randrange(domain)) for _ in a.schema)
        if t in live[a.relation]:
            continue
        live[a.relation].add(t)
        out.append(Update("+", a.relation, t))
    return out


@pytest.fixture
def rng():
    return random.Random(1234)
