"""Conjunctive queries, relations, databases and update streams.

A query is a natural join of atoms without self-joins; every variable is
in the head. Constants are opaque strings (or any hashable value when the
engines build derived relations over bitstrings).
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Iterator, Sequence

Value = Hashable


class QueryError(ValueError):
    """Raised for malformed queries, streams or illegal updates."""


@dataclass(frozen=True)
class Atom:
    relation: str
    schema: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.schema)) != len(self.schema):
            raise QueryError(f"repeated variable in atom {self}")

    def __str__(self) -> str:
        return f"{self.relation}({','.join(self.schema)})"


@dataclass(frozen=True)
class Query:
    atoms: tuple[Atom, ...]
    head: tuple[str, ...] = ()
    name: str = "Q"

    def __post_init__(self):
        if not self.atoms:
            raise QueryError("a query needs at least one atom")
        rels = [a.relation for a in self.atoms]
        if len(set(rels)) != len(rels):
            raise QueryError("repeated relation symbol (self-joins are not supported)")
        union: list[str] = []
        for a in self.atoms:
            for v in a.schema:
                if v not in union:
                    union.append(v)
        if not self.head:
            object.__setattr__(self, "head", tuple(union))
        elif set(self.head) != set(union) or len(self.head) != len(union):
            raise QueryError("head must list exactly the variables of the body")

    @property
    def vars(self) -> tuple[str, ...]:
        return self.head

    def atom(self, relation: str) -> Atom:
        for a in self.atoms:
            if a.relation == relation:
                return a
        raise QueryError(f"unknown relation {relation!r}")

    def relations(self) -> tuple[str, ...]:
        return tuple(a.relation for a in self.atoms)

    def edges(self) -> list[frozenset[str]]:
        return [frozenset(a.schema) for a in self.atoms]

    def __str__(self) -> str:
        return " ∧ ".join(str(a) for a in self.atoms)

    def to_text(self) -> str:
        body = ", ".join(str(a) for a in self.atoms)
        return f"{self.name}({','.join(self.head)}) :- {body}."


def atoms_of_variable(q: Query, x: str) -> list[Atom]:
    """at(x): the atoms whose schema contains ``x``."""
    if x not in q.head:
        raise QueryError(f"unknown variable {x!r}")
    return [a for a in q.atoms if x in a.schema]


def restrict(q: Query, y: Iterable[str]) -> Query:
    """Intersect every atom schema with ``y``; atoms may become nullary."""
    ys = set(y)
    unknown = ys - set(q.head)
    if unknown:
        raise QueryError(f"unknown variables {sorted(unknown)}")
    atoms = tuple(Atom(a.relation, tuple(v for v in a.schema if v in ys)) for a in q.atoms)
    head = tuple(v for v in q.head if v in ys)
    return Query(atoms, head, q.name)


# ---------------------------------------------------------------- parsing

_IDENT = r"[A-Za-z][A-Za-z0-9_]*"
_TOKEN = re.compile(rf"\s*(?:({_IDENT})|(:-)|([(),.]))")


def _strip_comments(text: str) -> str:
    return "\n".join(line.split("%", 1)[0] for line in text.splitlines())


def _position(text: str, offset: int) -> str:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return f"line {line}, column {col}"


def _tokens(text: str) -> Iterator[tuple[str, str, int]]:
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            return
        m = _TOKEN.match(text, pos)
        if not m:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise QueryError(f"syntax error at {_position(text, start)}: unexpected {text[start]!r}")
        kind = "ident" if m.group(1) else ("arrow" if m.group(2) else m.group(3))
        yield kind, m.group(m.lastindex), m.end() - len(m.group(m.lastindex))
        pos = m.end()


def parse_query(text: str) -> Query:
    """Parse ``Head(V1,...,Vn) :- Rel1(V...), ... .`` into a :class:`Query`."""
    clean = _strip_comments(text)
    toks = list(_tokens(clean))
    i = 0

    def expect(kind: str) -> tuple[str, str, int]:
        nonlocal i
        if i >= len(toks):
            raise QueryError(f"syntax error: unexpected end of input, expected {kind!r}")
        tok = toks[i]
        if tok[0] != kind:
            raise QueryError(f"syntax error at {_position(clean, tok[2])}: expected {kind!r}, got {tok[1]!r}")
        i += 1
        return tok

    def term() -> tuple[str, tuple[str, ...], int]:
        nonlocal i
        name = expect("ident")
        expect("(")
        args: list[str] = []
        if i < len(toks) and toks[i][0] == "ident":
            args.append(expect("ident")[1])
            while i < len(toks) and toks[i][0] == ",":
                i += 1
                args.append(expect("ident")[1])
        expect(")")
        return name[1], tuple(args), name[2]

    head_name, head_vars, _ = term()
    expect("arrow")
    atoms: list[Atom] = []
    seen: set[str] = set()
    while True:
        rel, args, off = term()
        if rel in seen:
            raise QueryError(f"repeated relation symbol {rel!r} at {_position(clean, off)}")
        if len(set(args)) != len(args):
            raise QueryError(f"repeated variable in atom {rel} at {_position(clean, off)}")
        seen.add(rel)
        atoms.append(Atom(rel, args))
        if i < len(toks) and toks[i][0] == ",":
            i += 1
            continue
        break
    expect(".")
    if i != len(toks):
        raise QueryError(f"syntax error at {_position(clean, toks[i][2])}: trailing input")
    body_vars = {v for a in atoms for v in a.schema}
    if head_vars and set(head_vars) != body_vars:
        raise QueryError("head must list exactly the variables of the body (full queries only)")
    return Query(tuple(atoms), tuple(head_vars) if head_vars else (), head_name)


def query(text: str) -> Query:
    """Shorthand: ``query("R(A,B), S(B,C)")`` builds a query from a body."""
    body = text.strip().rstrip(".")
    return parse_query(f"Q() :- {body}.") if ":-" not in body else parse_query(text)


# ---------------------------------------------------------------- data


@dataclass
class Relation:
    name: str
    schema: tuple[str, ...]
    tuples: set[tuple] = field(default_factory=set)

    def __len__(self) -> int:
        return len(self.tuples)


class Database:
    """One set-semantics relation per atom of a query."""

    def __init__(self, q: Query):
        self.query = q
        self.relations = {a.relation: Relation(a.relation, a.schema) for a in q.atoms}

    def __getitem__(self, rel: str) -> set[tuple]:
        return self.relations[rel].tuples

    def size(self) -> int:
        return sum(len(r) for r in self.relations.values())

    def copy(self) -> "Database":
        d = Database(self.query)
        for name, r in self.relations.items():
            d.relations[name].tuples = set(r.tuples)
        return d

    def live(self) -> list[tuple[str, tuple]]:
        return [(name, t) for name, r in self.relations.items() for t in r.tuples]


@dataclass(frozen=True)
class Update:
    sign: str  # "+" or "-"
    relation: str
    tuple: tuple

    def __post_init__(self):
        if self.sign not in ("+", "-"):
            raise QueryError(f"bad update sign {self.sign!r}")


def apply_update(db: Database, u: Update, strict: bool = False) -> bool:
    """Apply one update in place; returns whether the database changed.

    Re-inserting a present tuple or deleting an absent one is a no-op,
    unless ``strict`` is set, in which case it raises.
    """
    if u.relation not in db.relations:
        raise QueryError(f"unknown relation {u.relation!r}")
    rel = db.relations[u.relation]
    if len(u.tuple) != len(rel.schema):
        raise QueryError(f"arity mismatch for {u.relation}: got {len(u.tuple)}, expected {len(rel.schema)}")
    if u.sign == "+":
        if u.tuple in rel.tuples:
            if strict:
                raise QueryError(f"duplicate insert {u.relation}{u.tuple}")
            return False
        rel.tuples.add(u.tuple)
        return True
    if u.tuple not in rel.tuples:
        if strict:
            raise QueryError(f"delete of absent tuple {u.relation}{u.tuple}")
        return False
    rel.tuples.discard(u.tuple)
    return True


def parse_stream(lines: Iterable[str]) -> list[Update]:
    """Parse a JSON Lines update stream; line ``τ`` holds the update at time τ."""
    out: list[Update] = []
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            out.append(Update(obj["op"], obj["rel"], tuple(str(v) for v in obj["tuple"])))
        except (ValueError, KeyError, TypeError) as exc:
            raise QueryError(f"stream line {n}: {exc}") from exc
    return out


def dump_stream(updates: Sequence[Update]) -> str:
    return "".join(
        json.dumps({"op": u.sign, "rel": u.relation, "tuple": list(u.tuple)}) + "\n" for u in updates
    )
