"""Exact rational simplex for small packing LPs.

Solves ``max c.y  s.t.  A y <= b, y >= 0`` with ``b >= 0`` so the slack
basis is feasible from the start. Bland's rule prevents cycling. The dual
solution is read off the final objective row, which gives the covering LP
``min b.x  s.t.  A^T x >= c, x >= 0`` for free.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


@dataclass(frozen=True)
class LPResult:
    value: Fraction
    primal: tuple[Fraction, ...]
    dual: tuple[Fraction, ...]


class UnboundedLP(ArithmeticError):
    pass


def maximize(c: Sequence, A: Sequence[Sequence], b: Sequence) -> LPResult:
    m, n = len(A), len(c)
    if any(Fraction(v) < 0 for v in b):
        raise ValueError("right-hand side must be non-negative")
    # Tableau rows: [A | I | b]; objective row: [-c | 0 | 0].
    width = n + m + 1
    rows = []
    for i in range(m):
        row = [Fraction(A[i][j]) for j in range(n)] + [Fraction(0)] * m + [Fraction(b[i])]
        row[n + i] = Fraction(1)
        rows.append(row)
    obj = [-Fraction(v) for v in c] + [Fraction(0)] * (m + 1)
    basis = [n + i for i in range(m)]

    while True:
        enter = next((j for j in range(width - 1) if obj[j] < 0), None)
        if enter is None:
            break
        best = None
        for i in range(m):
            a = rows[i][enter]
            if a > 0:
                ratio = rows[i][-1] / a
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            raise UnboundedLP("objective is unbounded")
        r = best[1]
        piv = rows[r][enter]
        rows[r] = [v / piv for v in rows[r]]
        for i in range(m):
            if i != r and rows[i][enter] != 0:
                f = rows[i][enter]
                rows[i] = [a - f * p for a, p in zip(rows[i], rows[r])]
        f = obj[enter]
        obj = [a - f * p for a, p in zip(obj, rows[r])]
        basis[r] = enter

    primal = [Fraction(0)] * n
    for i, var in enumerate(basis):
        if var < n:
            primal[var] = rows[i][-1]
    dual = tuple(obj[n + i] for i in range(m))
    return LPResult(obj[-1], tuple(primal), dual)
