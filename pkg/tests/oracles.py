"""Independent reference computations used only by the tests."""
import itertools
from fractions import Fraction


def solve(matrix, rhs):
    """Gaussian elimination over Fractions; None when singular."""
    n = len(matrix)
    m = [list(map(Fraction, row)) + [Fraction(b)] for row, b in zip(matrix, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            return None
        m[col], m[piv] = m[piv], m[col]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col] / m[col][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[col])]
    return [m[i][n] / m[i][i] for i in range(n)]


def rho_star_vertices(edges):
    """min sum(x) s.t. every vertex is covered, x >= 0, by enumerating the
    basic solutions of the covering polytope."""
    edges = [frozenset(e) for e in edges]
    verts = sorted({v for e in edges for v in e})
    if not verts:
        return Fraction(0)
    k = len(edges)
    # constraint rows: covering (one per vertex) then x_i >= 0
    rows = [[1 if v in e else 0 for e in edges] for v in verts]
    rows += [[1 if j == i else 0 for j in range(k)] for i in range(k)]
    rhs = [1] * len(verts) + [0] * k
    best = None
    for pick in itertools.combinations(range(len(rows)), k):
        x = solve([rows[i] for i in pick], [rhs[i] for i in pick])
        if x is None:
            continue
        if all(xi >= 0 for xi in x) and all(sum(r[j] * x[j] for j in range(k)) >= 1 for r in rows[: len(verts)]):
            val = sum(x)
            best = val if best is None else min(best, val)
    return best


def fhtw_by_orders(q):
    """Minimum over all elimination orders of the largest bag rho*."""
    best = None
    for order in itertools.permutations(q.head):
        edges = [set(a.schema) for a in q.atoms]
        worst = Fraction(0)
        for x in order:
            touching = [e for e in edges if x in e]
            bag = set().union(*touching) if touching else {x}
            worst = max(worst, rho_star_vertices([frozenset(a.schema) & bag for a in q.atoms if set(a.schema) & bag]))
            edges = [e for e in edges if x not in e] + [bag - {x}]
        best = worst if best is None else min(best, worst)
    return best


def dyadic_pieces(n, lo, hi):
    """Maximal dyadic blocks of [lo, hi] as (depth, index), by scanning all nodes."""
    depth = n.bit_length() - 1
    inside = set()
    for d in range(depth + 1):
        w = n >> d
        for i in range(1 << d):
            if lo <= i * w + 1 and (i + 1) * w <= hi:
                inside.add((d, i))
    return {(d, i) for d, i in inside if d == 0 or (d - 1, i >> 1) not in inside}
