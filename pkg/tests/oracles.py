"""Slow, independent reference implementations used to check the package.

Nothing here imports the elimination code under test: determinants are
Leibniz sums, ranks come from minors, and searches are plain loops.
"""

from __future__ import annotations

import itertools
from fractions import Fraction


def perm_sign(perm) -> int:
    sign, seen = 1, set()
    for i in range(len(perm)):
        if i in seen:
            continue
        j, length = i, 0
        while j not in seen:
            seen.add(j)
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def det_leibniz(rows, zero=0):
    """Determinant as the signed sum over permutations (any commutative ring)."""
    n = len(rows)
    if n == 0:
        return 1
    total = zero
    for perm in itertools.permutations(range(n)):
        prod = 1
        for i, j in enumerate(perm):
            prod = prod * rows[i][j]
            if prod == 0:
                break
        else:
            total = total + perm_sign(perm) * prod
    return total


def rank_by_minors(rows, p: int | None = None) -> int:
    """Largest k with a nonzero k x k minor (mod p when p is given)."""
    nr = len(rows)
    nc = len(rows[0]) if nr else 0
    best = 0
    for k in range(1, min(nr, nc) + 1):
        found = False
        for R in itertools.combinations(range(nr), k):
            for C in itertools.combinations(range(nc), k):
                d = det_leibniz([[rows[i][j] for j in C] for i in R])
                if (d % p if p else d) != 0:
                    found = True
                    break
            if found:
                break
        if not found:
            return best
        best = k
    return best


def rank_mod_p_simple(rows, p: int) -> int:
    """Textbook row reduction on Python ints, written independently of the package."""
    M = [[x % p for x in row] for row in rows]
    rank, ncols = 0, len(M[0]) if M else 0
    for c in range(ncols):
        piv = next((i for i in range(rank, len(M)) if M[i][c]), None)
        if piv is None:
            continue
        M[rank], M[piv] = M[piv], M[rank]
        inv = pow(M[rank][c], p - 2, p)
        M[rank] = [x * inv % p for x in M[rank]]
        for i in range(len(M)):
            if i != rank and M[i][c]:
                f = M[i][c]
                M[i] = [(x - f * y) % p for x, y in zip(M[i], M[rank])]
        rank += 1
    return rank


def rank_fraction_simple(rows) -> int:
    M = [[Fraction(x) for x in row] for row in rows]
    rank, ncols = 0, len(M[0]) if M else 0
    for c in range(ncols):
        piv = next((i for i in range(rank, len(M)) if M[i][c]), None)
        if piv is None:
            continue
        M[rank], M[piv] = M[piv], M[rank]
        for i in range(len(M)):
            if i != rank and M[i][c]:
                f = M[i][c] / M[rank][c]
                M[i] = [x - f * y for x, y in zip(M[i], M[rank])]
        rank += 1
    return rank


def eval_affine_grid(A, sigma, p: int | None = None):
    """Evaluate a symbolic matrix entry by entry from its JSON form."""
    out = []
    for row in A.to_json()["entries"]:
        vals = []
        for e in row:
            x = e["const"] + sum(c * sigma[v] for v, c in e["terms"].items())
            vals.append(x % p if p else x)
        out.append(vals)
    return out


def solvable_by_loops(s, p: int) -> bool:
    """Try every assignment of a QuadraticSystem over GF(p)."""
    names = list(s.variables)
    for values in itertools.product(range(p), repeat=len(names)):
        val = dict(zip(names, values))
        ok = True
        for e in s.equations:
            if e.kind == "ADD":
                ok = val[e.c] == (val[e.a] + val[e.b]) % p
            elif e.kind == "MUL":
                ok = val[e.c] == val[e.a] * val[e.b] % p
            elif e.kind == "COPY":
                ok = val[e.c] == val[e.a]
            else:
                ok = val[e.c] == e.K % p
            if not ok:
                break
        if ok:
            return True
    return False


def formula_solvable(f, p: int) -> bool:
    """Try every assignment of a PolyFormula over GF(p)."""
    names = list(f.variables)

    def ev(poly, val):
        tot = 0
        for mono, c in poly.items():
            term = c
            for v, e in mono:
                term *= val[v] ** e
            tot += term
        return tot % p

    for values in itertools.product(range(p), repeat=len(names)):
        val = dict(zip(names, values))
        if all(ev(l, val) == ev(r, val) for l, r in f.equations):
            return True
    return False


def outer3(u, v, w, p):
    return [[[a * b * c % p for c in w] for b in v] for a in u]


def flat3(T):
    return tuple(x for plane in T for row in plane for x in row)


def has_zero_eigen_by_loops(forms, n: int, p: int) -> bool:
    for x in itertools.product(range(p), repeat=n):
        if not any(x):
            continue
        if all(sum(c * x[i] * x[j] for (i, j), c in form.items()) % p == 0 for form in forms):
            return True
    return False
