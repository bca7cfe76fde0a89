"""The 3m x 3m symbolic matrix of a normalized quadratic system, and its minrank.

Every equation contributes a 3x3 diagonal block whose determinant is the
equation's defect; a variable ``u`` occurring several times is tied together by
off-diagonal entries ``u - u~j`` with fresh copy variables ``u~j``.  Over a
field, the system is solvable exactly when some assignment drops the matrix to
rank 2m.

Positions are 0-based in code and files; reports print them 1-based.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import AssumptionError, BudgetExceeded, MalformedInput
from .fields import ConcreteMatrix, FieldSpec, determinant, matrix_rank
from .syslang import (
    ASSUMPTIONS,
    DEFAULT_BUDGET,
    Equation,
    QuadraticSystem,
    check_assumptions,
    solve_bruteforce,
)

COPY_SEP = "~"


@dataclass(frozen=True)
class AffineExpr:
    """constant + sum(coeff * var); zero coefficients are never stored."""

    const: Any = 0
    terms: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        if any(c == 0 for _, c in self.terms):
            raise ValueError("zero coefficient stored in AffineExpr")

    @classmethod
    def var(cls, name: str, coeff: int = 1) -> AffineExpr:
        return cls(0, ((name, coeff),))

    @classmethod
    def of(cls, x: Any) -> AffineExpr:
        """An int constant or a variable name."""
        return cls.var(x) if isinstance(x, str) else cls(x)

    def __add__(self, other: AffineExpr) -> AffineExpr:
        coeffs = dict(self.terms)
        for v, c in other.terms:
            coeffs[v] = coeffs.get(v, 0) + c
        return AffineExpr(self.const + other.const, tuple((v, c) for v, c in coeffs.items() if c))

    def __neg__(self) -> AffineExpr:
        return AffineExpr(-self.const, tuple((v, -c) for v, c in self.terms))

    def __sub__(self, other: AffineExpr) -> AffineExpr:
        return self + (-other)

    def __bool__(self):
        return bool(self.const) or bool(self.terms)

    def coeff(self, var: str) -> int:
        return dict(self.terms).get(var, 0)

    def evaluate(self, sigma: Mapping[str, Any], F: FieldSpec):
        acc = F.elem(self.const)
        for v, c in self.terms:
            acc = F.add(acc, F.mul(F.elem(c), sigma[v]))
        return acc

    def __str__(self):
        parts = [] if not self.const and self.terms else [str(self.const)]
        for v, c in self.terms:
            parts.append(v if c == 1 else f"-{v}" if c == -1 else f"{c}*{v}")
        return " + ".join(parts).replace("+ -", "- ")

    def to_json(self) -> dict:
        return {"const": self.const, "terms": dict(self.terms)}

    @classmethod
    def from_json(cls, obj: Any) -> AffineExpr:
        try:
            const, terms = obj["const"], obj["terms"]
        except (KeyError, TypeError) as exc:
            raise MalformedInput(f"bad affine entry {obj!r}") from exc
        if not isinstance(const, int) or not isinstance(terms, dict):
            raise MalformedInput(f"bad affine entry {obj!r}")
        if any(not isinstance(c, int) or c == 0 for c in terms.values()):
            raise MalformedInput(f"bad coefficient in {obj!r}")
        return cls(const, tuple(terms.items()))


ZERO = AffineExpr()
ONE = AffineExpr(1)


@dataclass(frozen=True)
class SymbolicMatrix:
    m: int
    entries: tuple[tuple[AffineExpr, ...], ...]
    variables: tuple[str, ...]  # originals first, then copies
    originals: tuple[str, ...]
    R: Mapping[str, tuple[int, ...]]
    C: Mapping[str, tuple[int, ...]]
    copies: Mapping[str, tuple[str, int]] = field(default_factory=dict)  # copy name -> (u, j), j 1-based

    @property
    def dim(self) -> int:
        return 3 * self.m

    @property
    def n(self) -> int:
        return len(self.variables)

    def __getitem__(self, ij: tuple[int, int]) -> AffineExpr:
        i, j = ij
        return self.entries[i][j]

    def copy_name(self, u: str, j: int) -> str:
        return f"{u}{COPY_SEP}{j}"

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "dim": self.dim,
            "variables": list(self.variables),
            "originals": list(self.originals),
            "copies": {k: [u, j] for k, (u, j) in self.copies.items()},
            "R": {u: list(r) for u, r in self.R.items()},
            "C": {u: list(c) for u, c in self.C.items()},
            "entries": [[e.to_json() for e in row] for row in self.entries],
        }

    @classmethod
    def from_json(cls, obj: Any) -> SymbolicMatrix:
        try:
            m = obj["m"]
            entries = tuple(tuple(AffineExpr.from_json(e) for e in row) for row in obj["entries"])
            A = cls(
                m,
                entries,
                tuple(obj["variables"]),
                tuple(obj["originals"]),
                {u: tuple(r) for u, r in obj["R"].items()},
                {u: tuple(c) for u, c in obj["C"].items()},
                {k: (u, j) for k, (u, j) in obj["copies"].items()},
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedInput(f"bad symbolic matrix: {exc}") from exc
        if len(entries) != 3 * m or any(len(row) != 3 * m for row in entries):
            raise MalformedInput("symbolic matrix is not 3m x 3m")
        known = set(A.variables)
        if any(v not in known for row in entries for e in row for v, _ in e.terms):
            raise MalformedInput("entry uses a variable missing from the variable list")
        return A

    def render(self) -> str:
        cells = [[str(e) for e in row] for row in self.entries]
        w = max((len(c) for row in cells for c in row), default=1)
        return "\n".join(" ".join(c.rjust(w) for c in row) for row in cells)


def build_block(e: Equation) -> list[list[AffineExpr]]:
    """3x3 block whose determinant is the defect of ``e``.

    ADD(c,a,b) -> [1 0 a; 0 1 b; 1 1 c]; MUL(c,a,b) -> [1 0 c; 0 1 a; -1 b 0];
    COPY is ADD with b = 0 and CONST is ADD with b = 0, a = K.
    """
    X = AffineExpr.of
    if e.kind == "MUL":
        return [[ONE, ZERO, X(e.c)], [ZERO, ONE, X(e.a)], [AffineExpr(-1), X(e.b), ZERO]]
    a = X(e.K) if e.kind == "CONST" else X(e.a)
    b = X(e.b) if e.kind == "ADD" else ZERO
    return [[ONE, ZERO, a], [ZERO, ONE, b], [ONE, ONE, X(e.c)]]


def build_matrix(s: QuadraticSystem, require: Sequence[str] = ASSUMPTIONS) -> SymbolicMatrix:
    """Assemble the symbolic matrix of a system satisfying A1-A3.

    ``require=STRUCTURAL`` builds from a system that only meets A1 and A3.  The
    grid is then still well formed, but without A2 a rank-2m assignment need
    not solve the system.
    """
    bad = check_assumptions(s, require)
    if bad:
        raise AssumptionError("; ".join(str(v) for v in bad))
    m = s.m
    grid = [[ZERO] * (3 * m) for _ in range(3 * m)]
    for ell, e in enumerate(s.equations):
        for r, row in enumerate(build_block(e)):
            for c, x in enumerate(row):
                grid[3 * ell + r][3 * ell + c] = x
    originals = tuple(s.occurring())
    R: dict[str, tuple[int, ...]] = {}
    C: dict[str, tuple[int, ...]] = {}
    for u in originals:
        pos = [(i, j) for i in range(3 * m) for j in range(3 * m) if grid[i][j].coeff(u)]
        R[u] = tuple(sorted(i for i, _ in pos))
        C[u] = tuple(sorted(j for _, j in pos))
    taken = set(s.variables)
    copies: dict[str, tuple[str, int]] = {}
    for u in originals:
        k = len(R[u])
        if k < 2:
            continue
        for j in range(k):
            name = f"{u}{COPY_SEP}{j + 1}"
            if name in taken:
                raise ValueError(f"copy variable {name!r} collides with a system variable")
            copies[name] = (u, j + 1)
            for kk in range(k):
                if kk != j:
                    grid[R[u][j]][C[u][kk]] = AffineExpr.var(u) - AffineExpr.var(name)
    return SymbolicMatrix(
        m,
        tuple(tuple(row) for row in grid),
        originals + tuple(copies),
        originals,
        R,
        C,
        copies,
    )


class ObservationReport(NamedTuple):
    originals_on_grid: bool
    offblock_support: bool
    copies_single_row: bool
    identity_minor: bool

    def __str__(self):
        return "\n".join(f"part {i}: {'ok' if ok else 'FAILED'}" for i, ok in enumerate(self, 1))


def verify_observation(A: SymbolicMatrix) -> ObservationReport:
    """Check the four structural facts about a constructed matrix, directly on the grid."""
    dim = A.dim
    cells = [(i, j) for i in range(dim) for j in range(dim)]
    # R_u, C_u recomputed from the diagonal blocks
    R: dict[str, list[int]] = {}
    C: dict[str, list[int]] = {}
    for i, j in cells:
        if i // 3 == j // 3:
            for v, _ in A[i, j].terms:
                if v in A.copies:
                    continue
                R.setdefault(v, []).append(i)
                C.setdefault(v, []).append(j)
    R = {u: sorted(r) for u, r in R.items()}
    C = {u: sorted(c) for u, c in C.items()}

    part1 = set(R) == set(A.originals) and all(tuple(R[u]) == tuple(A.R[u]) and tuple(C[u]) == tuple(A.C[u]) for u in R)
    if part1:
        for u in A.originals:
            where = {(i, j) for i, j in cells if A[i, j].coeff(u)}
            if where != set(itertools.product(R[u], C[u])):
                part1 = False
            elif any(A[i, j].coeff(u) != 1 for i, j in where):
                part1 = False

    support = {(i, j) for u in R for i, j in itertools.product(R[u], C[u])}
    part2 = all(not A[i, j] or (i, j) in support for i, j in cells if i // 3 != j // 3)

    part3 = True
    for name, (u, j) in A.copies.items():
        where = [(r, c) for r, c in cells if A[r, c].coeff(name)]
        if u not in R or j > len(R[u]):
            part3 = False
        elif any(r != R[u][j - 1] or A[r, c].coeff(name) != -1 for r, c in where):
            part3 = False

    keep = [i for i in range(dim) if (i + 1) % 3]
    part4 = all(A[i, j] == (ONE if i == j else ZERO) for i in keep for j in keep)
    return ObservationReport(part1, part2, part3, part4)


def evaluate_matrix(A: SymbolicMatrix, sigma: Mapping[str, Any], F: FieldSpec) -> ConcreteMatrix:
    missing = [v for v in A.variables if v not in sigma]
    if missing:
        raise KeyError(f"assignment misses {missing}")
    val = {v: F.elem(sigma[v]) for v in A.variables}
    return ConcreteMatrix(A.dim, A.dim, tuple(e.evaluate(val, F) for row in A.entries for e in row), F)


def propagate_copies(A: SymbolicMatrix, sigma: Mapping[str, Any]) -> dict[str, Any]:
    """Extend an assignment of the originals by u~j := u."""
    out = {u: sigma[u] for u in A.originals}
    for name, (u, _) in A.copies.items():
        out[name] = sigma[u]
    return out


# ---------------------------------------------------------------------------
# brute-force minrank over GF(p)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MinrankResult:
    minrank: int
    witness: dict[str, int] | None
    assignments_checked: int = 0


def coefficient_arrays(A: SymbolicMatrix, p: int) -> tuple[np.ndarray, np.ndarray]:
    """(constants mod p, per-variable coefficient matrices mod p) as int64 arrays."""
    dim = A.dim
    const = np.zeros((dim, dim), dtype=np.int64)
    coef = np.zeros((A.n, dim, dim), dtype=np.int64)
    index = {v: k for k, v in enumerate(A.variables)}
    for i in range(dim):
        for j in range(dim):
            e = A[i, j]
            const[i, j] = int(e.const) % p
            for v, c in e.terms:
                coef[index[v], i, j] = c % p
    return const, coef


def batched_rank_mod_p(M: np.ndarray, p: int) -> np.ndarray:
    """Ranks of a stack of matrices (B, r, c) over GF(p) by vectorized elimination."""
    M = np.array(M, dtype=np.int64) % p
    B, nr, nc = M.shape
    rank = np.zeros(B, dtype=np.int64)
    inv = np.array([0] + [pow(x, -1, p) for x in range(1, p)], dtype=np.int64) if p < 1 << 16 else None
    rows = np.arange(nr)
    bidx = np.arange(B)
    for c in range(nc):
        cand = (M[:, :, c] != 0) & (rows[None, :] >= rank[:, None])
        has = cand.any(axis=1)
        if not has.any():
            continue
        piv = np.argmax(cand, axis=1)
        sel = bidx[has]
        pr, rr = piv[has], rank[has]
        # swap pivot row into position rank
        prow = M[sel, pr].copy()
        M[sel, pr] = M[sel, rr]
        M[sel, rr] = prow
        pivval = prow[:, c]
        pinv = inv[pivval] if inv is not None else np.array([pow(int(x), -1, p) for x in pivval], dtype=np.int64)
        prow = prow * pinv[:, None] % p
        M[sel, rr] = prow
        below = rows[None, :] > rr[:, None]
        f = M[sel, :, c] * below
        M[sel] = (M[sel] - f[:, :, None] * prow[:, None, :]) % p
        rank[sel] += 1
    return rank


def batched_det_mod_p(M: np.ndarray, p: int) -> np.ndarray:
    """Determinants of a stack of square matrices (B, d, d) over GF(p)."""
    M = np.array(M, dtype=np.int64) % p
    B, d, _ = M.shape
    det = np.ones(B, dtype=np.int64)
    inv = np.array([0] + [pow(x, -1, p) for x in range(1, p)], dtype=np.int64) if p < 1 << 16 else None
    rows = np.arange(d)
    bidx = np.arange(B)
    for c in range(d):
        cand = (M[:, :, c] != 0) & (rows[None, :] >= c)
        has = cand.any(axis=1)
        det[~has] = 0
        piv = np.argmax(cand, axis=1)
        sel = bidx[has]
        pr = piv[sel]
        swapped = pr != c
        prow = M[sel, pr].copy()
        M[sel, pr] = M[sel, c]
        M[sel, c] = prow
        det[sel[swapped]] = (-det[sel[swapped]]) % p
        pivval = prow[:, c]
        det[sel] = det[sel] * pivval % p
        pinv = inv[pivval] if inv is not None else np.array([pow(int(x), -1, p) for x in pivval], dtype=np.int64)
        prow = prow * pinv[:, None] % p
        below = rows[None, :] > c
        f = M[sel, :, c] * below
        M[sel] = (M[sel] - f[:, :, None] * prow[:, None, :]) % p
    return det


def bordered_determinants_mod_p(A: SymbolicMatrix, X: np.ndarray, p: int, ell: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`bordered_determinants` over GF(p) for assignment rows X (B, n)."""
    const, coef = coefficient_arrays(A, p)
    X = np.asarray(X, dtype=np.int64) % p
    mats = ((const.reshape(1, -1) + X @ coef.reshape(A.n, -1)) % p).reshape(len(X), A.dim, A.dim)
    keep = [i for i in range(A.dim) if (i + 1) % 3 or i == 3 * ell + 2]
    block = list(range(3 * ell, 3 * ell + 3))
    return (
        batched_det_mod_p(mats[:, keep][:, :, keep], p),
        batched_det_mod_p(mats[:, block][:, :, block], p),
    )


def _digits(start: int, count: int, n: int, p: int) -> np.ndarray:
    idx = np.arange(start, start + count, dtype=np.int64)
    out = np.empty((count, n), dtype=np.int64)
    for k in range(n - 1, -1, -1):
        idx, out[:, k] = np.divmod(idx, p)
    return out


def _schur_ranks(mats: np.ndarray, p: int) -> np.ndarray:
    """Ranks of matrices whose rows/columns 0,1 mod 3 carry an identity block.

    With J the identity rows/columns and K the rest, rank = |J| + rank(M_KK - M_KJ M_JK).
    """
    dim = mats.shape[1]
    J = [i for i in range(dim) if (i + 1) % 3]
    K = [i for i in range(dim) if not (i + 1) % 3]
    S = mats[:, K][:, :, K] - np.einsum("bij,bjk->bik", mats[:, K][:, :, J], mats[:, J][:, :, K] % p)
    return len(J) + batched_rank_mod_p(S % p, p)


def _scan(
    const: np.ndarray, coef: np.ndarray, p: int, start: int, stop: int, floor: int, batch: int, schur: bool = False
):
    """Minimum rank over assignment indices [start, stop); first attaining index."""
    n = coef.shape[0]
    best, best_idx = None, None
    flat = coef.reshape(n, -1)
    pos = start
    while pos < stop:
        cnt = min(batch, stop - pos)
        X = _digits(pos, cnt, n, p)
        mats = ((const.reshape(1, -1) + X @ flat) % p).reshape(cnt, *const.shape)
        ranks = _schur_ranks(mats, p) if schur else batched_rank_mod_p(mats, p)
        k = int(np.argmin(ranks))
        if best is None or ranks[k] < best:
            best, best_idx = int(ranks[k]), pos + k
        if best <= floor:
            break
        pos += cnt
    return best, best_idx


def minrank_bruteforce(
    A: SymbolicMatrix, F: FieldSpec, budget: int = DEFAULT_BUDGET, workers: int = 1, batch: int = 1 << 14
) -> MinrankResult:
    """Exact minrank over GF(p) by exhaustive enumeration of all p^n assignments.

    Assignments are visited variable-major with residues ascending, so the
    witness is the lexicographically first one attaining the minimum.  The scan
    stops early once rank 2m is reached, which no assignment can undercut.
    """
    if not F.is_prime_field:
        raise ValueError("brute-force minrank needs a prime field")
    p, n = F.p, A.n
    total = p**n
    if total > budget:
        raise BudgetExceeded(f"{p}^{n} = {total} assignments exceed the budget of {budget}")
    if A.m == 0:
        return MinrankResult(0, {}, 1)
    const, coef = coefficient_arrays(A, p)
    schur = verify_observation(A).identity_minor
    floor = 2 * A.m if schur else 0
    if n == 0:
        r = int(batched_rank_mod_p(const[None], p)[0])
        return MinrankResult(r, {}, 1)
    if workers > 1 and n > 0:
        chunk = total // p
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(
                _scan, itertools.repeat(const), itertools.repeat(coef), itertools.repeat(p),
                [k * chunk for k in range(p)], [(k + 1) * chunk for k in range(p)],
                itertools.repeat(floor), itertools.repeat(batch), itertools.repeat(schur),
            ))
        best, idx = min(parts)  # ties resolve to the smaller index
    else:
        best, idx = _scan(const, coef, p, 0, total, floor, batch, schur)
    values = _digits(idx, 1, n, p)[0]
    witness = {v: int(x) for v, x in zip(A.variables, values)}
    return MinrankResult(best, witness, total if best > floor else idx + 1)


def minrank_witness_search(
    A: SymbolicMatrix, s: QuadraticSystem, F: FieldSpec, budget: int = DEFAULT_BUDGET
) -> dict[str, Any] | None:
    """Solve ``s`` by brute force and lift the solution to A (copies equal their base).

    Returns None when ``s`` has no solution.  The returned assignment evaluates A
    to rank exactly 2m; this is checked before returning.
    """
    sol = solve_bruteforce(s, F, budget=budget)
    if sol is None:
        return None
    witness = propagate_copies(A, sol)
    r = matrix_rank(evaluate_matrix(A, witness, F))
    if r != 2 * A.m:
        raise AssertionError(f"lifted solution has rank {r}, expected {2 * A.m}")
    return witness


def bordered_determinants(A: SymbolicMatrix, sigma: Mapping[str, Any], F: FieldSpec, ell: int):
    """(det of the bordered (2m+1)-minor for block ``ell``, det of block ``ell``) at sigma.

    The minor keeps every row and column whose 1-based index is not a multiple
    of 3, plus row and column 3*(ell+1).
    """
    M = evaluate_matrix(A, sigma, F)
    keep = [i for i in range(A.dim) if (i + 1) % 3 or i == 3 * ell + 2]
    block = list(range(3 * ell, 3 * ell + 3))
    return determinant(M.submatrix(keep, keep)), determinant(M.submatrix(block, block))


def minimum_rank_bound(A: SymbolicMatrix) -> int:
    return 2 * A.m
