"""Tensor-rank procedures: exact rank decisions over GF(p), slice absorption,
realization spaces and the eigenvalue-0 test.

The rank search rests on a standard reformulation: T has rank <= r iff there
are r rank-one matrices S_1..S_r whose span contains every frontal slice of T
(the third-mode vectors w_l are then the coordinates of the slices).  The
search therefore enumerates sets of canonical rank-one matrices u v^T, with the
first nonzero entry of u and of v equal to 1, in strictly increasing order.
All scaling is carried by w, which is recovered by solving a linear system.
"""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import BudgetExceeded, MalformedInput
from .fields import (
    AffineSolutionSpace,
    ConcreteMatrix,
    FieldSpec,
    matrix_rank,
    rank_factorization,
    rank_of_rows,
    solve_affine,
)
from .minrank import SymbolicMatrix, evaluate_matrix
from .tensorize import (
    Expansion,
    RankOneTerm,
    Tensor,
    TensorBundle,
    expansion_sum,
    outer_factor,
    slice,
    verify_expansion,
)

DEFAULT_NODE_BUDGET = 10**8


# ---------------------------------------------------------------------------
# GF(p) helpers on numpy arrays
# ---------------------------------------------------------------------------


def _rank_mod_p(rows: np.ndarray, p: int) -> int:
    M = np.array(rows, dtype=np.int64) % p
    if M.size == 0:
        return 0
    r = 0
    for c in range(M.shape[1]):
        nz = np.nonzero(M[r:, c])[0]
        if not len(nz):
            continue
        k = r + nz[0]
        M[[r, k]] = M[[k, r]]
        M[r] = M[r] * pow(int(M[r, c]), -1, p) % p
        f = M[:, c].copy()
        f[r] = 0
        M = (M - np.outer(f, M[r])) % p
        r += 1
        if r == M.shape[0]:
            break
    return r


def canonical_vectors(d: int, p: int) -> np.ndarray:
    """All nonzero vectors in GF(p)^d whose first nonzero entry is 1.

    Ordered by the position of that leading 1 (earliest first), then
    lexicographically in the remaining coordinates.
    """
    out = []
    for lead in range(d):
        for tail in itertools.product(range(p), repeat=d - lead - 1):
            out.append((0,) * lead + (1,) + tail)
    return np.array(out, dtype=np.int64).reshape(len(out), d)


def unfolding_ranks(T: Tensor) -> tuple[int, int, int]:
    """Ranks of the three flattenings; each is a lower bound on tensor rank."""
    F = T.field
    d1, d2, d3 = T.dims
    rows1 = [[T[i, j, k] for j in range(d2) for k in range(d3)] for i in range(d1)]
    rows2 = [[T[i, j, k] for i in range(d1) for k in range(d3)] for j in range(d2)]
    rows3 = [[T[i, j, k] for i in range(d1) for j in range(d2)] for k in range(d3)]
    return tuple(rank_of_rows(rows, F) for rows in (rows1, rows2, rows3))


class _Echelon:
    """Incrementally maintained reduced basis of a subspace of GF(p)^D."""

    def __init__(self, D: int, p: int):
        self.p = p
        self.rows = np.zeros((0, D), dtype=np.int64)
        self.pivots: list[int] = []

    def reduce(self, X: np.ndarray) -> np.ndarray:
        X = np.array(X, dtype=np.int64) % self.p
        for b, c in zip(self.rows, self.pivots):
            X = (X - np.multiply.outer(X[..., c], b)) % self.p
        return X

    def extended(self, v: np.ndarray) -> _Echelon | None:
        """A copy with v added, or None when v is already in the span."""
        r = self.reduce(v)
        nz = np.nonzero(r)[0]
        if not len(nz):
            return None
        c = int(nz[0])
        r = r * pow(int(r[c]), -1, self.p) % self.p
        new = _Echelon(len(r), self.p)
        rows = (self.rows - np.outer(self.rows[:, c], r)) % self.p if len(self.rows) else self.rows
        new.rows = np.vstack([rows, r[None, :]])
        new.pivots = self.pivots + [c]
        return new


# ---------------------------------------------------------------------------
# exact rank decision
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RankDecision:
    bound: int
    verdict: bool
    certificate: Expansion | None
    nodes: int

    @property
    def label(self) -> str:
        return "yes" if self.verdict else "no"

    def to_json(self, certificate_path: str | None = None) -> dict:
        return {
            "r": self.bound,
            "verdict": self.label,
            "terms": len(self.certificate) if self.certificate is not None else None,
            "certificate": certificate_path,
            "nodes_explored": self.nodes,
        }


_PERMS = list(itertools.permutations(range(3)))


def _search_order(dims: tuple[int, int, int], p: int) -> tuple[int, int, int]:
    """Mode permutation that puts the largest extent third (fewest candidate matrices)."""
    return min(_PERMS, key=lambda perm: (p ** dims[perm[0]] * p ** dims[perm[1]], perm))


class _Search:
    def __init__(self, slices: np.ndarray, cands: np.ndarray, p: int, budget: int):
        self.slices = slices  # (d3, D) frontal slices, flattened
        self.cands = cands  # (N, D) canonical rank-one matrices, flattened
        self.p = p
        self.budget = budget
        self.nodes = 0

    def _tick(self, k: int = 1):
        self.nodes += k
        if self.nodes > self.budget:
            raise BudgetExceeded(f"rank search exceeded {self.budget} nodes")

    def run(self, r: int, first: Sequence[int] | None = None) -> list[int] | None:
        base = _Echelon(self.slices.shape[1], self.p)
        if first is None:
            return self._dfs(base, [], r, 0)
        for i in first:
            self._tick()
            ech = base.extended(self.cands[i])
            if ech is None:
                continue
            found = self._dfs(ech, [i], r, i + 1)
            if found is not None:
                return found
        return None

    def _dfs(self, ech: _Echelon, chosen: list[int], r: int, start: int) -> list[int] | None:
        resid = ech.reduce(self.slices)
        need = _rank_mod_p(resid, self.p)
        if need == 0:
            return chosen
        left = r - len(chosen)
        if need > left:
            return None
        if left == 1:
            # one more matrix must span the single residual direction
            tail = self.cands[start:]
            self._tick(len(tail))
            red = ech.reduce(tail)
            basis = resid[np.nonzero(resid.any(axis=1))[0][0]]
            c = int(np.nonzero(basis)[0][0])
            basis = basis * pow(int(basis[c]), -1, self.p) % self.p
            scaled = np.multiply.outer(red[:, c], basis) % self.p
            hit = np.nonzero((red[:, c] != 0) & np.all(red == scaled, axis=1))[0]
            return chosen + [start + int(hit[0])] if len(hit) else None
        for i in range(start, len(self.cands)):
            self._tick()
            nxt = ech.extended(self.cands[i])
            if nxt is None:
                continue
            found = self._dfs(nxt, chosen + [i], r, i + 1)
            if found is not None:
                return found
        return None


def _worker(args):
    slices, cands, p, budget, r, first = args
    s = _Search(slices, cands, p, budget)
    return s.run(r, first), s.nodes


def _permuted(T: Tensor, perm: tuple[int, int, int]) -> np.ndarray:
    return np.transpose(T.to_array(), perm)


def _certificate(T: Tensor, perm, mats: list[tuple[np.ndarray, np.ndarray]]) -> Expansion:
    """Solve for the third-mode vectors and map the terms back to T's mode order."""
    F = T.field
    p = F.p
    A = np.transpose(T.to_array(), perm)
    e1, e2, e3 = A.shape
    S = [np.multiply.outer(u, v).reshape(-1) % p for u, v in mats]
    rows = [[int(S[l][x]) for l in range(len(S))] for x in range(e1 * e2)]
    coeffs = ConcreteMatrix.from_rows(rows, F, cols=len(S))
    W = [[0] * e3 for _ in S]
    for k in range(e3):
        sol = solve_affine(coeffs, [int(x) for x in A[:, :, k].reshape(-1)], F)
        if not sol.nonempty:
            raise AssertionError("chosen matrices do not span the slices")
        for l in range(len(S)):
            W[l][k] = sol.particular[l]
    inv = np.argsort(perm)
    terms = []
    for (u, v), w in zip(mats, W):
        vecs = [tuple(int(x) for x in u), tuple(int(x) for x in v), tuple(w)]
        terms.append(RankOneTerm(*(vecs[inv[a]] for a in range(3))))
    E = Expansion(tuple(terms), F, T.digest())
    if not verify_expansion(T, E):
        raise AssertionError("rank certificate failed verification")
    return E


def tensor_rank_leq(
    T: Tensor, r: int, F: FieldSpec | None = None, budget: int = DEFAULT_NODE_BUDGET, workers: int = 1
) -> RankDecision:
    """Decide rank(T) <= r over GF(p) exactly.

    A yes verdict carries a verified expansion with at most r terms.  Search
    nodes are counted against ``budget``; running out raises
    :class:`BudgetExceeded` instead of returning a guess.
    """
    F = F or T.field
    if F != T.field:
        raise ValueError(f"tensor is over {T.field}, not {F}")
    if not F.is_prime_field:
        raise ValueError("exhaustive rank decision needs a prime field")
    if r < 0:
        raise ValueError("rank bound must be nonnegative")
    p = F.p
    if T.is_zero():
        return RankDecision(r, True, Expansion((), F, T.digest()), 1)
    if max(unfolding_ranks(T)) > r or min(T.dims) == 0:
        return RankDecision(r, False, None, 1)
    perm = _search_order(T.dims, p)
    A = _permuted(T, perm)
    e1, e2, e3 = A.shape
    U, V = canonical_vectors(e1, p), canonical_vectors(e2, p)
    pairs = list(itertools.product(range(len(U)), range(len(V))))
    cands = np.array([np.multiply.outer(U[a], V[b]).reshape(-1) for a, b in pairs], dtype=np.int64)
    slices = np.stack([A[:, :, k].reshape(-1) for k in range(e3)])
    if workers > 1 and r > 1:
        firsts = [list(range(len(cands)))[w::workers] for w in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_worker, [(slices, cands, p, budget, r, f) for f in firsts]))
        nodes = sum(n for _, n in results)
        if nodes > budget:
            raise BudgetExceeded(f"rank search exceeded {budget} nodes")
        found = [res for res, _ in results if res is not None]
        chosen = min(found) if found else None
    else:
        search = _Search(slices, cands, p, budget)
        chosen = search.run(r)
        nodes = search.nodes
    if chosen is None:
        return RankDecision(r, False, None, nodes)
    mats = [(U[pairs[i][0]], V[pairs[i][1]]) for i in chosen]
    return RankDecision(r, True, _certificate(T, perm, mats), nodes)


def tensor_rank(T: Tensor, budget: int = DEFAULT_NODE_BUDGET) -> int:
    """Exact rank over GF(p) by increasing r until the decision is yes."""
    r = max(unfolding_ranks(T)) if not T.is_zero() else 0
    while not tensor_rank_leq(T, r, budget=budget).verdict:
        r += 1
    return r


def tensor_rank_leq_naive(T: Tensor, r: int, max_set: int = 1 << 24) -> bool:
    """Reference decision with no canonical forms and no pruning.

    Builds the set of all tensors u (x) v (x) w over every choice of vectors,
    then the sets of sums of up to h of them, and tests whether T minus a sum
    of at most ceil(r/2) terms is a sum of at most floor(r/2) terms.
    """
    F = T.field
    p = F.p
    d1, d2, d3 = T.dims
    target = tuple(int(x) for x in T.entries)
    vecs = [list(itertools.product(range(p), repeat=d)) for d in (d1, d2, d3)]
    ones = set()
    for u in vecs[0]:
        for v in vecs[1]:
            for w in vecs[2]:
                ones.add(tuple(a * b * c % p for a in u for b in v for c in w))
    zero = (0,) * len(target)
    ones.add(zero)

    def sums(h: int) -> set:
        level = {zero}
        for _ in range(h):
            level = {tuple((x + y) % p for x, y in zip(a, b)) for a in level for b in ones}
            if len(level) > max_set:
                raise BudgetExceeded("reference enumerator exceeded its set budget")
        return level

    lo, hi = r // 2, r - r // 2
    small = sums(lo)
    for a in sums(hi):
        if tuple((x - y) % p for x, y in zip(target, a)) in small:
            return True
    return False


# ---------------------------------------------------------------------------
# slice absorption
# ---------------------------------------------------------------------------


def _pivot_absorb(T: Tensor, E: Expansion, k1: int, start: int) -> Expansion:
    F = T.field
    M = slice(T, 3, k1)
    u, v = outer_factor(M)  # raises on rank >= 2
    terms = list(E.terms)
    ell = next((l for l in range(start, len(terms)) if terms[l].w[k1]), None)
    if ell is None:
        raise ValueError(f"no term from position {start} has a nonzero coordinate at slice {k1}")
    a = terms[ell].w[k1]
    w_new = tuple(F.div(x, a) for x in terms[ell].w)
    out = []
    for l, t in enumerate(terms):
        if l == ell:
            continue
        c = t.w[k1]
        w = t.w if not c else tuple(F.sub(x, F.mul(c, y)) for x, y in zip(t.w, w_new))
        out.append(RankOneTerm(t.u, t.v, w))
    out.insert(start, RankOneTerm(u, v, w_new))
    return E.with_terms(out)


def absorb_slice(T: Tensor, E: Expansion, k1: int) -> Expansion:
    """Rewrite E so that its first term's matrix part is the rank-one slice t[:, :, k1].

    The least term l with w_l(k1) != 0 is replaced by M (x) w_l / w_l(k1), and
    every other term's w is corrected by its k1 coordinate times that vector.
    A zero slice leaves E unchanged.  The result is verified before return.
    """
    if not verify_expansion(T, E):
        raise ValueError("expansion does not sum to the tensor")
    M = slice(T, 3, k1)
    if M.is_zero():
        return E
    if matrix_rank(M) > 1:
        raise ValueError(f"slice {k1} has rank {matrix_rank(M)}")
    out = _pivot_absorb(T, E, k1, 0)
    if not verify_expansion(T, out):
        raise AssertionError("absorption broke the expansion")
    return out


def absorb_slices(T: Tensor, E: Expansion, H: Sequence[int]) -> Expansion:
    """Pin linearly independent rank-one slices t[:, :, h], h in H, as the first |H| terms."""
    if not verify_expansion(T, E):
        raise ValueError("expansion does not sum to the tensor")
    H = list(H)
    if not H:
        return E
    mats = [slice(T, 3, h) for h in H]
    for h, M in zip(H, mats):
        if matrix_rank(M) > 1:
            raise ValueError(f"slice {h} has rank {matrix_rank(M)}")
    if rank_of_rows([list(M.entries) for M in mats], T.field) != len(H):
        raise ValueError("slices are linearly dependent")
    out = E
    for i, h in enumerate(H):
        out = _pivot_absorb(T, out, h, i)
    if not verify_expansion(T, out):
        raise AssertionError("absorption broke the expansion")
    return out


# ---------------------------------------------------------------------------
# realization spaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SliceFamily:
    """Rank-at-most-one matrices S_1..S_r of a common shape."""

    matrices: tuple[ConcreteMatrix, ...]
    field: FieldSpec

    def __post_init__(self):
        shapes = {(M.rows, M.cols) for M in self.matrices}
        if len(shapes) > 1:
            raise ValueError(f"mixed shapes {sorted(shapes)}")
        for i, M in enumerate(self.matrices):
            if M.field != self.field:
                raise ValueError(f"member {i} is over {M.field}")
            if matrix_rank(M) > 1:
                raise ValueError(f"member {i} has rank {matrix_rank(M)}")

    def __len__(self):
        return len(self.matrices)

    def to_json(self) -> dict:
        return {"field": self.field.to_json(), "matrices": [M.to_json() for M in self.matrices]}

    @classmethod
    def from_json(cls, obj: Any, expected_field: FieldSpec | None = None) -> SliceFamily:
        try:
            F = FieldSpec.from_json(obj["field"])
            mats = tuple(ConcreteMatrix.from_json(M) for M in obj["matrices"])
        except (KeyError, TypeError) as exc:
            raise MalformedInput(f"bad slice family: {exc}") from exc
        if expected_field is not None and F != expected_field:
            raise MalformedInput(f"slice family is over {F}, expected {expected_field}")
        try:
            return cls(mats, F)
        except ValueError as exc:
            raise MalformedInput(str(exc)) from exc

    @classmethod
    def load(cls, path: str, expected_field: FieldSpec | None = None) -> SliceFamily:
        try:
            with open(path) as fh:
                obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedInput(f"not JSON: {exc}") from exc
        return cls.from_json(obj, expected_field)


@dataclass(frozen=True)
class RealizationSpace:
    """Solutions (w_1..w_r) of T = sum_l S_l (x) w_l; unknown l*d3 + k is w_l(k)."""

    space: AffineSolutionSpace
    r: int
    d3: int

    @property
    def nonempty(self) -> bool:
        return self.space.nonempty

    def split(self, x: Sequence) -> list[tuple]:
        return [tuple(x[l * self.d3 : (l + 1) * self.d3]) for l in range(self.r)]


def witness_family(A: SymbolicMatrix, B: TensorBundle, sigma: Mapping[str, Any], F: FieldSpec) -> SliceFamily:
    """The n variable slices of B followed by the rank-one factors of sigma(A).

    When rank(sigma(A)) = 2m this family has 2m + n members, and T_A lies in
    the span of their products with suitable third-mode vectors.
    """
    T = B.tensor
    mats = [slice(T, 3, B.slice_map[v]) for v in B.variables]
    lcols, urows = rank_factorization(evaluate_matrix(A, sigma, F))
    for col, row in zip(lcols, urows):
        mats.append(ConcreteMatrix.from_rows([[F.mul(a, b) for b in row] for a in col], F, cols=len(row)))
    return SliceFamily(tuple(mats), F)


def realization_system(T: Tensor, S: SliceFamily) -> tuple[ConcreteMatrix, list]:
    """The full linear system over all (i, j, k), before decoupling by k."""
    F = T.field
    d1, d2, d3 = T.dims
    r = len(S)
    rows, rhs = [], []
    for i in range(d1):
        for j in range(d2):
            for k in range(d3):
                row = [F.zero] * (r * d3)
                for l, M in enumerate(S.matrices):
                    row[l * d3 + k] = M[i, j]
                rows.append(row)
                rhs.append(T[i, j, k])
    return ConcreteMatrix.from_rows(rows, F, cols=r * d3), rhs


def realization_space(T: Tensor, S: SliceFamily, r: int | None = None, F: FieldSpec | None = None) -> RealizationSpace:
    """Exact solution set of sum_l (S_l)_ij w_l(k) = t_ijk.

    The system splits into d3 independent systems sharing the coefficient
    matrix [vec S_1 ... vec S_r]; their solutions are interleaved.
    """
    F = F or T.field
    if F != T.field or S.field != F:
        raise ValueError("tensor, family and field disagree")
    r = len(S) if r is None else r
    if r != len(S):
        raise ValueError(f"family has {len(S)} members, r = {r}")
    d1, d2, d3 = T.dims
    if S.matrices and (S.matrices[0].rows, S.matrices[0].cols) != (d1, d2):
        raise ValueError(f"family shape does not match tensor dims {T.dims}")
    rows = [[M[i, j] for M in S.matrices] for i in range(d1) for j in range(d2)]
    coeffs = ConcreteMatrix.from_rows(rows, F, cols=r)
    n = r * d3
    particular = [F.zero] * n
    basis = []
    for k in range(d3):
        sol = solve_affine(coeffs, [T[i, j, k] for i in range(d1) for j in range(d2)], F)
        if not sol.nonempty:
            return RealizationSpace(AffineSolutionSpace(n, "empty", None, (), F), r, d3)
        for l in range(r):
            particular[l * d3 + k] = sol.particular[l]
        for b in sol.basis:
            vec = [F.zero] * n
            for l in range(r):
                vec[l * d3 + k] = b[l]
            basis.append(tuple(vec))
    return RealizationSpace(AffineSolutionSpace(n, "nonempty", tuple(particular), tuple(basis), F), r, d3)


def realize(S: SliceFamily, ws: Sequence[Sequence], dims: Sequence[int]) -> Tensor:
    """sum_l S_l (x) w_l as a tensor."""
    F = S.field
    terms = []
    for M, w in zip(S.matrices, ws, strict=True):
        u, v = outer_factor(M)
        terms.append(RankOneTerm(u, v, tuple(F.elem(x) for x in w)))
    d1, d2, d3 = dims
    return Tensor((d1, d2, d3), F, expansion_sum(dims, Expansion(tuple(terms), F)))


# ---------------------------------------------------------------------------
# eigenvalue zero
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Eig0Result:
    verdict: bool
    eigenvector: tuple | None
    checked: int
    characteristic: int

    @property
    def label(self) -> str:
        return "has-zero-eigenvalue" if self.verdict else "none"

    def to_json(self) -> dict:
        out = {
            "verdict": self.label,
            "eigenvector": list(self.eigenvector) if self.eigenvector is not None else None,
            "vectors_checked": self.checked,
        }
        if self.characteristic == 2:
            out["note"] = "characteristic 2: cross terms are not split symmetrically"
        return out


def eig0(T: Tensor, F: FieldSpec | None = None, budget: int = 1 << 26) -> Eig0Result:
    """Search for x != 0 with sum_ij t_ijk x_i x_j = 0 for every k.

    Vectors are normalized so their first nonzero coordinate is 1 and visited
    with the leading position ascending, then lexicographically; the first hit
    is returned (so e_1 is tried first).
    """
    F = F or T.field
    if F != T.field or not F.is_prime_field:
        raise ValueError("eig0 needs a tensor over its own prime field")
    n = T.dims[0]
    if T.dims != (n, n, n):
        raise ValueError(f"tensor of dims {T.dims} is not cubical")
    p = F.p
    total = (p**n - 1) // (p - 1)
    if total > budget:
        raise BudgetExceeded(f"{total} vectors exceed the budget of {budget}")
    A = T.to_array()
    checked = 0
    for lead in range(n):
        tails = np.array(list(itertools.product(range(p), repeat=n - lead - 1)), dtype=np.int64)
        tails = tails.reshape(len(tails), n - lead - 1)
        X = np.zeros((len(tails), n), dtype=np.int64)
        X[:, lead] = 1
        X[:, lead + 1 :] = tails
        vals = np.einsum("bi,ijk,bj->bk", X, A, X) % p
        hit = np.nonzero(~vals.any(axis=1))[0]
        if len(hit):
            checked += int(hit[0]) + 1
            return Eig0Result(True, tuple(int(x) for x in X[hit[0]]), checked, p)
        checked += len(X)
    return Eig0Result(False, None, checked, p)


def tensor_from_homogeneous(forms: Sequence[Mapping[tuple[int, int], Any]], n: int, F: FieldSpec) -> Tensor:
    """Cubical n x n x n tensor whose k-th frontal slice represents the k-th form.

    A form maps index pairs (i, j) (0-based, either order) to the coefficient
    of x_i x_j.  Cross coefficients are split evenly between (i, j) and (j, i)
    unless the characteristic is 2, where the whole coefficient goes to the
    position with i < j.  Missing forms are zero slices.
    """
    if len(forms) > n:
        raise ValueError(f"{len(forms)} forms for n = {n}")
    flat = [F.zero] * (n**3)
    half = None if F.characteristic == 2 else F.inv(F.elem(2))

    def put(i, j, k, c):
        o = (i * n + j) * n + k
        flat[o] = F.add(flat[o], c)

    for k, form in enumerate(forms):
        for (i, j), c in form.items():
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"index {(i, j)} outside 0..{n - 1}")
            c = F.elem(c)
            if i == j:
                put(i, i, k, c)
            elif half is None:
                put(min(i, j), max(i, j), k, c)
            else:
                put(i, j, k, F.mul(c, half))
                put(j, i, k, F.mul(c, half))
    return Tensor((n, n, n), F, tuple(flat))


def eval_form(form: Mapping[tuple[int, int], Any], x: Sequence[int], F: FieldSpec):
    acc = F.zero
    for (i, j), c in form.items():
        acc = F.add(acc, F.mul(F.elem(c), F.mul(F.elem(x[i]), F.elem(x[j]))))
    return acc
