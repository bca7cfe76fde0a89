"""Three-way tensors over exact fields, and the tensor of a symbolic matrix.

For a symbolic matrix A in variables x_1..x_n, the tensor T_A stacks the
coefficient matrices A_x as frontal slices 0..n-1 and the constant part A_1 as
slice n.  Since sigma(A) = A_1 + sum_x sigma(x) A_x, any assignment dropping
sigma(A) to rank 2m yields an expansion of T_A with 2m + n terms.

Entries are stored flat with offset (i*d2 + j)*d3 + k (0-based).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import IO, Any, Mapping, Sequence

import numpy as np

from .errors import MalformedInput
from .fields import ConcreteMatrix, FieldSpec, matrix_rank, rank_factorization, rank_of_rows
from .minrank import SymbolicMatrix, evaluate_matrix


@dataclass(frozen=True)
class Tensor:
    dims: tuple[int, int, int]
    field: FieldSpec
    entries: tuple

    def __post_init__(self):
        d1, d2, d3 = self.dims
        if min(self.dims) < 0:
            raise ValueError(f"negative extent in {self.dims}")
        if len(self.entries) != d1 * d2 * d3:
            raise ValueError(f"{len(self.entries)} entries for dims {self.dims}")

    @classmethod
    def zeros(cls, dims: Sequence[int], F: FieldSpec) -> Tensor:
        d1, d2, d3 = dims
        return cls((d1, d2, d3), F, (F.zero,) * (d1 * d2 * d3))

    @classmethod
    def from_nested(cls, data: Sequence, F: FieldSpec) -> Tensor:
        """From a nested list indexed ``data[i][j][k]``."""
        d1 = len(data)
        d2 = len(data[0]) if d1 else 0
        d3 = len(data[0][0]) if d2 else 0
        flat = [F.elem(x) for plane in data for row in plane for x in row]
        return cls((d1, d2, d3), F, tuple(flat))

    @classmethod
    def from_array(cls, arr: np.ndarray, F: FieldSpec) -> Tensor:
        d1, d2, d3 = arr.shape
        return cls((d1, d2, d3), F, tuple(F.elem(int(x)) for x in arr.reshape(-1)))

    def offset(self, i: int, j: int, k: int) -> int:
        d1, d2, d3 = self.dims
        if not (0 <= i < d1 and 0 <= j < d2 and 0 <= k < d3):
            raise IndexError(f"index {(i, j, k)} outside {self.dims}")
        return (i * d2 + j) * d3 + k

    def __getitem__(self, ijk: tuple[int, int, int]):
        return self.entries[self.offset(*ijk)]

    def to_array(self) -> np.ndarray:
        """int64 array of residues; GF(p) only."""
        if not self.field.is_prime_field:
            raise ValueError("numpy view is only available over GF(p)")
        return np.array(self.entries, dtype=np.int64).reshape(self.dims)

    def is_zero(self) -> bool:
        return not any(self.entries)

    def to_json(self) -> dict:
        return {
            "dims": list(self.dims),
            "field": self.field.to_json(),
            "entries": [self.field.encode(x) for x in self.entries],
        }

    @classmethod
    def from_json(cls, obj: Any, expected_field: FieldSpec | None = None) -> Tensor:
        try:
            dims = obj["dims"]
            F = FieldSpec.from_json(obj["field"])
            raw = obj["entries"]
        except (KeyError, TypeError) as exc:
            raise MalformedInput(f"bad tensor document: {exc}") from exc
        if (
            not isinstance(dims, list)
            or len(dims) != 3
            or any(not isinstance(d, int) or isinstance(d, bool) or d < 0 for d in dims)
        ):
            raise MalformedInput(f"bad dims {dims!r}")
        if expected_field is not None and F != expected_field:
            raise MalformedInput(f"tensor is over {F}, expected {expected_field}")
        if not isinstance(raw, list) or len(raw) != dims[0] * dims[1] * dims[2]:
            raise MalformedInput(f"entry count does not match dims {dims}")
        return cls(tuple(dims), F, tuple(F.decode(x) for x in raw))

    def digest(self) -> str:
        text = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def read_tensor(src: str | IO[str], expected_field: FieldSpec | None = None) -> Tensor:
    try:
        if isinstance(src, str):
            with open(src) as fh:
                obj = json.load(fh)
        else:
            obj = json.load(src)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"not JSON: {exc}") from exc
    return Tensor.from_json(obj, expected_field)


def write_tensor(T: Tensor, dst: str | IO[str]) -> None:
    text = json.dumps(T.to_json(), indent=None, separators=(",", ":")) + "\n"
    if isinstance(dst, str):
        with open(dst, "w") as fh:
            fh.write(text)
    else:
        dst.write(text)


def slice(T: Tensor, mode: int, index: int) -> ConcreteMatrix:  # noqa: A001 - mirrors the math
    """The 2-D subarray with coordinate ``mode`` (1, 2 or 3) fixed at ``index`` (0-based).

    Mode 3 gives the frontal slice t[:, :, index] as a d1 x d2 matrix.
    """
    d1, d2, d3 = T.dims
    if mode == 1:
        if not 0 <= index < d1:
            raise IndexError(f"mode-1 index {index} outside 0..{d1 - 1}")
        rows = [[T[index, j, k] for k in range(d3)] for j in range(d2)]
        return ConcreteMatrix.from_rows(rows, T.field, cols=d3)
    if mode == 2:
        if not 0 <= index < d2:
            raise IndexError(f"mode-2 index {index} outside 0..{d2 - 1}")
        rows = [[T[i, index, k] for k in range(d3)] for i in range(d1)]
        return ConcreteMatrix.from_rows(rows, T.field, cols=d3)
    if mode == 3:
        if not 0 <= index < d3:
            raise IndexError(f"mode-3 index {index} outside 0..{d3 - 1}")
        rows = [[T[i, j, index] for j in range(d2)] for i in range(d1)]
        return ConcreteMatrix.from_rows(rows, T.field, cols=d2)
    raise ValueError(f"mode must be 1, 2 or 3, got {mode}")


# ---------------------------------------------------------------------------
# rank-one terms and expansions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RankOneTerm:
    u: tuple
    v: tuple
    w: tuple

    def is_zero(self) -> bool:
        return not any(self.u) or not any(self.v) or not any(self.w)

    def to_json(self, F: FieldSpec) -> dict:
        return {k: [F.encode(x) for x in getattr(self, k)] for k in ("u", "v", "w")}

    @classmethod
    def from_json(cls, obj: Any, F: FieldSpec) -> RankOneTerm:
        try:
            return cls(*(tuple(F.decode(x) for x in obj[k]) for k in ("u", "v", "w")))
        except (KeyError, TypeError) as exc:
            raise MalformedInput(f"bad rank-one term {obj!r}") from exc


@dataclass(frozen=True)
class Expansion:
    """An ordered list of rank-one terms; ``target_digest`` names the tensor it claims."""

    terms: tuple[RankOneTerm, ...]
    field: FieldSpec
    target_digest: str | None = None

    def __len__(self):
        return len(self.terms)

    def with_terms(self, terms: Sequence[RankOneTerm]) -> Expansion:
        return Expansion(tuple(terms), self.field, self.target_digest)

    def to_json(self) -> dict:
        return {
            "field": self.field.to_json(),
            "target_sha256": self.target_digest,
            "terms": [t.to_json(self.field) for t in self.terms],
        }

    @classmethod
    def from_json(cls, obj: Any, expected_field: FieldSpec | None = None) -> Expansion:
        try:
            F = FieldSpec.from_json(obj["field"])
            terms = tuple(RankOneTerm.from_json(t, F) for t in obj["terms"])
            digest = obj.get("target_sha256")
        except (KeyError, TypeError, AttributeError) as exc:
            raise MalformedInput(f"bad expansion document: {exc}") from exc
        if expected_field is not None and F != expected_field:
            raise MalformedInput(f"expansion is over {F}, expected {expected_field}")
        return cls(terms, F, digest)


def expansion_sum(dims: Sequence[int], E: Expansion) -> tuple:
    """Flat entries of the sum of the terms of E."""
    F = E.field
    d1, d2, d3 = dims
    for t in E.terms:
        if (len(t.u), len(t.v), len(t.w)) != (d1, d2, d3):
            raise ValueError(f"term of shape {(len(t.u), len(t.v), len(t.w))} in a {tuple(dims)} tensor")
    if F.is_prime_field:
        p = F.p
        acc = np.zeros((d1, d2, d3), dtype=object if p >= 1 << 31 else np.int64)
        for t in E.terms:
            u, v, w = (np.array(x, dtype=np.int64) for x in (t.u, t.v, t.w))
            uv = np.multiply.outer(u, v) % p
            acc = (acc + np.multiply.outer(uv, w) % p) % p
        return tuple(int(x) for x in acc.reshape(-1))
    acc = [F.zero] * (d1 * d2 * d3)
    for t in E.terms:
        for i, a in enumerate(t.u):
            if not a:
                continue
            for j, b in enumerate(t.v):
                if not b:
                    continue
                ab = F.mul(a, b)
                base = (i * d2 + j) * d3
                for k, c in enumerate(t.w):
                    if c:
                        acc[base + k] = F.add(acc[base + k], F.mul(ab, c))
    return tuple(acc)


def verify_expansion(T: Tensor, E: Expansion) -> bool:
    """True iff the terms of E sum to T entrywise (raises on a dimension mismatch)."""
    if E.field != T.field:
        raise ValueError(f"expansion over {E.field} for a tensor over {T.field}")
    return expansion_sum(T.dims, E) == T.entries


def outer_factor(M: ConcreteMatrix) -> tuple[tuple, tuple]:
    """(u, v) with M = u v^T, taking u as the first nonzero column of M.

    A zero matrix factors as (0, 0).  Raises ValueError when M has rank >= 2.
    """
    F = M.field
    cols = [c for c in range(M.cols) if any(M[i, c] for i in range(M.rows))]
    if not cols:
        return (F.zero,) * M.rows, (F.zero,) * M.cols
    c = cols[0]
    u = tuple(M[i, c] for i in range(M.rows))
    r = next(i for i in range(M.rows) if u[i])
    scale = F.inv(u[r])
    v = tuple(F.mul(M[r, j], scale) for j in range(M.cols))
    for i in range(M.rows):
        for j in range(M.cols):
            if F.mul(u[i], v[j]) != M[i, j]:
                raise ValueError("matrix has rank >= 2; no outer-product factorization")
    return u, v


# ---------------------------------------------------------------------------
# the tensor of a symbolic matrix
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TensorBundle:
    tensor: Tensor
    slice_map: Mapping[str, int]  # variable -> frontal slice index
    m: int
    n: int
    variables: tuple[str, ...] = field(default=())

    @property
    def constants_index(self) -> int:
        return self.n

    @property
    def rank_target(self) -> int:
        return 2 * self.m + self.n

    def metadata(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "rank_target": self.rank_target,
            "dims": list(self.tensor.dims),
            "field": self.tensor.field.to_json(),
            "slice_map": dict(self.slice_map),
            "constants_slice": self.constants_index,
            "tensor_sha256": self.tensor.digest(),
        }

    @classmethod
    def from_metadata(cls, meta: Any, T: Tensor) -> TensorBundle:
        try:
            m, n, smap = meta["m"], meta["n"], dict(meta["slice_map"])
            target = meta["rank_target"]
        except (KeyError, TypeError) as exc:
            raise MalformedInput(f"bad bundle metadata: {exc}") from exc
        if target != 2 * m + n or T.dims != (3 * m, 3 * m, n + 1) or sorted(smap.values()) != list(range(n)):
            raise MalformedInput("bundle metadata inconsistent with its tensor")
        variables = tuple(sorted(smap, key=smap.get))
        return cls(T, smap, m, n, variables)


def build_tensor(A: SymbolicMatrix, F: FieldSpec) -> TensorBundle:
    """Slices 0..n-1 are the coefficient matrices A_x in A's variable order; slice n is A_1."""
    dim, n = A.dim, A.n
    index = {v: k for k, v in enumerate(A.variables)}
    flat = [F.zero] * (dim * dim * (n + 1))
    for i in range(dim):
        for j in range(dim):
            e = A[i, j]
            base = (i * dim + j) * (n + 1)
            flat[base + n] = F.elem(e.const)
            for v, c in e.terms:
                flat[base + index[v]] = F.elem(c)
    T = Tensor((dim, dim, n + 1), F, tuple(flat))
    bundle = TensorBundle(T, dict(index), A.m, n, tuple(A.variables))
    for v, k in index.items():
        if matrix_rank(slice(T, 3, k)) != 1:
            raise AssertionError(f"coefficient slice of {v} does not have rank 1")
    return bundle


def check_slice_independence(B: TensorBundle) -> bool:
    """True iff the n variable slices, flattened, are linearly independent."""
    T = B.tensor
    d1, d2, _ = T.dims
    stack = [[T[i, j, k] for i in range(d1) for j in range(d2)] for k in range(B.n)]
    return rank_of_rows(stack, T.field) == B.n


def _unit(n: int, k: int, F: FieldSpec, scale=None) -> list:
    w = [F.zero] * n
    w[k] = F.one if scale is None else scale
    return w


def expansion_from_assignment(
    A: SymbolicMatrix, B: TensorBundle, sigma: Mapping[str, Any], F: FieldSpec
) -> Expansion:
    """Rank certificate for T_A from an assignment with rank(sigma(A)) <= 2m.

    Each variable slice contributes A_x (x) (e_x - sigma(x) e_c) where c is the
    constants slice; a rank factorization of sigma(A) contributes its terms
    paired with e_c.  The frontal slice c then sums to
    sigma(A) - sum sigma(x) A_x = A_1.  The result is verified before return.
    """
    T = B.tensor
    if F != T.field:
        raise ValueError(f"bundle is over {T.field}, not {F}")
    M = evaluate_matrix(A, sigma, F)
    r = matrix_rank(M)
    if r > 2 * A.m:
        raise ValueError(f"assignment gives rank {r} > 2m = {2 * A.m}")
    d3 = B.n + 1
    c = B.constants_index
    terms = []
    for v in B.variables:
        k = B.slice_map[v]
        try:
            u, vv = outer_factor(slice(T, 3, k))
        except ValueError as exc:
            raise AssertionError(f"slice of {v} is not rank one") from exc
        w = _unit(d3, k, F)
        w[c] = F.neg(F.elem(sigma[v]))
        terms.append(RankOneTerm(u, vv, tuple(w)))
    lcols, urows = rank_factorization(M)
    for col, row in zip(lcols, urows):
        terms.append(RankOneTerm(tuple(col), tuple(row), tuple(_unit(d3, c, F))))
    E = Expansion(tuple(terms), F, T.digest())
    if not verify_expansion(T, E):
        raise AssertionError("constructed expansion does not sum to the tensor")
    return E
