"""Exact arithmetic over GF(p), Q and Q(sqrt d), plus exact linear algebra.

Elements are plain Python values: ``int`` residues for GF(p), ``Fraction`` for
Q and :class:`QSqrt` for real quadratic extensions.  A :class:`FieldSpec`
carries the arithmetic, so generic routines take the field as an argument.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Sequence

from .errors import FieldError, MalformedInput

GFP_MAX = 2**31


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    for q in range(3, math.isqrt(n) + 1, 2):
        if n % q == 0:
            return False
    return True


def is_squarefree(n: int) -> bool:
    q = 2
    while q * q <= n:
        if n % (q * q) == 0:
            return False
        q += 1
    return True


def _rational(raw: Any) -> Fraction:
    """Parse one rational component: int, Fraction, "n/d" string or (n, d) pair."""
    if isinstance(raw, bool):
        raise FieldError(f"not a rational: {raw!r}")
    if isinstance(raw, (int, Fraction)):
        return Fraction(raw)
    if isinstance(raw, str):
        m = re.fullmatch(r"\s*(-?\d+)\s*(?:/\s*(-?\d+)\s*)?", raw)
        if not m:
            raise FieldError(f"not a rational: {raw!r}")
        num, den = int(m.group(1)), int(m.group(2) or 1)
    elif isinstance(raw, (tuple, list)) and len(raw) == 2:
        num, den = raw
        if not all(isinstance(t, int) and not isinstance(t, bool) for t in (num, den)):
            raise FieldError(f"not a rational: {raw!r}")
    else:
        raise FieldError(f"not a rational: {raw!r}")
    if den == 0:
        raise FieldError("zero denominator")
    return Fraction(num, den)


@dataclass(frozen=True)
class QSqrt:
    """The number a + b*sqrt(d) with rational a, b."""

    a: Fraction
    b: Fraction
    d: int

    def _coerce(self, other: Any) -> QSqrt:
        if isinstance(other, QSqrt):
            if other.d != self.d:
                raise FieldError(f"mixing Q(sqrt {self.d}) and Q(sqrt {other.d})")
            return other
        if isinstance(other, (int, Fraction)):
            return QSqrt(Fraction(other), Fraction(0), self.d)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return QSqrt(self.a + o.a, self.b + o.b, self.d)

    __radd__ = __add__

    def __neg__(self):
        return QSqrt(-self.a, -self.b, self.d)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return QSqrt(self.a - o.a, self.b - o.b, self.d)

    def __rsub__(self, other):
        return -(self - other)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return QSqrt(self.a * o.a + self.d * self.b * o.b, self.a * o.b + self.b * o.a, self.d)

    __rmul__ = __mul__

    def norm(self) -> Fraction:
        return self.a * self.a - self.d * self.b * self.b

    def conjugate(self) -> QSqrt:
        return QSqrt(self.a, -self.b, self.d)

    def inverse(self) -> QSqrt:
        n = self.norm()
        if n == 0:
            # d square-free and >= 2 means the norm vanishes only at zero
            raise ZeroDivisionError("inverse of zero in Q(sqrt d)")
        return QSqrt(self.a / n, -self.b / n, self.d)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self * o.inverse()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.inverse()

    def __eq__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return False
        return self.a == o.a and self.b == o.b

    def __hash__(self):
        return hash((self.a, self.b, self.d))

    def __bool__(self):
        return bool(self.a) or bool(self.b)

    def __repr__(self):
        return f"QSqrt({self.a}, {self.b}, d={self.d})"

    def __str__(self):
        if not self.b:
            return str(self.a)
        return f"{self.a} + {self.b}*sqrt({self.d})"


@dataclass(frozen=True)
class FieldSpec:
    """One of GF(p) (``kind="gfp"``), Q (``"q"``) or Q(sqrt d) (``"qsqrt"``)."""

    kind: str
    p: int | None = None
    d: int | None = None

    def __post_init__(self):
        if self.kind == "gfp":
            if not isinstance(self.p, int) or not (2 <= self.p <= GFP_MAX) or not is_prime(self.p):
                raise FieldError(f"GF(p) needs a prime 2 <= p <= 2^31, got {self.p!r}")
        elif self.kind == "q":
            pass
        elif self.kind == "qsqrt":
            if not isinstance(self.d, int) or self.d < 2 or not is_squarefree(self.d):
                raise FieldError(f"Q(sqrt d) needs square-free d >= 2, got {self.d!r}")
        else:
            raise FieldError(f"unknown field kind {self.kind!r}")

    # constructors -------------------------------------------------------

    @classmethod
    def gf(cls, p: int) -> FieldSpec:
        return cls("gfp", p=p)

    @classmethod
    def rationals(cls) -> FieldSpec:
        return cls("q")

    @classmethod
    def qsqrt(cls, d: int) -> FieldSpec:
        return cls("qsqrt", d=d)

    @classmethod
    def parse(cls, flag: str) -> FieldSpec:
        """Parse the command-line syntax ``gf<p>``, ``q`` or ``qsqrt<d>``."""
        flag = flag.strip().lower()
        if flag == "q":
            return cls.rationals()
        m = re.fullmatch(r"gf(\d+)", flag)
        if m:
            return cls.gf(int(m.group(1)))
        m = re.fullmatch(r"qsqrt(\d+)", flag)
        if m:
            return cls.qsqrt(int(m.group(1)))
        raise FieldError(f"bad field flag {flag!r} (expected gf<p>, q or qsqrt<d>)")

    @property
    def flag(self) -> str:
        return {"gfp": f"gf{self.p}", "q": "q", "qsqrt": f"qsqrt{self.d}"}[self.kind]

    @property
    def is_prime_field(self) -> bool:
        return self.kind == "gfp"

    @property
    def characteristic(self) -> int:
        return self.p if self.kind == "gfp" else 0

    def to_json(self) -> dict:
        if self.kind == "gfp":
            return {"kind": "gfp", "p": self.p}
        if self.kind == "qsqrt":
            return {"kind": "qsqrt", "d": self.d}
        return {"kind": "q"}

    @classmethod
    def from_json(cls, obj: Any) -> FieldSpec:
        if not isinstance(obj, dict) or "kind" not in obj:
            raise MalformedInput(f"bad field object {obj!r}")
        try:
            return cls(obj["kind"], p=obj.get("p"), d=obj.get("d"))
        except FieldError as exc:
            raise MalformedInput(str(exc)) from exc

    def __str__(self):
        return {"gfp": f"GF({self.p})", "q": "Q", "qsqrt": f"Q(sqrt {self.d})"}[self.kind]

    # elements -----------------------------------------------------------

    def elem(self, raw: Any):
        """Canonical element from an int, Fraction, QSqrt, "n/d" string or pair."""
        if self.kind == "gfp":
            if isinstance(raw, bool):
                raise FieldError(f"not a residue: {raw!r}")
            if isinstance(raw, int):
                return raw % self.p
            q = _rational(raw)
            if q.denominator % self.p == 0:
                raise FieldError(f"denominator divisible by {self.p}")
            return q.numerator * pow(q.denominator, -1, self.p) % self.p
        if self.kind == "q":
            if isinstance(raw, QSqrt):
                raise FieldError("irrational value in Q")
            return _rational(raw)
        if isinstance(raw, QSqrt):
            if raw.d != self.d:
                raise FieldError(f"element of Q(sqrt {raw.d}) used in {self}")
            return raw
        if isinstance(raw, (tuple, list)):
            # always (a, b) meaning a + b*sqrt(d); components may themselves be pairs
            if len(raw) != 2:
                raise FieldError(f"expected (a, b), got {raw!r}")
            return QSqrt(_rational(raw[0]), _rational(raw[1]), self.d)
        return QSqrt(_rational(raw), Fraction(0), self.d)

    @property
    def zero(self):
        return self.elem(0)

    @property
    def one(self):
        return self.elem(1)

    def sqrt_d(self) -> QSqrt:
        if self.kind != "qsqrt":
            raise FieldError(f"{self} has no distinguished square root")
        return QSqrt(Fraction(0), Fraction(1), self.d)

    def add(self, x, y):
        return (x + y) % self.p if self.kind == "gfp" else x + y

    def sub(self, x, y):
        return (x - y) % self.p if self.kind == "gfp" else x - y

    def neg(self, x):
        return -x % self.p if self.kind == "gfp" else -x

    def mul(self, x, y):
        return x * y % self.p if self.kind == "gfp" else x * y

    def inv(self, x):
        if self.kind == "gfp":
            if x % self.p == 0:
                raise ZeroDivisionError("inverse of zero in GF(p)")
            return pow(x, -1, self.p)
        if self.kind == "q":
            return 1 / x
        return x.inverse()

    def div(self, x, y):
        return self.mul(x, self.inv(y))

    def elements(self) -> range:
        if self.kind != "gfp":
            raise FieldError(f"{self} is infinite")
        return range(self.p)

    # serialization ------------------------------------------------------

    def encode(self, x) -> Any:
        if self.kind == "gfp":
            return int(x)
        if self.kind == "q":
            return f"{x.numerator}/{x.denominator}"
        return [f"{x.a.numerator}/{x.a.denominator}", f"{x.b.numerator}/{x.b.denominator}"]

    def decode(self, obj: Any):
        """Strict inverse of :meth:`encode`; rejects non-canonical residues."""
        try:
            if self.kind == "gfp":
                if not isinstance(obj, int) or isinstance(obj, bool) or not 0 <= obj < self.p:
                    raise MalformedInput(f"non-canonical residue {obj!r} for {self}")
                return obj
            if self.kind == "q":
                if not isinstance(obj, (str, int)) or isinstance(obj, bool):
                    raise MalformedInput(f"bad rational {obj!r}")
                return _rational(obj)
            if not isinstance(obj, list) or len(obj) != 2:
                raise MalformedInput(f"bad Q(sqrt d) entry {obj!r}")
            return QSqrt(_rational(obj[0]), _rational(obj[1]), self.d)
        except FieldError as exc:
            raise MalformedInput(str(exc)) from exc


def normalize_elem(raw: Any, F: FieldSpec):
    return F.elem(raw)


# ---------------------------------------------------------------------------
# matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConcreteMatrix:
    rows: int
    cols: int
    entries: tuple
    field: FieldSpec = field(compare=True)

    def __post_init__(self):
        if len(self.entries) != self.rows * self.cols:
            raise ValueError(f"{len(self.entries)} entries for a {self.rows}x{self.cols} matrix")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Any]], F: FieldSpec, cols: int | None = None) -> ConcreteMatrix:
        rows = [list(r) for r in rows]
        ncols = len(rows[0]) if rows else (cols or 0)
        if any(len(r) != ncols for r in rows):
            raise ValueError("ragged rows")
        return cls(len(rows), ncols, tuple(F.elem(x) for r in rows for x in r), F)

    @classmethod
    def zeros(cls, rows: int, cols: int, F: FieldSpec) -> ConcreteMatrix:
        return cls(rows, cols, (F.zero,) * (rows * cols), F)

    @classmethod
    def identity(cls, n: int, F: FieldSpec) -> ConcreteMatrix:
        return cls.from_rows([[int(i == j) for j in range(n)] for i in range(n)], F, cols=n)

    def __getitem__(self, ij: tuple[int, int]):
        i, j = ij
        return self.entries[i * self.cols + j]

    def to_rows(self) -> list[list]:
        c = self.cols
        return [list(self.entries[i * c:(i + 1) * c]) for i in range(self.rows)]

    def transpose(self) -> ConcreteMatrix:
        return ConcreteMatrix(
            self.cols, self.rows,
            tuple(self[i, j] for j in range(self.cols) for i in range(self.rows)),
            self.field,
        )

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> ConcreteMatrix:
        return ConcreteMatrix(len(rows), len(cols), tuple(self[i, j] for i in rows for j in cols), self.field)

    def is_zero(self) -> bool:
        return not any(self.entries)

    def to_json(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "field": self.field.to_json(),
            "entries": [self.field.encode(x) for x in self.entries],
        }

    @classmethod
    def from_json(cls, obj: Any) -> ConcreteMatrix:
        try:
            F = FieldSpec.from_json(obj["field"])
            rows, cols, raw = obj["rows"], obj["cols"], obj["entries"]
        except (KeyError, TypeError) as exc:
            raise MalformedInput(f"matrix object missing {exc}") from exc
        if not isinstance(raw, list) or len(raw) != rows * cols:
            raise MalformedInput(f"expected {rows}*{cols} entries")
        return cls(rows, cols, tuple(F.decode(x) for x in raw), F)


# ---------------------------------------------------------------------------
# elimination
# ---------------------------------------------------------------------------


def _rref_modp(rows: list[list[int]], p: int, ncols: int | None = None) -> list[int]:
    """Reduced row echelon form in place over GF(p); pivots searched in the first ``ncols`` columns."""
    nrows = len(rows)
    width = len(rows[0]) if rows else 0
    ncols = width if ncols is None else ncols
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r == nrows:
            break
        piv = next((i for i in range(r, nrows) if rows[i][c] % p), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = pow(rows[r][c], -1, p)
        prow = [x * inv % p for x in rows[r]]
        rows[r] = prow
        for i in range(nrows):
            if i != r:
                f = rows[i][c] % p
                if f:
                    rows[i] = [(x - f * y) % p for x, y in zip(rows[i], prow)]
        pivots.append(c)
        r += 1
    return pivots


def _rref_generic(rows: list[list], F: FieldSpec, ncols: int | None = None) -> list[int]:
    nrows = len(rows)
    width = len(rows[0]) if rows else 0
    ncols = width if ncols is None else ncols
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r == nrows:
            break
        piv = next((i for i in range(r, nrows) if rows[i][c]), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = F.inv(rows[r][c])
        prow = [x * inv for x in rows[r]]
        rows[r] = prow
        for i in range(nrows):
            if i != r:
                f = rows[i][c]
                if f:
                    rows[i] = [x - f * y for x, y in zip(rows[i], prow)]
        pivots.append(c)
        r += 1
    return pivots


def rref(rows: Sequence[Sequence], F: FieldSpec, ncols: int | None = None) -> tuple[list[list], list[int]]:
    """Return (reduced rows, pivot columns); pivot rule is first nonzero in column order."""
    work = [list(r) for r in rows]
    if F.kind == "gfp":
        pivots = _rref_modp(work, F.p, ncols)
    else:
        pivots = _rref_generic(work, F, ncols)
    return work, pivots


def _bareiss_rank(rows: list[list], exact_div) -> int:
    nrows = len(rows)
    ncols = len(rows[0]) if rows else 0
    prev = 1
    r = 0
    for c in range(ncols):
        if r == nrows:
            break
        piv = next((i for i in range(r, nrows) if rows[i][c]), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        pr = rows[r]
        pc = pr[c]
        for i in range(r + 1, nrows):
            row = rows[i]
            f = row[c]
            for j in range(c + 1, ncols):
                row[j] = exact_div(pc * row[j] - f * pr[j], prev)
            row[c] = 0
        prev = pc
        r += 1
    return r


def _int_div(x: int, y: int) -> int:
    q, rem = divmod(x, y)
    assert rem == 0, "Bareiss division must be exact"
    return q


def _clear_denominators(row: list) -> list:
    """Scale a row of Fractions / QSqrt so every rational component is an integer."""
    dens = []
    for x in row:
        if isinstance(x, QSqrt):
            dens += [x.a.denominator, x.b.denominator]
        else:
            dens.append(Fraction(x).denominator)
    lcm = math.lcm(*dens) if dens else 1
    if isinstance(row[0], QSqrt) if row else False:
        return [x * lcm for x in row]
    return [int(Fraction(x) * lcm) for x in row]


def matrix_rank(M: ConcreteMatrix) -> int:
    """Rank over ``M.field``; fraction-free (Bareiss) over Q and Q(sqrt d)."""
    if M.rows == 0 or M.cols == 0:
        return 0
    F = M.field
    if F.kind == "gfp":
        rows = M.to_rows()
        return len(_rref_modp(rows, F.p))
    rows = [_clear_denominators(r) for r in M.to_rows()]
    if F.kind == "q":
        return _bareiss_rank(rows, _int_div)
    return _bareiss_rank(rows, lambda x, y: x / y)


def rank_of_rows(rows: Sequence[Sequence], F: FieldSpec) -> int:
    if not rows:
        return 0
    return len(rref(rows, F)[1])


def determinant(M: ConcreteMatrix):
    if M.rows != M.cols:
        raise ValueError("determinant of a non-square matrix")
    F = M.field
    rows = M.to_rows()
    n = M.rows
    det = F.one
    for c in range(n):
        piv = next((i for i in range(c, n) if rows[i][c]), None)
        if piv is None:
            return F.zero
        if piv != c:
            rows[c], rows[piv] = rows[piv], rows[c]
            det = F.neg(det)
        pc = rows[c][c]
        det = F.mul(det, pc)
        inv = F.inv(pc)
        for i in range(c + 1, n):
            f = rows[i][c]
            if f:
                f = F.mul(f, inv)
                rows[i] = [F.sub(x, F.mul(f, y)) for x, y in zip(rows[i], rows[c])]
    return det


def rank_factorization(M: ConcreteMatrix) -> tuple[list[list], list[list]]:
    """Split M = L @ U with L = pivot columns of M and U = nonzero rows of rref(M).

    Returns (columns of L, rows of U); both lists have length rank(M).
    """
    F = M.field
    R, pivots = rref(M.to_rows(), F)
    lcols = [[M[i, c] for i in range(M.rows)] for c in pivots]
    urows = [R[t] for t in range(len(pivots))]
    return lcols, urows


# ---------------------------------------------------------------------------
# affine systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineSolutionSpace:
    ambient_dim: int
    status: str
    particular: tuple | None
    basis: tuple[tuple, ...]
    field: FieldSpec

    @property
    def nonempty(self) -> bool:
        return self.status == "nonempty"

    @property
    def dimension(self) -> int:
        return len(self.basis) if self.nonempty else -1

    def point(self, coeffs: Sequence) -> tuple:
        """particular + sum(coeffs[i] * basis[i])."""
        if not self.nonempty:
            raise ValueError("empty solution space has no points")
        F = self.field
        x = list(self.particular)
        for c, b in zip(coeffs, self.basis, strict=True):
            if c:
                x = [F.add(xi, F.mul(c, bi)) for xi, bi in zip(x, b)]
        return tuple(x)

    def contains(self, x: Sequence) -> bool:
        """Membership test via the span of the basis, independent of the defining system."""
        if not self.nonempty or len(x) != self.ambient_dim:
            return False
        F = self.field
        diff = [F.sub(F.elem(a), b) for a, b in zip(x, self.particular)]
        if not any(diff):
            return True
        return rank_of_rows(list(self.basis) + [diff], F) == len(self.basis)


def solve_affine(coeffs: ConcreteMatrix, rhs: Sequence, F: FieldSpec | None = None) -> AffineSolutionSpace:
    """Full solution set of ``coeffs @ x = rhs``."""
    F = F or coeffs.field
    if len(rhs) != coeffs.rows:
        raise ValueError(f"rhs has length {len(rhs)}, expected {coeffs.rows}")
    n = coeffs.cols
    aug = [row + [F.elem(b)] for row, b in zip(coeffs.to_rows(), rhs)]
    if not aug:
        return AffineSolutionSpace(n, "nonempty", (F.zero,) * n, _unit_basis(n, F), F)
    R, pivots = rref(aug, F, ncols=n)
    rank = len(pivots)
    if any(R[i][n] for i in range(rank, len(R))):
        return AffineSolutionSpace(n, "empty", None, (), F)
    particular = [F.zero] * n
    for t, c in enumerate(pivots):
        particular[c] = R[t][n]
    pivset = set(pivots)
    basis = []
    for f in range(n):
        if f in pivset:
            continue
        v = [F.zero] * n
        v[f] = F.one
        for t, c in enumerate(pivots):
            v[c] = F.neg(R[t][f])
        basis.append(tuple(v))
    return AffineSolutionSpace(n, "nonempty", tuple(particular), tuple(basis), F)


def _unit_basis(n: int, F: FieldSpec) -> tuple[tuple, ...]:
    return tuple(tuple(F.one if i == j else F.zero for j in range(n)) for i in range(n))


def satisfies(coeffs: ConcreteMatrix, rhs: Sequence, x: Sequence) -> bool:
    F = coeffs.field
    for i in range(coeffs.rows):
        acc = F.zero
        for j in range(coeffs.cols):
            acc = F.add(acc, F.mul(coeffs[i, j], x[j]))
        if acc != F.elem(rhs[i]):
            return False
    return True


def vector(values: Iterable, F: FieldSpec) -> tuple:
    return tuple(F.elem(v) for v in values)
