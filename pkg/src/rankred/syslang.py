"""Polynomial-equation source language, quadratization and A1-A3 normalization.

Source text is a sequence of ``eq <poly> = <poly>;`` statements.  Parsing yields
a :class:`PolyFormula`; :func:`quadratize` turns it into a
:class:`QuadraticSystem` built from the four equation kinds ADD, MUL, COPY and
CONST; :func:`normalize` then inserts COPY equations until the structural
assumptions A1-A3 hold.

Fresh variables are named ``<base>#k``.  ``#`` starts a comment in the source
language, so no source identifier can capture a generated name.
"""

from __future__ import annotations

import itertools
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Iterator, Mapping, Sequence

from .errors import BudgetExceeded, MalformedInput, ParseError
from .fields import FieldSpec

DEFAULT_BUDGET = 2**28

Monomial = tuple  # sorted tuple of (variable, exponent) pairs
Poly = dict  # Monomial -> nonzero int coefficient, insertion ordered


# ---------------------------------------------------------------------------
# polynomials
# ---------------------------------------------------------------------------


def _padd(p: Poly, q: Poly, sign: int = 1) -> Poly:
    out = dict(p)
    for mono, c in q.items():
        v = out.get(mono, 0) + sign * c
        if v:
            out[mono] = v
        else:
            out.pop(mono, None)
    return out


def _mono_mul(m1: Monomial, m2: Monomial) -> Monomial:
    exps = dict(m1)
    for v, e in m2:
        exps[v] = exps.get(v, 0) + e
    return tuple(sorted(exps.items()))


def _pmul(p: Poly, q: Poly) -> Poly:
    out: Poly = {}
    for (m1, c1), (m2, c2) in itertools.product(p.items(), q.items()):
        mono = _mono_mul(m1, m2)
        v = out.get(mono, 0) + c1 * c2
        if v:
            out[mono] = v
        else:
            out.pop(mono, None)
    return out


def _ppow(p: Poly, e: int) -> Poly:
    out: Poly = {(): 1}
    for _ in range(e):
        out = _pmul(out, p)
    return out


def _const(k: int) -> Poly:
    return {(): k} if k else {}


def _var(name: str) -> Poly:
    return {((name, 1),): 1}


def poly_to_str(p: Poly) -> str:
    if not p:
        return "0"
    parts = []
    for mono, c in p.items():
        factors = [v if e == 1 else f"{v}^{e}" for v, e in mono]
        if not factors:
            parts.append(str(c))
        elif c == 1:
            parts.append("*".join(factors))
        else:
            parts.append("*".join([str(c)] + factors))
    return " + ".join(parts)


@dataclass(frozen=True)
class PolyFormula:
    """A conjunction of polynomial equations ``lhs = rhs`` with integer coefficients."""

    variables: tuple[str, ...]
    equations: tuple[tuple[Poly, Poly], ...]

    def __post_init__(self):
        known = set(self.variables)
        for lhs, rhs in self.equations:
            for poly in (lhs, rhs):
                for mono, c in poly.items():
                    if not isinstance(c, int):
                        raise ValueError(f"non-integer coefficient {c!r}")
                    for v, e in mono:
                        if v not in known:
                            raise ValueError(f"variable {v!r} missing from the variable list")
                        if e < 0:
                            raise ValueError("negative exponent")

    def __str__(self):
        return "\n".join(f"eq {poly_to_str(l)} = {poly_to_str(r)};" for l, r in self.equations)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>\#[^\n]*)|(?P<num>\d+)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*^()=;])"
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unknown token {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, line_start = line + 1, m.end()
        elif kind == "ident" and m.group() == "eq":
            toks.append(_Tok("eq", "eq", line, pos - line_start + 1))
        elif kind in ("num", "ident", "op"):
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("end", "", line, pos - line_start + 1))
    return toks


class _Parser:
    # stmt  := 'eq' poly '=' poly ';'
    # poly  := ['-'] term (('+'|'-') term)*
    # term  := factor ('*' factor)*
    # factor:= atom ['^' NUM]
    # atom  := NUM | IDENT | '(' poly ')' | '-' atom

    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.variables: list[str] = []

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, msg: str):
        t = self.tok
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise ParseError(f"{msg}, found {found}", t.line, t.col)

    def expect(self, text: str):
        if self.tok.text != text or self.tok.kind == "end":
            self.fail(f"expected {text!r}")
        self.i += 1

    def program(self) -> PolyFormula:
        eqs = []
        while self.tok.kind != "end":
            if self.tok.kind != "eq":
                self.fail("expected 'eq'")
            self.i += 1
            lhs = self.poly()
            self.expect("=")
            rhs = self.poly()
            self.expect(";")
            eqs.append((lhs, rhs))
        if not eqs:
            raise ParseError("empty equation list", self.tok.line, self.tok.col)
        return PolyFormula(tuple(self.variables), tuple(eqs))

    def poly(self) -> Poly:
        acc = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            sign = 1 if self.tok.text == "+" else -1
            self.i += 1
            acc = _padd(acc, self.term(), sign)
        return acc

    def term(self) -> Poly:
        acc = self.factor()
        while self.tok.text == "*" and self.tok.kind == "op":
            self.i += 1
            acc = _pmul(acc, self.factor())
        return acc

    def factor(self) -> Poly:
        base = self.atom()
        if self.tok.text == "^" and self.tok.kind == "op":
            self.i += 1
            if self.tok.kind != "num":
                self.fail("expected exponent")
            e = int(self.tok.text)
            self.i += 1
            base = _ppow(base, e)
        return base

    def atom(self) -> Poly:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return _const(int(t.text))
        if t.kind == "ident":
            self.i += 1
            if t.text not in self.variables:
                self.variables.append(t.text)
            return _var(t.text)
        if t.kind == "op" and t.text == "(":
            self.i += 1
            p = self.poly()
            self.expect(")")
            return p
        if t.kind == "op" and t.text == "-":
            self.i += 1
            return _padd({}, self.atom(), -1)
        self.fail("expected a number, identifier or '('")


def parse_source(text: str) -> PolyFormula:
    """Parse source text; variables are listed in first-mention order."""
    return _Parser(text).program()


# ---------------------------------------------------------------------------
# quadratic systems
# ---------------------------------------------------------------------------

KINDS = ("ADD", "MUL", "COPY", "CONST")


@dataclass(frozen=True)
class Equation:
    """ADD: c = a + b, MUL: c = a * b, COPY: c = a, CONST: c = K."""

    kind: str
    c: str
    a: str | None = None
    b: str | None = None
    K: int | None = None

    @classmethod
    def add(cls, c: str, a: str, b: str) -> Equation:
        return cls("ADD", c, a, b)

    @classmethod
    def mul(cls, c: str, a: str, b: str) -> Equation:
        return cls("MUL", c, a, b)

    @classmethod
    def copy(cls, c: str, a: str) -> Equation:
        return cls("COPY", c, a)

    @classmethod
    def const(cls, c: str, K: int) -> Equation:
        return cls("CONST", c, K=K)

    def slots(self) -> tuple[str, ...]:
        """Variable occurrences in (c, a, b) order."""
        if self.kind in ("ADD", "MUL"):
            return (self.c, self.a, self.b)
        if self.kind == "COPY":
            return (self.c, self.a)
        return (self.c,)

    def with_slot(self, i: int, name: str) -> Equation:
        return replace(self, **{("c", "a", "b")[i]: name})

    def __str__(self):
        if self.kind == "ADD":
            return f"{self.c} = {self.a} + {self.b}"
        if self.kind == "MUL":
            return f"{self.c} = {self.a} * {self.b}"
        if self.kind == "COPY":
            return f"{self.c} = {self.a}"
        return f"{self.c} = {self.K}"

    def to_json(self) -> dict:
        if self.kind == "CONST":
            return {"kind": "CONST", "c": self.c, "K": self.K}
        obj = {"kind": self.kind, "c": self.c, "a": self.a}
        if self.kind != "COPY":
            obj["b"] = self.b
        return obj

    @classmethod
    def from_json(cls, obj: Any) -> Equation:
        if not isinstance(obj, dict) or obj.get("kind") not in KINDS:
            raise MalformedInput(f"bad equation record {obj!r}")
        kind = obj["kind"]
        try:
            if kind == "CONST":
                if not isinstance(obj["K"], int) or isinstance(obj["K"], bool):
                    raise MalformedInput("CONST needs an integer K")
                return cls.const(obj["c"], obj["K"])
            if kind == "COPY":
                return cls.copy(obj["c"], obj["a"])
            return cls(kind, obj["c"], obj["a"], obj["b"])
        except KeyError as exc:
            raise MalformedInput(f"equation record missing {exc}") from exc


@dataclass(frozen=True)
class QuadraticSystem:
    variables: tuple[str, ...]
    equations: tuple[Equation, ...]

    def __post_init__(self):
        if len(set(self.variables)) != len(self.variables):
            raise ValueError("duplicate variable names")
        known = set(self.variables)
        for e in self.equations:
            for v in e.slots():
                if v not in known:
                    raise ValueError(f"variable {v!r} of '{e}' missing from the variable list")

    @property
    def m(self) -> int:
        return len(self.equations)

    def occurring(self) -> list[str]:
        """Variables that appear in at least one equation, in variable order."""
        used = {v for e in self.equations for v in e.slots()}
        return [v for v in self.variables if v in used]

    def __str__(self):
        return "\n".join(str(e) for e in self.equations)

    def to_json(self) -> dict:
        return {"variables": list(self.variables), "equations": [e.to_json() for e in self.equations]}

    @classmethod
    def from_json(cls, obj: Any) -> QuadraticSystem:
        try:
            variables, eqs = obj["variables"], obj["equations"]
        except (KeyError, TypeError) as exc:
            raise MalformedInput(f"system object missing {exc}") from exc
        try:
            return cls(tuple(variables), tuple(Equation.from_json(e) for e in eqs))
        except ValueError as exc:
            raise MalformedInput(str(exc)) from exc


class _Fresh:
    def __init__(self, used: Sequence[str]):
        self.used = set(used)
        self.counters: dict[str, int] = {}
        self.introduced: list[str] = []

    def __call__(self, base: str) -> str:
        base = base.split("#", 1)[0] or "t"
        k = self.counters.get(base, 0)
        while True:
            k += 1
            name = f"{base}#{k}"
            if name not in self.used:
                break
        self.counters[base] = k
        self.used.add(name)
        self.introduced.append(name)
        return name


# ---------------------------------------------------------------------------
# quadratization
# ---------------------------------------------------------------------------


def _single_var(p: Poly) -> str | None:
    if len(p) == 1:
        (mono, c), = p.items()
        if c == 1 and len(mono) == 1 and mono[0][1] == 1:
            return mono[0][0]
    return None


def _constant(p: Poly) -> int | None:
    if not p:
        return 0
    if len(p) == 1 and () in p:
        return p[()]
    return None


class _Quadratizer:
    def __init__(self, variables: Sequence[str]):
        self.fresh = _Fresh(variables)
        self.out: list[Equation] = []

    def operand(self, mono: Monomial, c: int) -> str:
        if c == 1 and len(mono) == 1 and mono[0][1] == 1:
            return mono[0][0]
        t = self.fresh("t")
        self.term_into(t, mono, c)
        return t

    def term_into(self, dest: str, mono: Monomial, c: int):
        if not mono:
            self.out.append(Equation.const(dest, c))
            return
        factors = [v for v, e in mono for _ in range(e)]
        if c != 1:
            k = self.fresh("t")
            self.out.append(Equation.const(k, c))
            factors.insert(0, k)
        if len(factors) == 1:
            self.out.append(Equation.copy(dest, factors[0]))
            return
        acc = factors[0]
        for f in factors[1:-1]:
            t = self.fresh("t")
            self.out.append(Equation.mul(t, acc, f))
            acc = t
        self.out.append(Equation.mul(dest, acc, factors[-1]))

    def poly_into(self, dest: str, p: Poly):
        if not p:
            self.out.append(Equation.const(dest, 0))
            return
        items = list(p.items())
        if len(items) == 1:
            (mono, c), = items
            self.term_into(dest, mono, c)
            return
        ops = [self.operand(mono, c) for mono, c in items]
        acc = ops[0]
        for o in ops[1:-1]:
            t = self.fresh("t")
            self.out.append(Equation.add(t, acc, o))
            acc = t
        self.out.append(Equation.add(dest, acc, ops[-1]))

    def equation(self, lhs: Poly, rhs: Poly):
        v = _single_var(lhs)
        if v is not None:
            self.poly_into(v, rhs)
            return
        w = _single_var(rhs)
        if w is not None:
            self.poly_into(w, lhs)
            return
        t = self.fresh("t")
        if _constant(lhs) is not None and _constant(rhs) is None:
            lhs, rhs = rhs, lhs
        self.poly_into(t, lhs)
        self.poly_into(t, rhs)


def quadratize(f: PolyFormula) -> QuadraticSystem:
    """Rewrite polynomial equations into ADD/MUL/COPY/CONST equations.

    The result is solvable over a field exactly when ``f`` is; it keeps every
    original variable and appends introduced ``t#k`` temporaries.  It does not
    yet satisfy A1-A3 (see :func:`normalize`).
    """
    q = _Quadratizer(f.variables)
    for lhs, rhs in f.equations:
        q.equation(lhs, rhs)
    return QuadraticSystem(tuple(f.variables) + tuple(q.fresh.introduced), tuple(q.out))


# ---------------------------------------------------------------------------
# assumptions A1-A3
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    assumption: str
    equations: tuple[int, ...]  # 1-based
    variable: str

    def __str__(self):
        where = ", ".join(f"e_{i}" for i in self.equations)
        return f"{self.assumption} violated at {where} on {self.variable}"


def _a3_ok(eqs: Sequence[Equation], idx: int, occ: Mapping[str, list[int]]) -> bool:
    v = eqs[idx].b
    places = occ[v]
    if len(places) != 2:
        return False
    other = places[0] if places[1] == idx else places[1]
    if other == idx:
        return False
    e = eqs[other]
    return e.kind == "COPY" and e.c == v


def _occurrences(eqs: Sequence[Equation]) -> dict[str, list[int]]:
    occ: dict[str, list[int]] = {}
    for i, e in enumerate(eqs):
        for v in e.slots():
            occ.setdefault(v, []).append(i)
    return occ


ASSUMPTIONS = ("A1", "A2", "A3")
STRUCTURAL = ("A1", "A3")


def check_assumptions(s: QuadraticSystem, assumptions: Sequence[str] = ASSUMPTIONS) -> list[Violation]:
    """All violations of the requested assumptions (empty list means the system passes).

    A1: no variable twice in one equation.  A2: two equations share at most one
    variable.  A3: for every MUL(w, u, v), ``v`` occurs exactly twice and its
    other occurrence is as ``c`` of a COPY(v, z).
    """
    eqs = s.equations
    out: list[Violation] = []
    if "A1" in assumptions:
        for i, e in enumerate(eqs):
            slots = e.slots()
            for v in dict.fromkeys(slots):
                if slots.count(v) > 1:
                    out.append(Violation("A1", (i + 1,), v))
    if "A2" in assumptions:
        for i, j in itertools.combinations(range(len(eqs)), 2):
            shared = [v for v in dict.fromkeys(eqs[i].slots()) if v in eqs[j].slots()]
            if len(shared) >= 2:
                out.extend(Violation("A2", (i + 1, j + 1), v) for v in shared)
    if "A3" in assumptions:
        occ = _occurrences(eqs)
        for i, e in enumerate(eqs):
            if e.kind == "MUL" and not _a3_ok(eqs, i, occ):
                others = tuple(k + 1 for k in dict.fromkeys(occ[e.b]) if k != i)
                out.append(Violation("A3", (i + 1,) + others, e.b))
    return out


def normalize(s: QuadraticSystem, fix_a2: bool = True) -> QuadraticSystem:
    """Insert COPY equations until A1, A2 and A3 hold.

    Equations are processed in order, fixing A1 then A2 for each; A3 is fixed in
    a final pass because it depends on global occurrence counts.  Copies are
    placed directly before the equation that needed them.

    * A1: a repeated ``x`` is routed through a hub, ``COPY(x#1, x)`` then
      ``COPY(x#k, x#1)``, so no copy shares two variables with the equation.
    * A2: of the slots shared with an earlier equation the first is kept and
      the later ones are replaced by fresh copies (a MUL's ``b`` goes first).
    * A3: ``MUL(w, u, v)`` becomes ``COPY(v#k, v), MUL(w, u, v#k)``.

    With ``fix_a2=False`` only A1 and A3 are enforced, which is enough for the
    matrix construction but not for the minrank equivalence.

    Each input equation costs at most three copies, so the output has at most
    ``4m`` equations and ``len(variables) + 3m`` variables.
    """
    fresh = _Fresh(s.variables)
    out: list[Equation] = []
    for e in s.equations:
        slots = e.slots()
        dup = [v for v in dict.fromkeys(slots) if slots.count(v) > 1]
        for v in dup:
            hub = fresh(v)
            out.append(Equation.copy(hub, v))
            idx = [i for i, x in enumerate(e.slots()) if x == v][1:]
            for i in idx:
                nv = fresh(v)
                out.append(Equation.copy(nv, hub))
                e = e.with_slot(i, nv)
        if fix_a2:
            for prev in list(out):
                cur = e.slots()
                shared = [i for i, v in enumerate(cur) if v in prev.slots()]
                for i in shared[1:]:
                    v = cur[i]
                    nv = fresh(v)
                    out.append(Equation.copy(nv, v))
                    e = e.with_slot(i, nv)
        out.append(e)

    eqs = out
    occ = _occurrences(eqs)
    out = []
    for i, e in enumerate(eqs):
        if e.kind == "MUL" and not _a3_ok(eqs, i, occ):
            nv = fresh(e.b)
            out.append(Equation.copy(nv, e.b))
            e = e.with_slot(2, nv)
        out.append(e)

    result = QuadraticSystem(tuple(s.variables) + tuple(fresh.introduced), tuple(out))
    bad = check_assumptions(result, ASSUMPTIONS if fix_a2 else STRUCTURAL)
    if bad:
        raise AssertionError(f"normalize left violations: {bad}")
    return result


# ---------------------------------------------------------------------------
# evaluation and brute force
# ---------------------------------------------------------------------------


def _holds(e: Equation, val: Mapping[str, Any], F: FieldSpec) -> bool:
    c = val[e.c]
    if e.kind == "ADD":
        return c == F.add(val[e.a], val[e.b])
    if e.kind == "MUL":
        return c == F.mul(val[e.a], val[e.b])
    if e.kind == "COPY":
        return c == val[e.a]
    return c == F.elem(e.K)


def eval_system(s: QuadraticSystem, sigma: Mapping[str, Any], F: FieldSpec) -> bool:
    """True iff every equation of ``s`` holds in F under ``sigma``."""
    missing = [v for v in s.variables if v not in sigma]
    if missing:
        raise KeyError(f"assignment misses {missing}")
    val = {v: F.elem(sigma[v]) for v in s.variables}
    return all(_holds(e, val, F) for e in s.equations)


def _search(s: QuadraticSystem, p: int, prefix: tuple[int, ...]) -> tuple[int, ...] | None:
    """Lexicographically first solution extending ``prefix`` (depth-first, residues ascending)."""
    F = FieldSpec.gf(p)
    order = list(s.variables)
    pos = {v: i for i, v in enumerate(order)}
    # equations become checkable once their last variable (in order) is assigned
    ready: list[list[Equation]] = [[] for _ in order]
    for e in s.equations:
        ready[max(pos[v] for v in e.slots())].append(e)
    n = len(order)
    val: dict[str, int] = {}

    def ok(i: int) -> bool:
        return all(_holds(e, val, F) for e in ready[i])

    for i, x in enumerate(prefix):
        val[order[i]] = x
        if not ok(i):
            return None

    def rec(i: int) -> bool:
        if i == n:
            return True
        name = order[i]
        for x in range(p):
            val[name] = x
            if ok(i) and rec(i + 1):
                return True
        del val[name]
        return False

    if rec(len(prefix)):
        return tuple(val[v] for v in order)
    return None


def solve_bruteforce(
    s: QuadraticSystem, F: FieldSpec, budget: int = DEFAULT_BUDGET, workers: int = 1
) -> dict[str, int] | None:
    """Lexicographically smallest solution over GF(p), or None.

    Order: variable order major, residues ascending.  ``p ** len(variables)``
    must not exceed ``budget``.
    """
    if not F.is_prime_field:
        raise ValueError("brute force needs a prime field")
    n = len(s.variables)
    if F.p**n > budget:
        raise BudgetExceeded(f"{F.p}^{n} assignments exceed the budget of {budget}")
    if n == 0:
        return {} if not s.equations else None
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_search, itertools.repeat(s), itertools.repeat(F.p), [(x,) for x in range(F.p)]))
        found = next((r for r in results if r is not None), None)
    else:
        found = _search(s, F.p, ())
    return None if found is None else dict(zip(s.variables, found))


def iter_assignments(variables: Sequence[str], F: FieldSpec) -> Iterator[dict[str, int]]:
    for values in itertools.product(F.elements(), repeat=len(variables)):
        yield dict(zip(variables, values))
