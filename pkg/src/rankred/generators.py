"""Seeded random instances for property suites and experiment scripts."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable

from .fields import ConcreteMatrix, FieldSpec, rank_of_rows
from .minrank import build_matrix
from .ranklab import SliceFamily, realize
from .syslang import Equation, PolyFormula, QuadraticSystem, check_assumptions, solve_bruteforce
from .tensorize import Expansion, RankOneTerm, Tensor, expansion_sum


@dataclass(frozen=True)
class SystemConfig:
    max_m: int = 3
    max_vars: int = 4
    max_const: int = 3
    max_matrix_vars: int = 10  # cap on variables of the built matrix (originals + copies)
    kind_weights: tuple[float, float, float, float] = (1.0, 2.0, 1.5, 3.0)  # ADD, MUL, COPY, CONST


def random_equation(rng: random.Random, names: list[str], cfg: SystemConfig) -> Equation:
    kind = rng.choices(("ADD", "MUL", "COPY", "CONST"), weights=cfg.kind_weights)[0]
    if kind == "CONST":
        return Equation.const(rng.choice(names), rng.randint(0, cfg.max_const))
    if kind == "COPY":
        c, a = rng.sample(names, 2)
        return Equation.copy(c, a)
    c, a, b = rng.sample(names, 3)
    return Equation(kind, c, a, b)


def random_normalized_system(
    rng: random.Random, cfg: SystemConfig = SystemConfig(), accept: Callable[[QuadraticSystem], bool] | None = None
) -> QuadraticSystem:
    """Rejection-sample a system that already satisfies A1-A3 (no copies added).

    Variables are drawn from a pool of ``max_vars`` names; the returned system
    lists only the variables it uses, in pool order.  ``accept`` can further
    filter candidates, e.g. to balance solvable and unsolvable instances.
    """
    pool = [f"x{i}" for i in range(cfg.max_vars)]
    while True:
        m = rng.randint(1, cfg.max_m)
        eqs = []
        for _ in range(m):
            e = random_equation(rng, pool, cfg)
            if e.kind == "MUL" and rng.random() < 0.8:
                # give the multiplier its COPY partner so A3 has a chance to hold
                z = rng.choice([v for v in pool if v not in e.slots()])
                eqs.append(e)
                eqs.append(Equation.copy(e.b, z))
            else:
                eqs.append(e)
        eqs = eqs[: cfg.max_m]
        rng.shuffle(eqs)
        used = {v for e in eqs for v in e.slots()}
        s = QuadraticSystem(tuple(v for v in pool if v in used), tuple(eqs))
        if check_assumptions(s):
            continue
        if build_matrix(s).n > cfg.max_matrix_vars:
            continue
        if accept is not None and not accept(s):
            continue
        return s


def balanced_systems(rng: random.Random, count: int, F: FieldSpec, cfg: SystemConfig = SystemConfig()):
    """``count`` systems alternating between solvable and unsolvable over GF(p).

    Every other solvable one contains a MUL equation.  (Within three equations
    on four variables a system with a MUL and its COPY partner is always
    solvable, so multiplications only appear on the solvable side.)
    """
    out = []
    for i in range(count):
        want = i % 2 == 0
        need_mul = i % 4 == 0

        def accept(s, want=want, need_mul=need_mul):
            if need_mul and not any(e.kind == "MUL" for e in s.equations):
                return False
            return (solve_bruteforce(s, F) is not None) == want

        out.append(random_normalized_system(rng, cfg, accept))
    return out


def random_formula(rng: random.Random, n_vars: int = 2, n_eqs: int = 2, max_deg: int = 2) -> PolyFormula:
    """Small polynomial system with integer coefficients in -2..2."""
    names = [f"v{i}" for i in range(n_vars)]
    eqs = []
    for _ in range(n_eqs):
        sides = []
        for _side in range(2):
            poly = {}
            for _t in range(rng.randint(0, 2)):
                mono = {}
                for _f in range(rng.randint(0, max_deg)):
                    v = rng.choice(names)
                    mono[v] = mono.get(v, 0) + 1
                key = tuple(sorted(mono.items()))
                c = poly.get(key, 0) + rng.choice((-2, -1, 1, 2))
                if c:
                    poly[key] = c
                else:
                    poly.pop(key, None)
            sides.append(poly)
        eqs.append((sides[0], sides[1]))
    used = {v for l, r in eqs for p in (l, r) for mono in p for v, _ in mono}
    return PolyFormula(tuple(v for v in names if v in used), tuple(eqs))


def random_system(rng: random.Random, n_vars: int = 3, m: int = 3, max_const: int = 3) -> QuadraticSystem:
    """Unconstrained quadratic system (repeats and shared pairs allowed)."""
    names = [f"y{i}" for i in range(n_vars)]
    eqs = []
    for _ in range(m):
        kind = rng.choice(("ADD", "MUL", "COPY", "CONST"))
        if kind == "CONST":
            eqs.append(Equation.const(rng.choice(names), rng.randint(-max_const, max_const)))
        elif kind == "COPY":
            eqs.append(Equation.copy(rng.choice(names), rng.choice(names)))
        else:
            eqs.append(Equation(kind, rng.choice(names), rng.choice(names), rng.choice(names)))
    used = {v for e in eqs for v in e.slots()}
    return QuadraticSystem(tuple(v for v in names if v in used), tuple(eqs))


def random_vector(rng: random.Random, d: int, F: FieldSpec, nonzero: bool = False) -> tuple:
    while True:
        v = tuple(rng.randrange(F.p) for _ in range(d))
        if not nonzero or any(v):
            return v


def random_term(rng: random.Random, dims, F: FieldSpec):
    return RankOneTerm(*(random_vector(rng, d, F, nonzero=True) for d in dims))


def random_absorption_instance(rng: random.Random, F: FieldSpec, dims=(3, 3, 4), extra: int = 3, pinned: int = 1):
    """(T, E, H): a verified expansion E of T whose frontal slices t[:, :, h], h in H,
    are linearly independent rank-one matrices.

    The pinned terms carry w = e_h plus noise on the other coordinates, the
    extra terms have w_h = 0 for h in H, and the term order is shuffled so the
    pivot is rarely already in front.
    """
    d1, d2, d3 = dims
    while True:
        H = rng.sample(range(d3), pinned)
        terms = []
        for h in H:
            t = random_term(rng, dims, F)
            w = [rng.randrange(F.p) for _ in range(d3)]
            for g in H:
                w[g] = 1 if g == h else 0
            terms.append(RankOneTerm(t.u, t.v, tuple(w)))
        mats = [[a * b % F.p for a in t.u for b in t.v] for t in terms]
        if rank_of_rows(mats, F) != pinned:
            continue
        for _ in range(extra):
            t = random_term(rng, dims, F)
            w = list(t.w)
            for h in H:
                w[h] = 0
            terms.append(RankOneTerm(t.u, t.v, tuple(w)))
        rng.shuffle(terms)
        E = Expansion(tuple(terms), F)
        T = Tensor(tuple(dims), F, expansion_sum(dims, E))
        return T, Expansion(E.terms, F, T.digest()), H


def random_realization_instance(rng: random.Random, F: FieldSpec, dims=(3, 3, 3), r: int = 3):
    """(S, ws, T): r random rank-one matrices, random third-mode vectors and their tensor."""
    d1, d2, d3 = dims
    mats = []
    for _ in range(r):
        u, v = random_vector(rng, d1, F, nonzero=True), random_vector(rng, d2, F, nonzero=True)
        mats.append(ConcreteMatrix.from_rows([[a * b % F.p for b in v] for a in u], F, cols=d2))
    S = SliceFamily(tuple(mats), F)
    ws = [random_vector(rng, d3, F) for _ in range(r)]
    return S, ws, realize(S, ws, dims)
