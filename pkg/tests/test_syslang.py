from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, strategies as st

from oracles import formula_solvable, solvable_by_loops
from rankred.errors import BudgetExceeded, ParseError
from rankred.fields import FieldSpec
from rankred.generators import random_formula, random_system
from rankred.syslang import (
    STRUCTURAL,
    Equation,
    QuadraticSystem,
    Violation,
    check_assumptions,
    eval_system,
    normalize,
    parse_source,
    quadratize,
    solve_bruteforce,
)

E = Equation
GF2, GF3, GF5, GF7 = (FieldSpec.gf(p) for p in (2, 3, 5, 7))
EX33 = QuadraticSystem(("u", "x", "y"), (E.mul("u", "x", "y"), E.copy("y", "x"), E.const("u", 2)))


# -- parsing ------------------------------------------------------------------


def test_parse_examples():
    f = parse_source("eq x^2 = 2;")
    assert f.variables == ("x",) and len(f.equations) == 1
    f = parse_source("eq u = x*y; eq y = x; eq u = 2;")
    assert f.variables == ("u", "x", "y") and len(f.equations) == 3


@pytest.mark.parametrize(
    "text, where",
    [("eq x = ;", (1, 8)), ("eq x = 1", (1, 9)), ("eq x = 1;\neq y = $;", (2, 8)), ("", (1, 1)), ("# only\n", (2, 1))],
)
def test_parse_errors_carry_position(text, where):
    with pytest.raises(ParseError) as info:
        parse_source(text)
    assert (info.value.line, info.value.column) == where


def test_parse_expands_products_and_powers():
    f = parse_source("eq (x + 1)^2 = x*x + 2*x + 1; # identity\n")
    lhs, rhs = f.equations[0]
    assert lhs == rhs


# -- quadratize ---------------------------------------------------------------


def test_quadratize_shapes():
    q = quadratize(parse_source("eq x^2 = 2;"))
    assert [e.kind for e in q.equations] == ["MUL", "CONST"]
    assert quadratize(parse_source("eq x = 1;")).equations == (E.const("x", 1),)
    q = quadratize(parse_source("eq u = x*y + 3;"))
    assert sorted(e.kind for e in q.equations) == ["ADD", "CONST", "MUL"]
    assert q.variables[:3] == ("u", "x", "y")


@pytest.mark.parametrize("src", ["eq x^2 = 2;", "eq u = x*y + 3;", "eq x^3 + x = 1;", "eq 2*x*y = y^2 - 1;"])
def test_quadratize_is_equisolvable_on_examples(src):
    f = parse_source(src)
    for p in (2, 3, 5, 7):
        assert solvable_by_loops(quadratize(f), p) == formula_solvable(f, p)


@given(st.integers(0, 10**9))
def test_quadratize_normalize_equisolvable(seed):
    rng = random.Random(seed)
    f = random_formula(rng, n_vars=2, n_eqs=2, max_deg=2)
    if not f.variables:
        return
    s = normalize(quadratize(f))
    for p in (2, 3):
        expected = formula_solvable(f, p)
        if p ** len(s.variables) <= 1 << 16:
            assert (solve_bruteforce(s, FieldSpec.gf(p)) is not None) == expected


def test_quadratized_solution_extends_original():
    f = parse_source("eq x^2 = 2;")
    s = normalize(quadratize(f))
    sol = solve_bruteforce(s, GF7)
    assert sol["x"] in (3, 4)


# -- assumptions --------------------------------------------------------------


def test_check_assumptions_examples():
    assert check_assumptions(QuadraticSystem(("t", "x"), (E.mul("t", "x", "x"),)))[0] == Violation("A1", (1,), "x")
    two_muls = QuadraticSystem(("w", "w2", "u", "v"), (E.mul("w", "u", "v"), E.mul("w2", "u", "v")))
    kinds = {(v.assumption, v.variable) for v in check_assumptions(two_muls)}
    assert ("A2", "u") in kinds and ("A2", "v") in kinds and ("A3", "v") in kinds


def test_example_system_violates_a2_only():
    # MUL(u,x,y) and COPY(y,x) share both x and y
    bad = check_assumptions(EX33)
    assert {v.assumption for v in bad} == {"A2"}
    assert {v.variable for v in bad} == {"x", "y"}
    assert check_assumptions(EX33, STRUCTURAL) == []


def test_a3_requires_copy_target():
    # v occurs twice but as the source of the COPY, not its target
    s = QuadraticSystem(("w", "u", "v", "z"), (E.mul("w", "u", "v"), E.copy("z", "v")))
    assert [x.assumption for x in check_assumptions(s)] == ["A3"]
    ok = QuadraticSystem(("w", "u", "v", "z"), (E.mul("w", "u", "v"), E.copy("v", "z")))
    assert check_assumptions(ok) == []


# -- normalize ----------------------------------------------------------------


def test_normalize_square():
    s = normalize(QuadraticSystem(("t", "x"), (E.mul("t", "x", "x"),)))
    assert check_assumptions(s) == []
    assert s.equations[-1] == E.mul("t", "x", "x#2")
    assert all(e.kind == "COPY" for e in s.equations[:-1])
    for p in (2, 3):
        assert solvable_by_loops(s, p)


def test_normalize_fixed_point():
    s = QuadraticSystem(("y", "x"), (E.copy("y", "x"),))
    assert normalize(s) == s


def test_normalize_example_system():
    full = normalize(EX33)
    assert check_assumptions(full) == []
    assert full.equations == (
        E.mul("u", "x", "y"),
        E.copy("x#1", "x"),
        E.copy("y", "x#1"),
        E.const("u", 2),
    )
    assert normalize(EX33, fix_a2=False) == EX33


def test_triple_repeat_needs_three_copies():
    # x = x + x: each extra name must avoid sharing two variables with the
    # equation and with every other copy, which takes a hub and two leaves
    s = normalize(QuadraticSystem(("x",), (E.add("x", "x", "x"),)))
    assert s.m == 4 and len(s.variables) == 4
    assert check_assumptions(s) == []


@given(st.integers(0, 10**9), st.integers(1, 4), st.integers(1, 5))
def test_normalize_properties(seed, n_vars, m):
    s = random_system(random.Random(seed), n_vars=n_vars, m=m)
    out = normalize(s)
    assert check_assumptions(out) == []
    assert normalize(out) == out
    assert out.variables[: len(s.variables)] == s.variables
    assert out.m <= 4 * s.m
    assert len(out.variables) <= len(s.variables) + 3 * s.m
    if len(out.variables) <= 9:
        for p in (2, 3):
            assert solvable_by_loops(out, p) == solvable_by_loops(s, p)
    structural = normalize(s, fix_a2=False)
    assert check_assumptions(structural, STRUCTURAL) == []


# -- evaluation and brute force ----------------------------------------------


def test_eval_examples():
    assert eval_system(EX33, {"u": 2, "x": 3, "y": 3}, GF7)
    assert not eval_system(EX33, {"u": 2, "x": 1, "y": 1}, GF7)
    assert eval_system(QuadraticSystem((), ()), {}, GF2)
    with pytest.raises(KeyError):
        eval_system(EX33, {"u": 2}, GF7)


def test_bruteforce_examples():
    assert solve_bruteforce(EX33, GF7) == {"u": 2, "x": 3, "y": 3}
    assert solve_bruteforce(EX33, GF5) is None
    assert solve_bruteforce(QuadraticSystem(("x",), (E.const("x", 1),)), GF2) == {"x": 1}
    with pytest.raises(BudgetExceeded):
        solve_bruteforce(EX33, GF7, budget=100)


def test_bruteforce_parallel_matches_serial():
    s = normalize(EX33)
    assert solve_bruteforce(s, GF7, workers=2) == solve_bruteforce(s, GF7)


@given(st.integers(0, 10**9))
def test_bruteforce_is_lexicographic_minimum(seed):
    s = random_system(random.Random(seed), n_vars=3, m=3)
    sol = solve_bruteforce(s, GF3)
    first = None
    for values in itertools.product(range(3), repeat=len(s.variables)):
        if eval_system(s, dict(zip(s.variables, values)), GF3):
            first = dict(zip(s.variables, values))
            break
    assert sol == first


def test_system_json_round_trip():
    s = normalize(EX33)
    assert QuadraticSystem.from_json(s.to_json()) == s
