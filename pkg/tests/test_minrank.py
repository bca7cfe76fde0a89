from __future__ import annotations

import itertools
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import det_leibniz, eval_affine_grid, rank_fraction_simple, rank_mod_p_simple, solvable_by_loops
from rankred.errors import AssumptionError, BudgetExceeded
from rankred.fields import FieldSpec, matrix_rank
from rankred.generators import random_normalized_system
from rankred.minrank import (
    ONE,
    ZERO,
    AffineExpr,
    SymbolicMatrix,
    batched_det_mod_p,
    bordered_determinants,
    bordered_determinants_mod_p,
    build_block,
    build_matrix,
    evaluate_matrix,
    minrank_bruteforce,
    minrank_witness_search,
    propagate_copies,
    verify_observation,
)
from rankred.syslang import STRUCTURAL, Equation, QuadraticSystem, normalize

E = Equation
GF2, GF3, GF5, GF7 = (FieldSpec.gf(p) for p in (2, 3, 5, 7))
Q = FieldSpec.rationals()
EX33 = QuadraticSystem(("u", "x", "y"), (E.mul("u", "x", "y"), E.copy("y", "x"), E.const("u", 2)))
X = AffineExpr.var


def ex33_matrix() -> SymbolicMatrix:
    return build_matrix(EX33, STRUCTURAL)


def all_equal(A, values):
    return propagate_copies(A, values)


# -- blocks -------------------------------------------------------------------


def test_block_templates():
    K = AffineExpr
    assert build_block(E.const("c", 2)) == [[ONE, ZERO, K(2)], [ZERO, ONE, ZERO], [ONE, ONE, X("c")]]
    assert build_block(E.mul("u", "x", "y")) == [[ONE, ZERO, X("u")], [ZERO, ONE, X("x")], [K(-1), X("y"), ZERO]]
    assert build_block(E.copy("y", "x")) == [[ONE, ZERO, X("x")], [ZERO, ONE, ZERO], [ONE, ONE, X("y")]]


@given(st.integers(-20, 20), st.integers(-20, 20), st.integers(-20, 20), st.integers(-5, 5))
def test_block_determinant_is_defect(c, a, b, K):
    val = {"c": c, "a": a, "b": b}
    defects = {
        "ADD": (E.add("c", "a", "b"), c - (a + b)),
        "MUL": (E.mul("c", "a", "b"), c - a * b),
        "COPY": (E.copy("c", "a"), c - a),
        "CONST": (E.const("c", K), c - K),
    }
    for eq, defect in defects.values():
        rows = [[e.const + sum(k * val[v] for v, k in e.terms) for e in row] for row in build_block(eq)]
        assert det_leibniz(rows) == defect


# -- matrix construction ------------------------------------------------------


def test_example_matrix_needs_structural_mode():
    with pytest.raises(AssumptionError):
        build_matrix(EX33)
    A = ex33_matrix()
    assert (A.m, A.dim, A.n) == (3, 9, 9)
    assert A.R["x"] == (1, 3) and A.C["x"] == (2, 5)
    assert A[0, 8] == X("u") - X("u~1")
    assert A[8, 6] == ONE  # the construction puts 1 here


def test_single_const():
    s = QuadraticSystem(("c",), (E.const("c", 2),))
    A = build_matrix(s)
    assert A.dim == 3 and A.variables == ("c",) and A.copies == {}


def test_two_copies_offdiagonal_positions():
    s = QuadraticSystem(("y", "x", "z"), (E.copy("y", "x"), E.copy("x", "z")))
    A = build_matrix(s)
    assert A.dim == 6
    assert A.R["x"] == (0, 5) and A.C["x"] == (2, 5)
    assert A[0, 5] == X("x") - X("x~1")
    assert A[5, 2] == X("x") - X("x~2")
    assert all(verify_observation(A))


def test_observation_on_example_and_empty():
    assert all(verify_observation(ex33_matrix()))
    assert all(verify_observation(build_matrix(QuadraticSystem((), ()))))


def test_observation_detects_stray_entry():
    A = ex33_matrix()
    grid = [list(row) for row in A.entries]
    grid[0][4] = ONE  # row 0 belongs to u, column 4 to nobody
    bad = SymbolicMatrix(A.m, tuple(map(tuple, grid)), A.variables, A.originals, A.R, A.C, A.copies)
    rep = verify_observation(bad)
    assert not rep.offblock_support
    assert rep.originals_on_grid and rep.copies_single_row


def test_observation_detects_wrong_copy_sign():
    A = ex33_matrix()
    grid = [list(row) for row in A.entries]
    grid[0][8] = X("u") + X("u~1")
    bad = SymbolicMatrix(A.m, tuple(map(tuple, grid)), A.variables, A.originals, A.R, A.C, A.copies)
    assert not verify_observation(bad).copies_single_row


def test_matrix_json_round_trip():
    A = ex33_matrix()
    assert SymbolicMatrix.from_json(A.to_json()) == A


# -- evaluation ---------------------------------------------------------------


def test_evaluation_examples():
    A = ex33_matrix()
    M = evaluate_matrix(A, all_equal(A, {"u": 2, "x": 3, "y": 3}), GF7)
    assert matrix_rank(M) == 6
    zero = {v: 0 for v in A.variables}
    A1 = evaluate_matrix(A, zero, GF2)
    assert all(A1[i, j] == A[i, j].const % 2 for i in range(9) for j in range(9))
    c = build_matrix(QuadraticSystem(("c",), (E.const("c", 2),)))
    assert matrix_rank(evaluate_matrix(c, {"c": 2}, Q)) == 2
    with pytest.raises(KeyError):
        evaluate_matrix(A, {"u": 1}, GF7)


def test_rank_never_below_floor():
    rng = random.Random(7)
    for _ in range(40):
        s = random_normalized_system(rng)
        A = build_matrix(s)
        for p in (2, 3, 5):
            sigma = {v: rng.randrange(p) for v in A.variables}
            assert rank_mod_p_simple(eval_affine_grid(A, sigma, p), p) >= 2 * A.m


# -- minrank --------------------------------------------------------------------


def test_minrank_small_examples():
    c = build_matrix(QuadraticSystem(("c",), (E.const("c", 2),)))
    r = minrank_bruteforce(c, GF3)
    assert r.minrank == 2 and r.witness == {"c": 2}
    assert minrank_bruteforce(ex33_matrix(), GF2).minrank == 6  # x^2 = 2 = 0 has x = 0


def test_example_matrix_reaches_2m_over_gf5():
    """The printed example violates A2, and its matrix drops to rank 6 over GF(5)
    (and over Q) although x^2 = 2 has no solution there."""
    A = ex33_matrix()
    res = minrank_bruteforce(A, GF5)
    assert res.minrank == 6
    w = res.witness
    assert w == {"u": 2, "x": 1, "y": 2, "u~1": 2, "u~2": 2, "x~1": 0, "x~2": 2, "y~1": 0, "y~2": 1}
    rows = eval_affine_grid(A, w)
    assert rank_mod_p_simple(rows, 5) == 6
    assert rank_fraction_simple(rows) == 6  # the same integers work over Q
    # y = x fails at the witness, yet the bordered minor for that block vanishes
    assert bordered_determinants(A, w, Q, 1) == (Fraction(0), Fraction(1))


def test_normalized_example_keeps_the_gap():
    A = build_matrix(normalize(EX33))
    assert A.m == 4
    res = minrank_bruteforce(A, GF3)
    assert res.minrank == 2 * A.m + 1


def test_minrank_matches_plain_enumeration():
    rng = random.Random(11)
    for _ in range(15):
        s = random_normalized_system(rng)
        A = build_matrix(s)
        if 2 ** A.n > 512:
            continue
        best = min(
            rank_mod_p_simple(eval_affine_grid(A, dict(zip(A.variables, vals)), 2), 2)
            for vals in itertools.product(range(2), repeat=A.n)
        )
        assert minrank_bruteforce(A, GF2).minrank == best


def test_minrank_witness_is_lexicographically_first():
    c = build_matrix(QuadraticSystem(("a", "b", "c"), (E.add("c", "a", "b"),)))
    res = minrank_bruteforce(c, GF3)
    assert res.minrank == 2
    assert res.witness == {"a": 0, "b": 0, "c": 0}


def test_minrank_parallel_is_deterministic():
    A = ex33_matrix()
    assert minrank_bruteforce(A, GF3, workers=2) == minrank_bruteforce(A, GF3)


def test_minrank_budget():
    with pytest.raises(BudgetExceeded):
        minrank_bruteforce(ex33_matrix(), GF2, budget=10)


def test_witness_search_examples():
    A = ex33_matrix()
    w = minrank_witness_search(A, EX33, GF7)
    assert matrix_rank(evaluate_matrix(A, w, GF7)) == 6
    assert minrank_witness_search(A, EX33, GF5) is None
    empty = QuadraticSystem((), ())
    assert minrank_witness_search(build_matrix(empty), empty, GF2) == {}


def test_lemma_equivalence_on_random_systems():
    rng = random.Random(5)
    for _ in range(30):
        s = random_normalized_system(rng)
        A = build_matrix(s)
        for F in (GF2, GF3):
            solvable = solvable_by_loops(s, F.p)
            assert (minrank_bruteforce(A, F).minrank == 2 * A.m) == solvable
            if solvable:
                assert minrank_witness_search(A, s, F) is not None


def test_bordered_determinant_identity():
    rng = random.Random(3)
    for _ in range(25):
        s = random_normalized_system(rng)
        A = build_matrix(s)
        for _ in range(3):
            sigma = {v: rng.randrange(-5, 6) for v in A.variables}
            rows = eval_affine_grid(A, sigma)
            for ell in range(A.m):
                dA, dB = bordered_determinants(A, sigma, Q, ell)
                assert dA == dB
                keep = [i for i in range(A.dim) if (i + 1) % 3 or i == 3 * ell + 2]
                assert det_leibniz([[rows[i][j] for j in keep] for i in keep]) == dA


@given(st.integers(0, 10**9))
def test_batched_det_matches_leibniz(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.choice([2, 3, 5, 101]))
    d = int(rng.integers(1, 5))
    M = rng.integers(0, p, (8, d, d))
    assert batched_det_mod_p(M, p).tolist() == [det_leibniz(m.tolist()) % p for m in M]


def test_vectorized_bordered_determinants_match_scalar():
    rng = random.Random(4)
    F = FieldSpec.gf(101)
    for _ in range(10):
        A = build_matrix(random_normalized_system(rng))
        X = np.array([[rng.randrange(101) for _ in A.variables] for _ in range(6)])
        for ell in range(A.m):
            dA, dB = bordered_determinants_mod_p(A, X, 101, ell)
            for row, a, b in zip(X, dA, dB):
                assert (int(a), int(b)) == bordered_determinants(A, dict(zip(A.variables, row.tolist())), F, ell)
