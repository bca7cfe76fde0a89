from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from oracles import det_leibniz, rank_by_minors, rank_fraction_simple, rank_mod_p_simple
from rankred.errors import FieldError, MalformedInput
from rankred.fields import (
    ConcreteMatrix,
    FieldSpec,
    QSqrt,
    determinant,
    matrix_rank,
    normalize_elem,
    rank_factorization,
    satisfies,
    solve_affine,
)

GF2, GF3, GF5, GF7 = (FieldSpec.gf(p) for p in (2, 3, 5, 7))
Q = FieldSpec.rationals()
Q2 = FieldSpec.qsqrt(2)


def mat(rows, F):
    return ConcreteMatrix.from_rows(rows, F)


small_matrices = st.integers(1, 5).flatmap(
    lambda r: st.integers(1, 5).flatmap(
        lambda c: st.lists(st.lists(st.integers(-4, 4), min_size=c, max_size=c), min_size=r, max_size=r)
    )
)


# -- elements ---------------------------------------------------------------


def test_normalize_elem_examples():
    assert normalize_elem(7, GF5) == 2
    assert normalize_elem("2/4", Q) == Fraction(1, 2)
    x = normalize_elem(((2, 4), (-3, 6)), Q2)
    assert x == QSqrt(Fraction(1, 2), Fraction(-1, 2), 2)


def test_bad_inputs_rejected():
    with pytest.raises(FieldError):
        normalize_elem("1/0", Q)
    with pytest.raises(FieldError):
        FieldSpec.qsqrt(8)
    with pytest.raises(FieldError):
        FieldSpec.gf(9)
    with pytest.raises(FieldError):
        FieldSpec.parse("gf")
    with pytest.raises(MalformedInput):
        GF5.decode(7)


def test_field_flags_round_trip():
    for flag in ("gf2", "gf7", "q", "qsqrt2", "qsqrt30"):
        F = FieldSpec.parse(flag)
        assert F.flag == flag
        assert FieldSpec.from_json(F.to_json()) == F


@given(st.integers(-50, 50), st.integers(1, 30), st.integers(-50, 50), st.integers(1, 30))
def test_normalize_idempotent(a, b, c, d):
    for F in (GF7, Q, Q2):
        if F is GF7 and b % 7 == 0:
            continue  # 1/7 does not exist in GF(7)
        x = normalize_elem(((a, b), (c, d)) if F is Q2 else (a, b), F)
        assert normalize_elem(x, F) == x
        assert F.decode(F.encode(x)) == x


@given(st.fractions(max_denominator=20), st.fractions(max_denominator=20))
def test_qsqrt_inverse(a, b):
    x = QSqrt(a, b, 2)
    if x:
        assert x * x.inverse() == QSqrt(Fraction(1), Fraction(0), 2)
    else:
        assert a == 0 and b == 0


def test_sqrt2_squared():
    r = Q2.sqrt_d()
    assert r * r == Q2.elem(2)


# -- rank -------------------------------------------------------------------


def test_rank_examples():
    assert matrix_rank(ConcreteMatrix.identity(2, GF3)) == 2
    assert matrix_rank(mat([[1, 0, 2], [0, 1, 0], [1, 1, 2]], Q)) == 2
    assert matrix_rank(ConcreteMatrix.zeros(0, 0, Q)) == 0
    assert matrix_rank(ConcreteMatrix.zeros(3, 4, GF5)) == 0


@given(small_matrices)
def test_rank_agrees_with_minors(rows):
    for p in (2, 3, 5):
        assert matrix_rank(mat(rows, FieldSpec.gf(p))) == rank_by_minors(rows, p)
    assert matrix_rank(mat(rows, Q)) == rank_by_minors(rows)


@given(small_matrices, st.integers(0, 10**6))
def test_rank_invariances(rows, seed):
    rng = random.Random(seed)
    F = GF7
    M = mat(rows, F)
    r = matrix_rank(M)
    assert matrix_rank(M.transpose()) == r
    perm_r = rng.sample(range(M.rows), M.rows)
    perm_c = rng.sample(range(M.cols), M.cols)
    assert matrix_rank(M.submatrix(perm_r, perm_c)) == r
    k = rng.randrange(len(rows))
    scaled = [list(row) for row in rows]
    lam = rng.randint(1, 6)
    scaled[k] = [x * lam for x in scaled[k]]
    assert matrix_rank(mat(scaled, F)) == r


@given(small_matrices)
def test_rank_over_q_matches_plain_elimination(rows):
    assert matrix_rank(mat(rows, Q)) == rank_fraction_simple(rows)


@given(st.lists(st.lists(st.tuples(st.integers(-3, 3), st.integers(-3, 3)), min_size=3, max_size=3), min_size=1, max_size=3))
def test_qsqrt_rank_commutes_with_conjugation(rows):
    M = mat([[x for x in row] for row in rows], Q2)
    conj = ConcreteMatrix(M.rows, M.cols, tuple(x.conjugate() for x in M.entries), Q2)
    assert matrix_rank(M) == matrix_rank(conj)


def test_qsqrt_rank_sees_irrational_dependence():
    # rows (1, sqrt2) and (sqrt2, 2) are dependent; rows (1, sqrt2), (sqrt2, 3) are not
    r2 = Q2.sqrt_d()
    assert matrix_rank(mat([[1, r2], [r2, 2]], Q2)) == 1
    assert matrix_rank(mat([[1, r2], [r2, 3]], Q2)) == 2


@given(st.lists(st.lists(st.integers(-3, 3), min_size=4, max_size=4), min_size=4, max_size=4))
def test_determinant_matches_leibniz(rows):
    assert determinant(mat(rows, Q)) == det_leibniz(rows)
    assert determinant(mat(rows, GF5)) == det_leibniz(rows) % 5


@given(small_matrices)
def test_rank_factorization_reassembles(rows):
    M = mat(rows, GF5)
    L, U = rank_factorization(M)
    assert len(L) == len(U) == matrix_rank(M)
    for i in range(M.rows):
        for j in range(M.cols):
            assert sum(col[i] * row[j] for col, row in zip(L, U)) % 5 == M[i, j]


# -- affine solving ---------------------------------------------------------


def test_solve_affine_examples():
    s = solve_affine(ConcreteMatrix.identity(2, GF3), [1, 2])
    assert s.nonempty and s.particular == (1, 2) and s.basis == ()
    assert not solve_affine(mat([[0, 0]], Q), [1]).nonempty
    s = solve_affine(mat([[1, 1]], GF2), [0])
    assert s.particular == (0, 0) and s.basis == ((1, 1),)


def test_empty_system_is_everything():
    s = solve_affine(ConcreteMatrix.zeros(0, 3, GF5), [])
    assert s.nonempty and s.dimension == 3


@given(small_matrices, st.integers(0, 10**6))
def test_solve_affine_solutions_satisfy(rows, seed):
    rng = random.Random(seed)
    for F in (GF3, Q):
        M = mat(rows, F)
        x0 = [rng.randint(-2, 2) for _ in range(M.cols)]
        rhs = [sum(a * b for a, b in zip(row, x0)) for row in rows]
        sol = solve_affine(M, rhs)
        assert sol.nonempty
        assert len(sol.basis) + matrix_rank(M) == M.cols
        assert satisfies(M, rhs, sol.particular)
        for b in sol.basis:
            assert satisfies(M, rhs, [F.add(x, y) for x, y in zip(sol.particular, b)])
        assert sol.contains([F.elem(x) for x in x0])
        if F is GF3 and sol.basis:
            assert rank_mod_p_simple([list(b) for b in sol.basis], 3) == len(sol.basis)


def test_matrix_json_round_trip():
    for F, rows in ((GF5, [[1, 2], [3, 4]]), (Q, [["1/2", 3]]), (Q2, [[(1, 2), (0, "1/3")]])):
        M = mat(rows, F)
        assert ConcreteMatrix.from_json(M.to_json()) == M
