import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import delta, triangular_builtins
from ea_error_lab import builders
from ea_error_lab.bounds import spectral_radius
from ea_error_lab.model import TransitionModel, exact_trajectory, initial_distribution
from ea_error_lab.spectral import (
    ClosedFormError,
    JordanStructure,
    RepeatedEigenvalueError,
    Term,
    UnsupportedMatrixError,
    diagonalizable_closed_form,
    evaluate_closed_form,
    jordan_closed_form,
    power_factors,
    schur_entry_oracle,
    triangular_closed_form,
)


def random_triangular(rng, L):
    A = np.triu(rng.random((L, L)))
    return A * rng.uniform(0.2, 1.0, L) / A.sum(axis=0)


def powers(A, t_max):
    out = [np.eye(A.shape[0])]
    for _ in range(t_max):
        out.append(out[-1] @ A)
    return out


# evaluate_closed_form


def test_empty_expression_is_zero():
    assert evaluate_closed_form(ClosedFormError(()), 5) == 0.0


def test_single_term_arithmetic():
    assert evaluate_closed_form(ClosedFormError((Term(4.0, 0.75),)), 2) == pytest.approx(2.25)


def test_zero_rate_conventions():
    expr = ClosedFormError((Term(2.0, 0.0, 0, 1),))
    assert [expr(t) for t in (1, 2, 3)] == [2.0, 0.0, 0.0]


def test_binomial_vanishes_below_degree():
    assert Term(1.0, 0.5, 3, 3)(2) == 0.0
    assert Term(1.0, 0.5, 3, 3)(4) == pytest.approx(4 * 0.5)


def test_head_overrides_early_times():
    expr = ClosedFormError((Term(3.0, 0.75, 0, 1),), head=(4.0,))
    assert expr(0) == 4.0 and expr(1) == 3.0


# diagonalizable_closed_form


def test_needle_bwse_n2_single_rate():
    m = builders.build_needle_bwse(2)
    expr = diagonalizable_closed_form(m, [0.5, 0.5]).pruned()
    assert {t.lam for t in expr.terms} == {0.75}
    for t in range(30):
        assert expr(t) == pytest.approx(0.75**t, rel=1e-13)


@pytest.mark.parametrize("n", range(2, 9))
def test_needle_bwne_symmetric_path(n):
    m = builders.build_needle_bwne(n)
    p0 = initial_distribution(m, "uniform")
    expr = diagonalizable_closed_form(m, p0, method="symmetric")
    lam = np.linalg.eigvalsh(m.R)
    np.testing.assert_allclose(sorted(t.lam for t in expr.terms), lam, atol=1e-12)
    np.testing.assert_allclose(expr.trajectory(100), exact_trajectory(m, p0, 100), rtol=0, atol=1e-8)


def test_diagonal_delta_start_single_term():
    m = builders.build_needle_bwse(5)
    expr = diagonalizable_closed_form(m, delta(5, 3)).pruned(0)
    assert len(expr.terms) == 1
    assert expr.terms[0].c == 1.0 and expr.terms[0].lam == m.R[2, 2]


def test_triangular_path_matches_iteration():
    m = builders.build_onemax_bwse(8)
    p0 = initial_distribution(m, "uniform")
    expr = diagonalizable_closed_form(m, p0, method="triangular")
    np.testing.assert_allclose(expr.trajectory(80), exact_trajectory(m, p0, 80), rtol=0, atol=1e-10)


def test_unsupported_matrix_rejected():
    R = np.array([[0.2, 0.1], [0.3, 0.1]])
    m = TransitionModel.from_arrays([1.0, 0.0, -1.0], R, 1 - R.sum(axis=0))
    with pytest.raises(UnsupportedMatrixError):
        diagonalizable_closed_form(m, [0.5, 0.5])


def test_duplicate_triangular_diagonal_rejected():
    R = np.array([[0.5, 0.2], [0.0, 0.5]])
    m = TransitionModel.from_arrays([1.0, 0.0, -1.0], R, 1 - R.sum(axis=0))
    with pytest.raises(RepeatedEigenvalueError):
        diagonalizable_closed_form(m, [0.5, 0.5])


# power factors


def test_power_factors_2x2():
    pf = power_factors([[0.75, 0.5], [0.0, 0.5]])
    assert pf.p[0, 1, 0] == pytest.approx(1.5, abs=1e-15)
    assert pf.p[0, 1, 1] == pytest.approx(-1.0, abs=1e-15)
    assert pf.matrix_power(2)[0, 1] == pytest.approx(0.625, abs=1e-15)


@pytest.mark.parametrize("n", [3, 5, 10, 50])
def test_power_factor_example_mono_bwse(n):
    # auxiliary moves with probability (i/n)(1-1/n)^(n-i) on levels 1 and 2
    q = 1 - 1 / n
    A = np.array([[1 - q ** (n - 1) / n, 2 / n * q ** (n - 2)], [0.0, 1 - 2 / n * q ** (n - 2)]])
    pf = power_factors(A)
    assert pf.p[0, 0, 0] == pytest.approx(1 - q ** (n - 1) / n, rel=1e-14)
    assert pf.p[0, 1, 0] == pytest.approx(2 * (n - q ** (n - 1)) / (n + 1), rel=1e-12)
    assert pf.p[0, 1, 1] == pytest.approx(-2 * (n - 2 * q ** (n - 2)) / (n + 1), rel=1e-12)


def test_power_factors_diagonal():
    d = [0.9, 0.4, 0.1]
    pf = power_factors(np.diag(d))
    expected = np.zeros((3, 3, 3))
    for i, v in enumerate(d):
        expected[i, i, i] = v
    np.testing.assert_array_equal(pf.p, expected)


def test_power_factors_vanish_outside_band(rng):
    pf = power_factors(random_triangular(rng, 7))
    i, j, k = np.indices(pf.p.shape)
    assert np.all(pf.p[(k < i) | (k > j)] == 0)


def test_power_factors_reject_ties():
    with pytest.raises(RepeatedEigenvalueError) as info:
        power_factors([[0.5, 0.1, 0.0], [0, 0.2, 0.1], [0, 0, 0.5]])
    assert info.value.pair == (0, 2)


@settings(max_examples=80, deadline=None)
@given(L=st.integers(1, 8), seed=st.integers(0, 2**32 - 1))
def test_power_factor_reconstruction(L, seed):
    A = random_triangular(np.random.default_rng(seed), L)
    d = np.sort(np.diag(A))
    # near-ties amplify rounding; the acceptance suite covers the full range
    assume(L == 1 or np.diff(d).min() >= 1e-3)
    pf = power_factors(A)
    for t, At in enumerate(powers(A, 20)[1:], start=1):
        np.testing.assert_allclose(pf.matrix_power(t), At, rtol=0, atol=1e-9)


# triangular_closed_form


def test_table1_onemax_row():
    m = builders.build_onemax_obse(4)
    expr = triangular_closed_form(m, delta(4, 4)).scaled(1 / 4).pruned(1e-9)
    assert [(t.c, t.lam) for t in expr.terms] == [(pytest.approx(0.75), 0.75)]


def test_table1_square_row():
    m = builders.build_mono_obse(4, builders.MONO_FUNCTIONS["square"])
    expr = triangular_closed_form(m, delta(4, 4)).scaled(1 / 16).pruned(1e-9)
    got = sorted(((t.lam, t.c) for t in expr.terms), reverse=True)
    np.testing.assert_allclose(got, [(0.75, 1.3125), (0.5, -0.375)], atol=1e-12)


def test_table1_log_row():
    m = builders.build_mono_obse(4, builders.MONO_FUNCTIONS["log"])
    expr = triangular_closed_form(m, delta(4, 4)).scaled(1 / math.log(5)).pruned(1e-9)
    got = sorted(((t.lam, t.c) for t in expr.terms), reverse=True)
    np.testing.assert_allclose(got, [(0.75, 0.416), (0.5, 0.120), (0.25, 0.033)], atol=1e-3)


def test_table1_square_at_t1():
    m = builders.build_mono_obse(4, builders.MONO_FUNCTIONS["square"])
    expr = triangular_closed_form(m, delta(4, 4))
    assert expr(1) == pytest.approx(15.0, abs=1e-12)
    # rounded coefficients 1.313 and 0.375 give 16 * 0.938
    assert 16 * (1.313 - 0.375) == pytest.approx(15.008)


def _has_tie(model):
    return bool(np.any(np.diff(np.sort(np.diag(model.R))) <= 1e-9))


DISTINCT_BUILTINS = [(label, m) for label, m in triangular_builtins(8) if not _has_tie(m)]
TIED_BUILTINS = [(label, m) for label, m in triangular_builtins(8) if _has_tie(m)]


def test_tied_builtin_is_rejected():
    assert [label for label, _ in TIED_BUILTINS] == ["needle-bwse-2"]
    with pytest.raises(RepeatedEigenvalueError):
        triangular_closed_form(TIED_BUILTINS[0][1], [0.5, 0.5])


@pytest.mark.parametrize("label,model", DISTINCT_BUILTINS)
def test_closed_form_agrees_with_iteration(label, model):
    p0 = initial_distribution(model, "uniform")
    expr = triangular_closed_form(model, p0)
    exact = exact_trajectory(model, p0, 100)
    tol = 1e-9 * max(1.0, exact[0])
    np.testing.assert_allclose(expr.trajectory(100), exact, rtol=0, atol=tol)


@pytest.mark.parametrize(
    "model",
    [builders.build_onemax_obse(6), builders.build_onemax_bwse(6), builders.build_mono_obse(5, builders.MONO_FUNCTIONS["log"])],
)
def test_decay_when_spectral_radius_below_one(model):
    assert spectral_radius(model.R) < 1
    p0 = initial_distribution(model, "worst")
    expr = triangular_closed_form(model, p0)
    assert expr(200) < 1e-3 * expr(0)


# Jordan form


def test_single_jordan_block():
    js = JordanStructure.from_q([(0.5, 2)], np.eye(2))
    expr = jordan_closed_form(js, [1.0, 2.0], [0.0, 1.0])
    for t in range(25):
        assert expr(t) == pytest.approx(2 * 0.5**t + t * 0.5 ** (t - 1), rel=1e-14)


def test_jordan_trivial_blocks_match_diagonal_path():
    m = builders.build_needle_bwse(6)
    p0 = initial_distribution(m, "uniform")
    d = np.diag(m.R)
    js = JordanStructure.from_q([(v, 1) for v in d], np.eye(6))
    a = jordan_closed_form(js, m.errors, p0)
    b = diagonalizable_closed_form(m, p0, "diagonal")
    assert [(t.c, t.lam) for t in a.terms] == [(t.c, t.lam) for t in b.terms]


def test_jordan_t0_is_initial_error(rng):
    js = JordanStructure.from_q([(0.3, 3), (0.6, 2)], rng.random((5, 5)) + 2 * np.eye(5))
    e, p0 = rng.random(5), rng.random(5)
    assert jordan_closed_form(js, e, p0)(0) == pytest.approx(e @ p0, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(sizes=st.lists(st.integers(1, 3), min_size=1, max_size=4), seed=st.integers(0, 2**32 - 1))
def test_jordan_matches_block_powers(sizes, seed):
    rng = np.random.default_rng(seed)
    L = sum(sizes)
    blocks = [(float(rng.uniform(0.05, 0.95)), s) for s in sizes]
    Q = rng.normal(size=(L, L)) + 3 * np.eye(L)
    js = JordanStructure.from_q(blocks, Q)
    J = js.jordan_matrix()
    e, p0 = rng.random(L), rng.random(L)
    expr = jordan_closed_form(js, e, p0)
    a, b = e @ js.Q_inv, js.Q @ p0
    for t, Jt in enumerate(powers(J, 50)):
        assert expr(t) == pytest.approx(a @ Jt @ b, rel=1e-9, abs=1e-9)


def test_jordan_structure_validation():
    with pytest.raises(ValueError):
        JordanStructure.from_q([(0.5, 3)], np.eye(2))
    with pytest.raises(ValueError):
        JordanStructure(((0.5, 2),), np.eye(2), 2 * np.eye(2))


# Schur entry oracle


def test_schur_oracle_diagonal_and_below():
    T = np.array([[0.7, 0.2, 0.1], [0, 0.4, 0.3], [0, 0, 0.2]])
    assert schur_entry_oracle(T, 1, 1, 5) == pytest.approx(0.4**5)
    assert schur_entry_oracle(T, 2, 0, 5) == 0.0


def test_schur_oracle_2x2():
    assert schur_entry_oracle([[0.75, 0.5], [0, 0.5]], 0, 1, 2) == pytest.approx(0.625, abs=1e-15)


def test_schur_oracle_caps():
    with pytest.raises(ValueError):
        schur_entry_oracle(np.eye(7), 0, 1, 2)
    with pytest.raises(ValueError):
        schur_entry_oracle(np.eye(3), 0, 1, 13)


@settings(max_examples=40, deadline=None)
@given(L=st.integers(1, 4), t=st.integers(0, 10), seed=st.integers(0, 2**32 - 1))
def test_schur_oracle_matches_multiplication(L, t, seed):
    T = np.triu(np.random.default_rng(seed).uniform(-1, 1, (L, L)))
    Tt = np.linalg.matrix_power(T, t)
    for i in range(L):
        for j in range(L):
            assert schur_entry_oracle(T, i, j, t) == pytest.approx(Tt[i, j], abs=1e-10)
