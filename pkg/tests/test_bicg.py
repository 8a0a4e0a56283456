"""
Tests for classical BiCG, the coefficient recursions and the GQSVT-based BiCG.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from solver.bicg import (
    BicgCoefficients, SolveMode, advance_direction, advance_residual, classical_bicg,
    _breaks_down, coefficient_update, depth_report, quantum_bicg
)
from shared.errors import AccountingError, BreakdownError, InputError, ScaleError
from cli.matrix_io import generate_matrix
from tests.conftest import philox, random_orthogonal, spd_matrix


def _scaled(A, b):
    alpha = np.linalg.norm(A, 2)
    return A / alpha, b / np.linalg.norm(b)


def _four_level_system(n, cond, seed):
    """SPD matrix with eigenvalues geomspace(1/cond, 1, 4), each repeated n/4 times."""
    Q = random_orthogonal(n, philox(seed))
    A = (Q * np.repeat(np.geomspace(1.0 / cond, 1.0, 4), n // 4)) @ Q.T
    b = philox(seed + 100).standard_normal(n)
    return 0.5 * (A + A.T), b


def _assert_follows_classical(quantum, classical, rel, abs_rnorm):
    assert quantum.converged and classical.converged
    assert len(quantum.records) == len(classical.records)
    for q, c in zip(quantum.records, classical.records):
        assert q.alpha == pytest.approx(c.alpha, rel=rel)
        assert q.rnorm_est == pytest.approx(c.rnorm_est, rel=rel, abs=abs_rnorm)
        if c.beta is None:
            assert q.beta is None
        else:
            assert q.beta == pytest.approx(c.beta, rel=rel)


# ==================== COEFFICIENTS ====================

def test_first_residual_coefficients():
    coeffs = advance_residual(BicgCoefficients(), 0, 0.4)
    assert np.allclose(coeffs.gamma[1], [1.0, -0.4])
    assert np.allclose(coeffs.chi[1], [0.4])


def test_first_direction_coefficients():
    coeffs = coefficient_update(BicgCoefficients(), 0, 0.4, 0.25)
    assert np.allclose(coeffs.rho[1], [1.25, -0.4])


def test_direction_needs_residual():
    with pytest.raises(ValueError):
        advance_direction(BicgCoefficients(), 0, 0.5)


def test_residual_coefficients_mirror_solution(spd_system):
    _, report, _ = classical_bicg(*spd_system, tol=1e-12, maxit=6)
    coeffs = report.coefficients
    for j in range(1, len(coeffs.gamma)):
        assert coeffs.gamma[j][0] == 1.0
        assert np.array_equal(coeffs.gamma[j][1:], -coeffs.chi[j])


steps = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False).filter(lambda v: abs(v) > 1e-3)


@given(st.lists(st.tuples(steps, steps), min_size=1, max_size=8))
@settings(max_examples=50, deadline=None)
def test_recursions_keep_residual_identity(updates):
    coeffs = BicgCoefficients()
    for j, (alpha_j, beta_j) in enumerate(updates):
        coeffs = coefficient_update(coeffs, j, alpha_j, beta_j)
    for j in range(1, len(coeffs.gamma)):
        assert coeffs.gamma[j][0] == 1.0
        assert np.array_equal(coeffs.gamma[j][1:], -coeffs.chi[j])
        assert len(coeffs.rho[j]) == j + 1


@pytest.mark.parametrize("system", ["spd_system", "nonsym_system"])
def test_polynomials_reproduce_iterates(system, request):
    A, b = request.getfixturevalue(system)
    _, report, history = classical_bicg(A, b, tol=1e-14, maxit=min(6, len(b) - 1))
    coeffs = report.coefficients
    for state in history[:-1]:
        j = state.j
        scale = np.linalg.norm(b)
        assert np.linalg.norm(coeffs.residual_poly(j).apply(A, b) - state.r) <= 1e-10 * scale
        assert np.linalg.norm(coeffs.direction_poly(j).apply(A, b) - state.p) <= 1e-10 * scale
        if j > 0:
            assert np.linalg.norm(coeffs.solution_poly(j).apply(A, b) - state.x) <= 1e-10 * scale


def test_coefficients_serialize(spd_system):
    _, report, _ = classical_bicg(*spd_system, maxit=3)
    tables = report.coefficients.to_dict()
    assert set(tables) == {"chi", "gamma", "rho"}
    assert tables["gamma"][0] == [1.0]


# ==================== CLASSICAL ====================

def test_identity_converges_in_one_step():
    b = np.array([3.0, -1.0, 2.0, 0.5])
    x, report, _ = classical_bicg(np.eye(4), b)
    assert report.converged
    assert report.iterations == 0
    assert report.records[0].alpha == pytest.approx(1.0)
    assert np.allclose(x, b)


def test_diagonal_system():
    x, report, _ = classical_bicg(np.diag([1.0, 2.0]), np.array([1.0, 1.0]))
    assert report.converged
    assert len(report.records) <= 2
    assert np.allclose(x, [1.0, 0.5], atol=1e-12)


def test_nonsymmetric_solution(nonsym_system):
    A, b = nonsym_system
    x, report, _ = classical_bicg(A, b, tol=1e-12)
    assert report.converged
    assert np.linalg.norm(A @ x - b) <= 1e-10


def test_biorthogonality():
    rng = philox(31)
    A = np.eye(8) + 0.1 * rng.standard_normal((8, 8))
    b = rng.standard_normal(8)
    _, _, history = classical_bicg(A, b, tol=1e-14, maxit=6)
    states = history[:5]
    for left in states:
        for right in states:
            if left.j != right.j:
                overlap = abs(float(left.rt @ right.r))
                assert overlap <= 1e-6 * np.linalg.norm(left.rt) * np.linalg.norm(right.r)


def test_serious_breakdown():
    with pytest.raises(BreakdownError) as info:
        classical_bicg(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([1.0, 0.0]))
    assert info.value.iteration == 0


def test_iteration_cap(spd_system):
    _, report, history = classical_bicg(*spd_system, tol=1e-14, maxit=3)
    assert not report.converged
    assert len(report.records) == 3
    assert report.records[-1].beta is None
    assert len(history) == 4


def test_zero_right_hand_side():
    with pytest.raises(InputError):
        classical_bicg(np.eye(2), np.zeros(2))


# ==================== QUANTUM ====================

@pytest.mark.parametrize("mode", [SolveMode.EXACT, SolveMode.ORACLE])
def test_quantum_identity(mode):
    b = np.array([1.0, 2.0, -1.0, 0.5])
    x, report = quantum_bicg(np.eye(4), b, 1.0, mode=mode)
    assert report.converged
    assert report.iterations == 0
    assert np.allclose(x, b, atol=1e-8)
    assert depth_report(report) == (0, 1, 3, 2)


def test_oracle_matches_classical_scalars(spd_system):
    A, b = spd_system
    _, quantum = quantum_bicg(A, b, np.linalg.norm(A, 2), tol=1e-14, maxit=4, mode=SolveMode.ORACLE)
    _, classical, _ = classical_bicg(*_scaled(A, b), tol=1e-14, maxit=4)
    for q, c in zip(quantum.records, classical.records):
        assert q.alpha == pytest.approx(c.alpha, rel=1e-8)
        assert q.rnorm_est == pytest.approx(c.rnorm_est, rel=1e-6)
        if c.beta is not None:
            assert q.beta == pytest.approx(c.beta, rel=1e-8)


def test_exact_matches_classical_scalars(spd_system):
    A, b = spd_system
    _, quantum = quantum_bicg(A, b, np.linalg.norm(A, 2), tol=1e-14, maxit=4, mode=SolveMode.EXACT)
    _, classical, _ = classical_bicg(*_scaled(A, b), tol=1e-14, maxit=4)
    assert len(quantum.records) == 4
    for q, c in zip(quantum.records, classical.records):
        assert q.alpha == pytest.approx(c.alpha, rel=1e-6)
        assert q.rnorm_est == pytest.approx(c.rnorm_est, rel=1e-6)
        if c.beta is not None:
            assert q.beta == pytest.approx(c.beta, rel=1e-6)
        assert q.gap == pytest.approx(0.0, abs=1e-10)


def test_exact_matches_oracle_on_nonsymmetric(nonsym_system):
    A, b = nonsym_system
    _, exact = quantum_bicg(A, b, 1.0, tol=1e-14, maxit=2, mode=SolveMode.EXACT)
    _, oracle = quantum_bicg(A, b, 1.0, tol=1e-14, maxit=2, mode=SolveMode.ORACLE)
    for e, o in zip(exact.records, oracle.records):
        assert e.alpha == pytest.approx(o.alpha, rel=1e-10)
        assert e.rnorm_est == pytest.approx(o.rnorm_est, rel=1e-10)
        if o.beta is not None:
            assert e.beta == pytest.approx(o.beta, rel=1e-10)
        assert e.rnorm_true == pytest.approx(o.rnorm_true, rel=1e-9)


@pytest.mark.parametrize("n, cond, seed", [(8, 10, 1), (8, 50, 2), (16, 20, 3), (16, 50, 4)])
def test_exact_follows_classical_to_convergence(n, cond, seed):
    A, b = _four_level_system(n, cond, seed)
    _, quantum = quantum_bicg(A, b, np.linalg.norm(A, 2), tol=1e-6, maxit=10, mode=SolveMode.EXACT)
    _, classical, _ = classical_bicg(*_scaled(A, b), tol=1e-6, maxit=10)
    _assert_follows_classical(quantum, classical, rel=1e-6, abs_rnorm=1e-7)


ACCEPTANCE_SYSTEMS = [f"spd {n} cond {cond} seed {seed}"
                      for seed, (n, cond) in enumerate([(8, 2), (8, 5), (8, 10), (8, 25), (8, 50),
                                                        (16, 2), (16, 5), (16, 10), (16, 25), (16, 50)])]


@pytest.mark.parametrize("matrix", ACCEPTANCE_SYSTEMS)
def test_oracle_follows_classical_to_convergence(matrix):
    A = generate_matrix(matrix)
    b = philox(len(matrix)).standard_normal(A.shape[0])
    _, quantum = quantum_bicg(A, b, np.linalg.norm(A, 2), tol=1e-6, maxit=60, mode=SolveMode.ORACLE)
    _, classical, _ = classical_bicg(*_scaled(A, b), tol=1e-6, maxit=60)
    _assert_follows_classical(quantum, classical, rel=1e-6, abs_rnorm=1e-12)
    assert quantum.records[-1].rnorm_true <= 1e-5


def test_oracle_gap_vanishes_on_spd(spd_system):
    A, b = spd_system
    _, report = quantum_bicg(A, b, 1.0, tol=1e-14, maxit=4, mode=SolveMode.ORACLE)
    assert all(record.gap == pytest.approx(0.0, abs=1e-10) for record in report.records)


def test_gap_is_positive_on_nonsymmetric(nonsym_system):
    A, b = nonsym_system
    _, report = quantum_bicg(A, b, 1.0, tol=1e-14, maxit=3, mode=SolveMode.ORACLE)
    assert len(report.records) == 3
    assert all(record.gap > 1e-6 for record in report.records)


def test_oracle_solves_spd_system():
    A = spd_matrix(4, 0.5, 1.0, seed=3)
    b = philox(4).standard_normal(4)
    x, report = quantum_bicg(A, b, 1.0, tol=1e-8, maxit=10, mode=SolveMode.ORACLE)
    assert report.converged
    assert np.linalg.norm(A @ x - b) <= 1e-6 * np.linalg.norm(b)


def test_sampled_residual_near_exact():
    A = spd_matrix(4, 0.5, 1.0, seed=3)
    b = philox(4).standard_normal(4)
    x_exact, _ = quantum_bicg(A, b, 1.0, tol=1e-14, maxit=2, mode=SolveMode.EXACT)
    x_sampled, report = quantum_bicg(A, b, 1.0, tol=1e-14, maxit=2, mode=SolveMode.SAMPLED,
                                     shots=10 ** 6, seed=5)
    exact_residual = np.linalg.norm(A @ x_exact - b)
    assert np.linalg.norm(A @ x_sampled - b) <= 10 * exact_residual
    assert report.details["shots_used"] == report.details["swap_tests"] * 10 ** 6
    assert report.details["swap_tests"] == 5 * len(report.records)
    assert all(record.shots == 5 * 10 ** 6 for record in report.records)


def test_sampled_is_reproducible():
    A = spd_matrix(4, 0.5, 1.0, seed=3)
    b = np.ones(4)
    first, r1 = quantum_bicg(A, b, 1.0, maxit=2, mode=SolveMode.SAMPLED, shots=1000, seed=9)
    second, r2 = quantum_bicg(A, b, 1.0, maxit=2, mode=SolveMode.SAMPLED, shots=1000, seed=9)
    assert np.array_equal(first, second)
    assert [r.alpha for r in r1.records] == [r.alpha for r in r2.records]


def test_workers_do_not_change_results(spd_system):
    A, b = spd_system
    x1, r1 = quantum_bicg(A, b, 1.0, tol=1e-14, maxit=3, workers=1)
    x2, r2 = quantum_bicg(A, b, 1.0, tol=1e-14, maxit=3, workers=3)
    assert np.array_equal(x1, x2)
    assert [r.alpha for r in r1.records] == [r.alpha for r in r2.records]


def test_quantum_breakdown():
    with pytest.raises(BreakdownError):
        quantum_bicg(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([1.0, 0.0]), 1.0,
                     mode=SolveMode.ORACLE)


def test_breakdown_threshold_is_relative():
    assert _breaks_down(0.0, 0.0)
    assert _breaks_down(1e-16, 1.0)
    assert not _breaks_down(1e-20, 1e-10)
    assert not _breaks_down(-0.3, 1.0)


def test_small_residuals_are_not_breakdowns(spd_system):
    A, b = spd_system
    x, report = quantum_bicg(A, b, 1.0, tol=1e-11, maxit=20, mode=SolveMode.ORACLE)
    assert report.converged
    assert np.linalg.norm(A @ x - b) <= 1e-9


def test_quantum_rejects_small_alpha():
    with pytest.raises(ScaleError):
        quantum_bicg(2 * np.eye(2), np.ones(2), 1.0)


def test_quantum_rejects_unknown_mode():
    with pytest.raises(InputError):
        quantum_bicg(np.eye(2), np.ones(2), 1.0, mode="classical")


# ==================== DEPTH ====================

def test_depth_after_five_iterations(spd_system):
    _, report, _ = classical_bicg(*spd_system, tol=1e-14, maxit=5)
    assert depth_report(report) == (4, 5, 11, 10)


def test_depth_matches_program_tallies(spd_system):
    A, b = spd_system
    _, report = quantum_bicg(A, b, 1.0, tol=1e-14, maxit=3)
    k, max_degree, rotations, controlled = depth_report(report)
    assert (k, max_degree) == (2, 3)
    deepest = max(report.details["program_tallies"], key=lambda t: t[2])
    assert deepest == [rotations, controlled, max_degree]


def test_depth_detects_tampering(spd_system):
    _, report, _ = classical_bicg(*spd_system, tol=1e-14, maxit=3)
    report.records[-1].degree = 7
    with pytest.raises(AccountingError):
        depth_report(report)
