"""
Tests for GQSP phase synthesis.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simulator.poly_core import (
    UnitCirclePoly, eval_unit_circle, laurent_from_chebyshev, monomial_to_chebyshev,
    random_unit_circle_poly, shift_to_unit_circle, MonomialPoly
)
from simulator.phase_solver import (
    ComplementaryPair, PhaseFactorSet, complementary_poly, peel_angles, reconstruct_poly,
    polish_phases, reconstruction_error, rotation, solve_phases, unitarity_residual
)
from shared.errors import CapacityError, DomainError, PeelConsistencyError
from shared.utils import PAIR_TOL, pair_tolerance
from tests.conftest import philox

GRID = 2 * np.pi * np.arange(128) / 128


def _pair_residual(pair):
    p = eval_unit_circle(pair.P, GRID)
    q = eval_unit_circle(pair.Q, GRID)
    return float(np.max(np.abs(np.abs(p) ** 2 + np.abs(q) ** 2 - 1.0)))


# ==================== ROTATION ====================

def test_rotation_is_unitary():
    U = rotation(0.3, -1.1, 0.7)
    assert np.allclose(U @ U.conj().T, np.eye(2), atol=1e-15)


def test_phase_factor_set_validation():
    with pytest.raises(ValueError):
        PhaseFactorSet([0.1, 0.2], [0.0], 0.0)
    with pytest.raises(ValueError):
        PhaseFactorSet([np.inf], [0.0], 0.0)


# ==================== COMPLEMENTARY POLYNOMIAL ====================

def test_complement_of_constant():
    pair = complementary_poly(UnitCirclePoly([0.99]))
    assert abs(pair.Q.coeffs[0]) == pytest.approx(np.sqrt(1 - 0.9801), abs=1e-12)


def test_complement_of_unimodular_is_zero():
    pair = complementary_poly(UnitCirclePoly([0.0, 1.0]))
    assert np.allclose(pair.Q.coeffs, 0.0)


def test_complement_of_average():
    """P = (1 + z)/2 leaves |Q|^2 = sin^2(x/2)."""
    pair = complementary_poly(UnitCirclePoly([0.5, 0.5]))
    q = eval_unit_circle(pair.Q, GRID)
    assert np.allclose(np.abs(q) ** 2, np.sin(GRID / 2) ** 2, atol=1e-10)
    assert pair.Q.degree <= 1


@pytest.mark.parametrize("degree", [1, 4, 9, 16])
def test_complement_pair_invariant(degree):
    P = random_unit_circle_poly(degree, philox(degree), max_modulus=0.95)
    assert _pair_residual(complementary_poly(P)) <= 1e-9


def test_complement_rejects_modulus_above_one():
    with pytest.raises(DomainError):
        complementary_poly(UnitCirclePoly([0.7, 0.7]))


def test_complement_capacity():
    with pytest.raises(CapacityError):
        complementary_poly(UnitCirclePoly(np.full(130, 1e-3)))


# ==================== PEELING ====================

def test_peel_three_four_five():
    phases = peel_angles(ComplementaryPair(UnitCirclePoly([0.6]), UnitCirclePoly([0.8])))
    assert phases.theta[0] == pytest.approx(0.927295218, abs=1e-9)
    assert phases.phi[0] == pytest.approx(0.0, abs=1e-15)
    assert phases.lam == pytest.approx(0.0, abs=1e-15)


def test_peel_monomial_z():
    phases = peel_angles(ComplementaryPair(UnitCirclePoly([0.0, 1.0]), UnitCirclePoly([0.0, 0.0])))
    assert np.allclose(phases.theta, 0.0)
    assert phases.lam + phases.phi[0] == pytest.approx(0.0, abs=1e-15)


def test_peel_inconsistent_pair():
    pair = ComplementaryPair(UnitCirclePoly([0.5, 0.5]), UnitCirclePoly([0.5, 0.5]))
    with pytest.raises(PeelConsistencyError) as info:
        peel_angles(pair)
    assert info.value.step == 1


def test_peel_random_reconstructs():
    P = random_unit_circle_poly(12, philox(12), max_modulus=0.95)
    phases = peel_angles(complementary_poly(P))
    assert reconstruction_error(phases, P) <= 1e-9


@given(st.integers(min_value=1, max_value=10), st.integers(min_value=0, max_value=2 ** 32 - 1))
@settings(max_examples=20, deadline=None)
def test_peeling_recovers_random_targets(degree, seed):
    P = random_unit_circle_poly(degree, philox(seed), max_modulus=0.9)
    pair = complementary_poly(P)
    assert _pair_residual(pair) <= 1e-9
    assert reconstruction_error(peel_angles(pair), P) <= 1e-8


# ==================== RECONSTRUCTION ====================

def test_identity_angles_give_z():
    P = reconstruct_poly(PhaseFactorSet([0.0, 0.0], [0.0, 0.0], 0.0))
    assert np.allclose(P.coeffs, [0.0, 1.0], atol=1e-15)


def test_half_pi_gives_zero():
    P = reconstruct_poly(PhaseFactorSet([np.pi / 2], [0.0], 0.0))
    assert abs(P.coeffs[0]) <= 1e-15


def test_reconstruction_is_unitary():
    P = random_unit_circle_poly(8, philox(8))
    assert unitarity_residual(solve_phases(P)) <= 1e-10


# ==================== SOLVER ====================

def test_solve_constant_one():
    phases = solve_phases(UnitCirclePoly([1.0]))
    assert phases.theta[0] == pytest.approx(0.0, abs=1e-15)
    assert phases.lam + phases.phi[0] == pytest.approx(0.0, abs=1e-15)


def test_solve_square_target():
    """x^2 through the conversion chain gives (1/4, 0, 1/2, 0, 1/4)."""
    target = shift_to_unit_circle(laurent_from_chebyshev(monomial_to_chebyshev(MonomialPoly([0, 0, 1.0]))))
    assert np.allclose(target.coeffs, [0.25, 0, 0.5, 0, 0.25])
    phases = solve_phases(target)
    assert phases.degree == 4
    assert reconstruction_error(phases, target) <= 1e-9


@pytest.mark.parametrize("seed", range(10))
def test_solve_random_degree_twenty(seed):
    P = random_unit_circle_poly(20, philox(100 + seed), max_modulus=0.99)
    phases = solve_phases(P)
    assert np.all(np.isfinite(phases.theta)) and np.all(np.isfinite(phases.phi))
    assert reconstruction_error(phases, P) <= 1e-8


@pytest.mark.slow
def test_solve_random_batch():
    failures = 0
    for seed in range(100):
        P = random_unit_circle_poly(20, philox(1000 + seed), max_modulus=0.99)
        if reconstruction_error(solve_phases(P), P) > 1e-8:
            failures += 1
    assert failures == 0


@pytest.mark.slow
def test_solve_degree_thirty_two():
    P = random_unit_circle_poly(32, philox(32), max_modulus=0.99)
    assert reconstruction_error(solve_phases(P), P) <= 1e-9


def test_solve_real_target_of_odd_polynomial():
    f = MonomialPoly([0.0, -0.5, 0.0, 1.0])
    target = shift_to_unit_circle(laurent_from_chebyshev(monomial_to_chebyshev(f.scaled(0.99 / 0.5))))
    phases = solve_phases(target)
    assert phases.degree == 6
    assert reconstruction_error(phases, target) <= 1e-8


def test_pair_tolerance_grows_with_degree():
    assert pair_tolerance(0) == PAIR_TOL
    assert pair_tolerance(1) == PAIR_TOL
    assert pair_tolerance(48) == pytest.approx(48 * PAIR_TOL)


@pytest.mark.slow
def test_complement_of_degree_forty_eight():
    P = random_unit_circle_poly(48, philox(48), max_modulus=0.99)
    pair = complementary_poly(P)
    assert _pair_residual(pair) <= pair_tolerance(48)


# ==================== POLISH ====================

def test_polish_repairs_perturbed_angles():
    P = random_unit_circle_poly(10, philox(77), max_modulus=0.99)
    phases = solve_phases(P)
    perturbed = PhaseFactorSet(phases.theta + 1e-7, phases.phi, phases.lam)
    before = reconstruction_error(perturbed, P)
    polished = polish_phases(perturbed, P)
    assert reconstruction_error(polished, P) <= min(1e-10, before)


def test_polish_keeps_accurate_angles():
    P = random_unit_circle_poly(6, philox(78), max_modulus=0.99)
    phases = solve_phases(P)
    assert polish_phases(phases, P, error=0.0) is phases


def test_polish_never_worsens():
    P = random_unit_circle_poly(8, philox(79), max_modulus=0.99)
    phases = solve_phases(P)
    error = reconstruction_error(phases, P)
    assert reconstruction_error(polish_phases(phases, P), P) <= error
