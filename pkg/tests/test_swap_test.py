"""
Tests for exact and sampled swap-test overlap estimation.
"""

import numpy as np
import pytest

from simulator.poly_core import MonomialPoly
from simulator.block_encoding import build_standard_encoding
from simulator.engine import apply_to_state, synthesize_program
from simulator.swap_test import exact_overlap, sampled_overlap
from shared.errors import InputError

B_PLUS = np.array([1.0, 1.0]) / np.sqrt(2)


@pytest.fixture
def diagonal_encoding():
    return build_standard_encoding(np.diag([1.0, 0.5]), 1.0)


@pytest.fixture
def orthogonal_programs():
    """(x - 1/2) and (1 - x) send diag(1, 1/2) (1, 1)/sqrt(2) to orthogonal vectors."""
    return synthesize_program(MonomialPoly([-0.5, 1.0])), synthesize_program(MonomialPoly([1.0, -1.0]))


# ==================== EXACT ====================

def test_identical_unit_states(random_encoding):
    program = synthesize_program(MonomialPoly([1.0]))
    b = np.array([0.5, -0.5, 0.5, 0.5])
    estimate = exact_overlap(program, program, random_encoding, b)
    assert estimate.re_overlap == pytest.approx(1.0, abs=1e-8)
    assert estimate.p1 == pytest.approx(0.0, abs=1e-12)
    assert estimate.exact


def test_orthogonal_states(diagonal_encoding, orthogonal_programs):
    estimate = exact_overlap(*orthogonal_programs, diagonal_encoding, B_PLUS)
    assert estimate.re_overlap == pytest.approx(0.0, abs=1e-10)
    assert estimate.p0 == pytest.approx(estimate.p1, abs=1e-10)


def test_half_scaled_states():
    enc = build_standard_encoding(0.5 * np.eye(2), 1.0)
    program = synthesize_program(MonomialPoly([0.0, 1.0]))
    estimate = exact_overlap(program, program, enc, np.array([1.0, 0.0]))
    assert estimate.re_overlap == pytest.approx(0.25, abs=1e-9)


def test_overlap_matches_projected_states(random_encoding):
    b = np.array([0.1, 0.7, -0.5, 0.5])
    b /= np.linalg.norm(b)
    left = synthesize_program(MonomialPoly([0.2, -0.4, 0.9]))
    right = synthesize_program(MonomialPoly([0.5, 0.0, 0.3]), transpose=True)
    _, u, _ = apply_to_state(left, random_encoding, b)
    _, v, _ = apply_to_state(right, random_encoding, b)
    estimate = exact_overlap(left, right, random_encoding, b)
    assert estimate.re_overlap == pytest.approx(float(np.vdot(u, v).real), abs=1e-12)


def test_overlap_of_vanishing_state_is_not_cancelled(diagonal_encoding):
    # (x - 1)(x - 1/2) vanishes on the spectrum of diag(1, 1/2)
    program = synthesize_program(MonomialPoly([0.5, -1.5, 1.0]))
    estimate = exact_overlap(program, program, diagonal_encoding, B_PLUS)
    assert 0.0 <= estimate.re_overlap <= 1e-20
    assert estimate.p0 == pytest.approx(estimate.p1 + estimate.re_overlap, abs=1e-14)


# ==================== SAMPLED ====================

def test_sampled_identical_states(random_encoding):
    program = synthesize_program(MonomialPoly([1.0]))
    estimate = sampled_overlap(program, program, random_encoding, np.eye(4)[1], shots=10 ** 6, seed=3)
    assert abs(estimate.re_overlap - 1.0) <= 0.005
    assert estimate.shots == 10 ** 6
    assert estimate.seed == 3


def test_sampled_orthogonal_states(diagonal_encoding, orthogonal_programs):
    shots = 10 ** 4
    inside = 0
    for seed in range(100):
        estimate = sampled_overlap(*orthogonal_programs, diagonal_encoding, B_PLUS, shots, seed)
        inside += abs(estimate.re_overlap) <= 5 / np.sqrt(shots)
    assert inside >= 99


def test_single_shot(diagonal_encoding, orthogonal_programs):
    estimate = sampled_overlap(*orthogonal_programs, diagonal_encoding, B_PLUS, shots=1, seed=0)
    assert estimate.re_overlap in (-1.0, 0.0, 1.0)


def test_sampling_is_reproducible(diagonal_encoding, orthogonal_programs):
    first = sampled_overlap(*orthogonal_programs, diagonal_encoding, B_PLUS, shots=1000, seed=42)
    second = sampled_overlap(*orthogonal_programs, diagonal_encoding, B_PLUS, shots=1000, seed=42)
    assert first == second


def test_stderr_shrinks_with_shots(diagonal_encoding, orthogonal_programs):
    small = sampled_overlap(*orthogonal_programs, diagonal_encoding, B_PLUS, shots=100, seed=1)
    large = sampled_overlap(*orthogonal_programs, diagonal_encoding, B_PLUS, shots=10 ** 6, seed=1)
    assert large.stderr < small.stderr


def test_shots_must_be_positive(diagonal_encoding, orthogonal_programs):
    with pytest.raises(InputError):
        sampled_overlap(*orthogonal_programs, diagonal_encoding, B_PLUS, shots=0, seed=0)


def test_error_scales_as_inverse_sqrt_shots(diagonal_encoding, orthogonal_programs):
    exact = exact_overlap(*orthogonal_programs, diagonal_encoding, B_PLUS)
    shot_counts = [10 ** 2, 10 ** 4, 10 ** 6]
    rms = []
    for shots in shot_counts:
        errors = [sampled_overlap(*orthogonal_programs, diagonal_encoding, B_PLUS, shots, seed).re_overlap
                  - exact.re_overlap for seed in range(200)]
        rms.append(float(np.sqrt(np.mean(np.square(errors)))))

    slope, _ = np.polyfit(np.log(shot_counts), np.log(rms), 1)
    assert slope == pytest.approx(-0.5, abs=0.1)
    for shots, measured in zip(shot_counts, rms):
        predicted = np.sqrt((exact.p0 + exact.p1 - exact.re_overlap ** 2) / shots)
        assert predicted / 2 <= measured <= 2 * predicted
