"""
Tests for polynomial representations and conversions.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import chebyshev as C

from simulator.poly_core import (
    ChebyshevPoly, LaurentPoly, MonomialPoly, UnitCirclePoly, eval_unit_circle,
    laurent_from_chebyshev, monomial_to_chebyshev, poly_max_on_interval,
    random_monomial_poly, random_unit_circle_poly, shift_to_unit_circle, unit_circle_max
)
from shared.errors import CapacityError, InputError
from tests.conftest import philox


# ==================== TYPES ====================

def test_monomial_trims_trailing_zeros():
    p = MonomialPoly([1.0, 2.0, 0.0, 0.0])
    assert p.degree == 1
    assert p.parity == 'odd'


def test_zero_polynomial():
    p = MonomialPoly([0.0, 0.0])
    assert p.is_zero
    assert p.degree == 0
    assert p.shift().is_zero


def test_monomial_rejects_non_finite():
    with pytest.raises(InputError):
        MonomialPoly([1.0, np.nan])


def test_shift_multiplies_by_x():
    p = MonomialPoly([1.0, -2.0])
    assert np.array_equal(p.shift().coeffs, [0.0, 1.0, -2.0])


def test_apply_matches_matrix_powers(rng):
    A = rng.standard_normal((4, 4))
    b = rng.standard_normal(4)
    p = MonomialPoly([0.5, -1.0, 2.0])
    expected = 0.5 * b - A @ b + 2.0 * A @ (A @ b)
    assert np.allclose(p.apply(A, b), expected, atol=1e-12)


# ==================== CONVERSIONS ====================

def test_square_to_chebyshev():
    """x^2 = (T_0 + T_2) / 2."""
    cheb = monomial_to_chebyshev(MonomialPoly([0.0, 0.0, 1.0]))
    assert np.allclose(cheb.coeffs, [0.5, 0.0, 0.5], atol=1e-15)


def test_chebyshev_t5_round_trip():
    t5 = MonomialPoly(C.cheb2poly([0, 0, 0, 0, 0, 1]))
    assert np.allclose(monomial_to_chebyshev(t5).coeffs, [0, 0, 0, 0, 0, 1], atol=1e-12)


def test_conversion_capacity():
    with pytest.raises(CapacityError):
        monomial_to_chebyshev(MonomialPoly(np.ones(600)))


def test_laurent_of_constant():
    laurent = laurent_from_chebyshev(ChebyshevPoly([0.7]))
    assert laurent.degree == 0
    assert laurent.coefficient(0) == pytest.approx(0.7)


def test_laurent_halves_higher_terms():
    laurent = laurent_from_chebyshev(ChebyshevPoly([0.5, 0.0, 0.5]))
    assert np.allclose(laurent.coeffs, [0.25, 0.0, 0.5, 0.0, 0.25])
    assert laurent.coefficient(3) == 0


def test_laurent_rejects_even_length():
    with pytest.raises(InputError):
        LaurentPoly([1.0, 2.0])


def test_shift_to_unit_circle_offsets_by_degree():
    shifted = shift_to_unit_circle(LaurentPoly([0.25, 0.0, 0.5, 0.0, 0.25]))
    assert shifted.offset == 2
    assert shifted.degree == 4


def test_eval_unit_circle_at_pi():
    """p(z) = z at x = pi gives -1."""
    q = UnitCirclePoly([0.0, 1.0])
    assert eval_unit_circle(q, np.pi) == pytest.approx(-1.0 + 0j, abs=1e-15)


@settings(max_examples=25, deadline=None)
@given(coeffs=st.lists(st.floats(-1.0, 1.0), min_size=1, max_size=12),
       eta=st.floats(0.0, np.pi))
def test_chain_preserves_values(coeffs, eta):
    """f(cos eta) equals the Laurent value and e^{-i d eta} times the shifted value."""
    f = MonomialPoly(coeffs)
    laurent = laurent_from_chebyshev(monomial_to_chebyshev(f))
    shifted = shift_to_unit_circle(laurent)
    expected = f(np.cos(eta))
    scale = 1.0 + float(np.sum(np.abs(f.coeffs)))
    assert abs(laurent(eta) - expected) <= 1e-12 * scale
    assert abs(np.exp(-1j * laurent.degree * eta) * shifted(eta) - expected) <= 1e-12 * scale


# ==================== EXTREMA ====================

def test_poly_max_of_t5():
    t5 = MonomialPoly(C.cheb2poly([0, 0, 0, 0, 0, 1]))
    assert poly_max_on_interval(t5) == pytest.approx(1.0, abs=1e-14)


def test_poly_max_of_constant():
    assert poly_max_on_interval(MonomialPoly([-0.3])) == pytest.approx(0.3)


def test_poly_max_interior_extremum():
    """1 - x^2 peaks at x = 0 with value 1."""
    assert poly_max_on_interval(MonomialPoly([1.0, 0.0, -1.0])) == pytest.approx(1.0, abs=1e-14)


def test_poly_max_odd_cubic():
    """x^3 - 0.5x peaks at the endpoints with value 0.5."""
    assert poly_max_on_interval(MonomialPoly([0.0, -0.5, 0.0, 1.0])) == pytest.approx(0.5, abs=1e-13)


def test_random_monomial_is_normalized():
    p = random_monomial_poly(7, philox(3), max_value=0.8)
    assert p.degree == 7
    assert poly_max_on_interval(p) == pytest.approx(0.8, rel=1e-12)


def test_random_unit_circle_is_bounded():
    q = random_unit_circle_poly(6, philox(4), max_modulus=0.9)
    assert q.degree == 6
    assert unit_circle_max(q, samples=64 * 7 + 1024) == pytest.approx(0.9, rel=1e-12)
    assert unit_circle_max(q, samples=20000) <= 0.9 * (1 + 1e-3)
