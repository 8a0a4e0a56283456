"""
Polynomial Representations
Monomial, Chebyshev, Laurent-on-the-unit-circle and shifted unit-circle forms of the
target polynomials, conversions between them, and extremum search on [-1, 1].
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C
from numpy.polynomial import polynomial as P
from scipy.optimize import minimize_scalar

from shared.utils import (
    MAX_CHEBYSHEV_DEGREE, EXTREMUM_SAMPLE_FACTOR, MIN_EXTREMUM_SAMPLES, log_debug
)
from shared.errors import CapacityError, InputError


def _trim(coeffs):
    """Drop trailing (highest power) zeros, keeping at least one coefficient."""
    coeffs = np.asarray(coeffs)
    nonzero = np.flatnonzero(coeffs)
    if nonzero.size == 0:
        return coeffs[:1] * 0
    return coeffs[:nonzero[-1] + 1]


# ==================== POLYNOMIAL TYPES ====================

@dataclass(frozen=True)
class MonomialPoly:
    """
    Real polynomial sum_l coeffs[l] * x**l.

    The target polynomial of a GQSVT program and the BiCG polynomials X_j, R_j, P_j and
    P'_j all live in this form. Trailing zeros are trimmed, so the leading coefficient is
    nonzero unless the polynomial is identically zero.
    """
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if coeffs.ndim != 1 or coeffs.size == 0:
            raise InputError("polynomial coefficients must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(coeffs)):
            raise InputError("polynomial coefficients must be finite")
        object.__setattr__(self, 'coeffs', _trim(coeffs).copy())

    @property
    def degree(self):
        return len(self.coeffs) - 1

    @property
    def is_zero(self):
        return not np.any(self.coeffs)

    @property
    def parity(self):
        """'even' or 'odd' according to the degree (not the terms)."""
        return 'even' if self.degree % 2 == 0 else 'odd'

    def __call__(self, x):
        return P.polyval(x, self.coeffs)

    def shift(self):
        """Return x * p(x)."""
        if self.is_zero:
            return MonomialPoly([0.0])
        return MonomialPoly(np.concatenate(([0.0], self.coeffs)))

    def scaled(self, factor):
        return MonomialPoly(self.coeffs * factor)

    def apply(self, A, b):
        """
        Evaluate p(A) b by Horner's rule on vectors.

        Args:
            A (np.ndarray): Square matrix
            b (np.ndarray): Vector

        Returns:
            np.ndarray: p(A) b
        """
        result = np.zeros_like(np.asarray(b, dtype=np.result_type(A, b, float)))
        for c in self.coeffs[::-1]:
            result = A @ result + c * b
        return result


@dataclass(frozen=True)
class ChebyshevPoly:
    """Real polynomial sum_j coeffs[j] * T_j(x)."""
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'coeffs', np.atleast_1d(np.asarray(self.coeffs, dtype=float)).copy())

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def __call__(self, x):
        return C.chebval(x, self.coeffs)


@dataclass(frozen=True)
class LaurentPoly:
    """
    Laurent polynomial sum_{j=-d..d} c_j z**j on the unit circle.

    coeffs[j + d] holds c_j. For a real Chebyshev source c_{-j} = c_j.
    """
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.atleast_1d(np.asarray(self.coeffs, dtype=complex)).copy()
        if len(coeffs) % 2 != 1:
            raise InputError("Laurent coefficients must have odd length 2d+1")
        object.__setattr__(self, 'coeffs', coeffs)

    @property
    def degree(self):
        return (len(self.coeffs) - 1) // 2

    def coefficient(self, j):
        d = self.degree
        if abs(j) > d:
            return 0j
        return self.coeffs[j + d]

    def __call__(self, eta):
        """Evaluate at z = exp(i eta)."""
        z = np.exp(1j * np.asarray(eta, dtype=float))
        return P.polyval(z, self.coeffs) * z ** (-self.degree)


@dataclass(frozen=True)
class UnitCirclePoly:
    """
    Complex polynomial sum_{k=0..m} coeffs[k] z**k evaluated on |z| = 1.

    offset records d when the polynomial was built as z**d times a Laurent form.
    """
    coeffs: np.ndarray
    offset: int = field(default=0)

    def __post_init__(self):
        coeffs = np.atleast_1d(np.asarray(self.coeffs, dtype=complex)).copy()
        if coeffs.ndim != 1 or coeffs.size == 0:
            raise InputError("unit-circle coefficients must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(coeffs)):
            raise InputError("unit-circle coefficients must be finite")
        object.__setattr__(self, 'coeffs', coeffs)

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def __call__(self, x):
        return eval_unit_circle(self, x)


# ==================== CONVERSIONS ====================

def monomial_to_chebyshev(p):
    """
    Change basis from monomials to Chebyshev polynomials.

    The conversion is the coefficient recurrence x*T_j = (T_{j+1} + T_{j-1}) / 2 applied
    in Horner order.

    Args:
        p (MonomialPoly): Polynomial in monomial form

    Returns:
        ChebyshevPoly: Same polynomial in the Chebyshev basis
    """
    if p.degree > MAX_CHEBYSHEV_DEGREE:
        raise CapacityError(f"degree {p.degree} exceeds the supported {MAX_CHEBYSHEV_DEGREE}")
    return ChebyshevPoly(C.poly2cheb(p.coeffs))


def laurent_from_chebyshev(c):
    """
    Rewrite sum a_j T_j(cos eta) as sum c_j exp(i j eta).

    c_j = c_{-j} = a_j / 2 for j >= 1 and c_0 = a_0.

    Args:
        c (ChebyshevPoly): Chebyshev form

    Returns:
        LaurentPoly: Laurent form of degree d = deg(c)
    """
    d = c.degree
    coeffs = np.zeros(2 * d + 1, dtype=complex)
    coeffs[d] = c.coeffs[0]
    if d > 0:
        half = c.coeffs[1:] / 2.0
        coeffs[d + 1:] = half
        coeffs[:d] = half[::-1]
    return LaurentPoly(coeffs)


def shift_to_unit_circle(l):
    """
    Multiply a Laurent polynomial by z**d, giving an ordinary degree-2d polynomial.

    Args:
        l (LaurentPoly): Laurent form

    Returns:
        UnitCirclePoly: Polynomial with p_{d+j} = c_j
    """
    return UnitCirclePoly(l.coeffs.copy(), offset=l.degree)


def eval_unit_circle(q, x):
    """
    Horner evaluation at z = exp(i x).

    Args:
        q (UnitCirclePoly): Polynomial
        x (float or np.ndarray): Angle(s) in radians

    Returns:
        complex or np.ndarray: q(exp(i x))
    """
    z = np.exp(1j * np.asarray(x, dtype=float))
    return P.polyval(z, q.coeffs)


def unit_circle_max(q, samples=None):
    """
    Largest modulus of q on a uniform angle grid.

    Args:
        q (UnitCirclePoly): Polynomial
        samples (int): Number of grid angles; defaults to 16 * (deg + 1) + 256

    Returns:
        float: max |q(exp(i x))| over the grid
    """
    if samples is None:
        samples = 16 * (q.degree + 1) + 256
    x = 2 * np.pi * np.arange(samples) / samples
    return float(np.max(np.abs(eval_unit_circle(q, x))))


# ==================== EXTREMUM SEARCH ====================

def poly_max_on_interval(p):
    """
    Compute max |p(x)| over [-1, 1].

    Samples max(64, 8*deg) Chebyshev nodes together with both endpoints, then refines
    every sampled local maximum with a bounded scalar search between its neighbours.

    Args:
        p (MonomialPoly): Real polynomial

    Returns:
        float: Maximum modulus on the interval
    """
    if p.degree > MAX_CHEBYSHEV_DEGREE:
        raise CapacityError(f"degree {p.degree} exceeds the supported {MAX_CHEBYSHEV_DEGREE}")
    if p.degree == 0:
        return float(abs(p.coeffs[0]))

    samples = max(MIN_EXTREMUM_SAMPLES, EXTREMUM_SAMPLE_FACTOR * p.degree)
    x = np.concatenate(([-1.0], np.sort(C.chebpts1(samples)), [1.0]))
    values = np.abs(p(x))
    best = float(np.max(values))

    interior = np.flatnonzero((values[1:-1] >= values[:-2]) & (values[1:-1] >= values[2:])) + 1
    for idx in interior:
        lo, hi = x[idx - 1], x[idx + 1]
        res = minimize_scalar(lambda t: -abs(P.polyval(t, p.coeffs)), bounds=(lo, hi),
                              method='bounded', options={'xatol': 1e-14})
        best = max(best, -float(res.fun))

    log_debug(f"poly_max_on_interval: degree {p.degree}, {len(interior)} refinements, max {best:.17g}")
    return best


# ==================== RANDOM POLYNOMIALS ====================

def random_unit_circle_poly(degree, rng, max_modulus=0.99, complex_coeffs=True):
    """
    Random unit-circle polynomial scaled to a target maximum modulus.

    Args:
        degree (int): Polynomial degree m
        rng (np.random.Generator): Source of randomness
        max_modulus (float): Target max |P| on the circle
        complex_coeffs (bool): Draw complex coefficients when True

    Returns:
        UnitCirclePoly: Random polynomial
    """
    coeffs = rng.standard_normal(degree + 1)
    if complex_coeffs:
        coeffs = coeffs + 1j * rng.standard_normal(degree + 1)
    q = UnitCirclePoly(coeffs)
    peak = unit_circle_max(q, samples=64 * (degree + 1) + 1024)
    return UnitCirclePoly(q.coeffs * (max_modulus / peak))


def random_monomial_poly(degree, rng, max_value=1.0 - 1e-8):
    """
    Random real polynomial whose maximum modulus on [-1, 1] equals max_value.

    Args:
        degree (int): Polynomial degree
        rng (np.random.Generator): Source of randomness
        max_value (float): Target max |p| on [-1, 1]

    Returns:
        MonomialPoly: Random polynomial
    """
    coeffs = rng.standard_normal(degree + 1)
    if coeffs[-1] == 0:
        coeffs[-1] = 1.0
    p = MonomialPoly(coeffs)
    return p.scaled(max_value / poly_max_on_interval(p))


if __name__ == "__main__":
    # Test the conversions
    print("Testing polynomial conversions...")

    square = MonomialPoly([0.0, 0.0, 1.0])
    cheb = monomial_to_chebyshev(square)
    laurent = laurent_from_chebyshev(cheb)
    shifted = shift_to_unit_circle(laurent)

    print(f"x^2 Chebyshev: {cheb.coeffs}")
    print(f"x^2 Laurent:   {laurent.coeffs.real}")
    print(f"x^2 shifted:   {shifted.coeffs.real}")
    print(f"max |T_5| on [-1, 1]: {poly_max_on_interval(MonomialPoly(C.cheb2poly([0, 0, 0, 0, 0, 1]))):.12f}")
