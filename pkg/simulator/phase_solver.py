"""
GQSP Phase Solver
Computes the rotation angles (theta, phi, lambda) realizing a target unit-circle polynomial
P as the top-left entry of Upsilon_m D ... Upsilon_1 D Upsilon_0 with D = diag(z, 1).

Pipeline: complementary polynomial (Fejer-Riesz factorization of 1 - |P|^2), layer peeling,
reconstruction check, and a damped least-squares fallback when peeling is inconsistent.
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as Poly
from scipy.optimize import least_squares

from simulator.poly_core import UnitCirclePoly, eval_unit_circle
from shared.utils import (
    MAX_PHASE_DEGREE, MODULUS_TOL, ROOT_PAIRING_TOL, PEEL_TOL, DEFLATION_TOL,
    RECONSTRUCTION_TOL, UNITARITY_TOL, LSQ_MAX_NFEV_FACTOR, NEWTON_POLISH_STEPS, POLISH_TOL,
    POLISH_MAX_NFEV_FACTOR, grid_size, pair_tolerance, log_debug, log_warning
)
from shared.errors import (
    CapacityError, DomainError, FactorizationError, PeelConsistencyError, SynthesisError
)


# ==================== TYPES ====================

@dataclass(frozen=True)
class PhaseFactorSet:
    """
    Angles of a GQSP product.

    Attributes:
        theta (np.ndarray): theta_0..theta_m
        phi (np.ndarray): phi_0..phi_m
        lam (float): lambda, applied on Upsilon_0 only
    """
    theta: np.ndarray
    phi: np.ndarray
    lam: float

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).copy()
        phi = np.asarray(self.phi, dtype=float).copy()
        if theta.shape != phi.shape or theta.ndim != 1 or theta.size == 0:
            raise ValueError("theta and phi must be 1-D arrays of equal non-zero length")
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(phi)) and np.isfinite(self.lam)):
            raise ValueError("phase factors must be finite")
        object.__setattr__(self, 'theta', theta)
        object.__setattr__(self, 'phi', phi)
        object.__setattr__(self, 'lam', float(self.lam))

    @property
    def degree(self):
        return len(self.theta) - 1

    def to_dict(self):
        return {"theta": self.theta.tolist(), "phi": self.phi.tolist(), "lambda": self.lam}


@dataclass(frozen=True)
class ComplementaryPair:
    """P and Q with |P|^2 + |Q|^2 = 1 on the unit circle."""
    P: UnitCirclePoly
    Q: UnitCirclePoly


def _wrap(angle):
    """Reduce an angle to (-pi, pi]."""
    wrapped = float(np.angle(np.exp(1j * angle)))
    return np.pi if wrapped == -np.pi else wrapped


def _grid(degree):
    count = grid_size(degree)
    return 2 * np.pi * np.arange(count) / count


def rotation(theta, phi, lam=0.0):
    """
    SU(2)-type rotation Upsilon(theta, phi, lambda).

    Args:
        theta (float): Mixing angle
        phi (float): Phase on the first row
        lam (float): Phase on the first column

    Returns:
        np.ndarray: 2x2 complex unitary
    """
    c, s = np.cos(theta), np.sin(theta)
    return np.array([
        [np.exp(1j * (lam + phi)) * c, np.exp(1j * phi) * s],
        [np.exp(1j * lam) * s, -c],
    ], dtype=complex)


# ==================== COMPLEMENTARY POLYNOMIAL ====================

def _polish(coeffs_desc, root):
    """Newton-polish a root of the descending-coefficient polynomial; keep only improving steps."""
    deriv = np.polyder(coeffs_desc)
    value = np.polyval(coeffs_desc, root)
    for _ in range(NEWTON_POLISH_STEPS):
        slope = np.polyval(deriv, root)
        if slope == 0:
            break
        candidate = root - value / slope
        candidate_value = np.polyval(coeffs_desc, candidate)
        if abs(candidate_value) >= abs(value):
            break
        root, value = candidate, candidate_value
    return root


def _select_inner_roots(roots):
    """
    One root from each conjugate-reciprocal pair of z^m G(z).

    Roots strictly inside the disk are kept. Roots on the circle (where |P| touches 1) come
    in near-coincident pairs; each pair contributes its midpoint projected onto the circle.
    """
    modulus = np.abs(roots)
    on_circle = np.abs(modulus - 1.0) <= ROOT_PAIRING_TOL
    inside = roots[(modulus < 1.0) & ~on_circle]
    inside = inside[np.argsort(np.abs(inside), kind='stable')]

    circle = list(roots[on_circle])
    merged = []
    while len(circle) > 1:
        r = circle.pop(0)
        nearest = int(np.argmin([abs(r - other) for other in circle]))
        midpoint = 0.5 * (r + circle.pop(nearest))
        merged.append(midpoint / abs(midpoint))
    if circle:
        raise FactorizationError(f"unpaired root {circle[0]:.6g} on the unit circle")
    return np.concatenate((inside, np.array(merged, dtype=complex)))


def complementary_poly(P):
    """
    Find Q with |P(e^{ix})|^2 + |Q(e^{ix})|^2 = 1 and deg Q <= deg P.

    Builds G(z) = 1 - P(z) P*(1/z), factors z^m G(z) through its companion-matrix roots,
    keeps the m roots inside the unit disk (one from each conjugate-reciprocal pair) and
    fixes the positive scale at the grid angle where G is largest.

    Args:
        P (UnitCirclePoly): Target polynomial, degree m <= 128

    Returns:
        ComplementaryPair: The verified pair (P, Q)
    """
    m = P.degree
    if m > MAX_PHASE_DEGREE:
        raise CapacityError(f"phase synthesis supports degree <= {MAX_PHASE_DEGREE}, got {m}")

    x = _grid(m)
    p_vals = eval_unit_circle(P, x)
    peak = float(np.max(np.abs(p_vals)))
    if peak > 1.0 + MODULUS_TOL:
        raise DomainError(f"|P| reaches {peak:.17g} > 1 on the unit circle")

    p = P.coeffs
    # g_k for k = -m..m, stored at index k + m; h = z^m G(z) in ascending order
    correlation = np.correlate(p, p, mode='full')
    h = -correlation
    h[m] += 1.0
    g_vals = 1.0 - np.abs(p_vals) ** 2

    if np.max(np.abs(h)) <= DEFLATION_TOL or float(np.max(g_vals)) <= DEFLATION_TOL:
        log_debug("complementary_poly: |P| = 1 on the circle, Q = 0")
        return _verified_pair(P, UnitCirclePoly(np.zeros(m + 1, dtype=complex)), x, p_vals)

    nonzero = np.flatnonzero(np.abs(h) > 0)
    zero_roots = int(nonzero[0])
    core = h[nonzero[0]:nonzero[-1] + 1]
    core_desc = core[::-1]

    roots = np.roots(core_desc) if len(core) > 1 else np.zeros(0, dtype=complex)
    roots = np.array([_polish(core_desc, r) for r in roots], dtype=complex)

    needed = m - zero_roots
    if needed < 0 or len(roots) < needed:
        raise FactorizationError(f"root count {len(roots)} cannot supply {needed} inner roots")

    inner = _select_inner_roots(roots)
    if len(inner) != needed:
        raise FactorizationError(f"selected {len(inner)} inner roots, expected {needed}")

    for r in inner:
        if abs(r) == 0:
            continue
        mirror = 1.0 / np.conj(r)
        distance = float(np.min(np.abs(roots - mirror)))
        if distance > ROOT_PAIRING_TOL * max(1.0, abs(mirror)):
            raise FactorizationError(
                f"root {r:.6g} has no conjugate-reciprocal partner (distance {distance:.3g})")

    selected = np.concatenate((np.zeros(zero_roots, dtype=complex), inner))
    monic = np.poly(selected)[::-1] if len(selected) else np.ones(1, dtype=complex)

    x0 = x[int(np.argmax(g_vals))]
    monic_at_x0 = abs(Poly.polyval(np.exp(1j * x0), monic))
    if monic_at_x0 == 0:
        raise FactorizationError("selected roots vanish at the normalization angle")
    scale = np.sqrt(max(float(np.max(g_vals)), 0.0)) / monic_at_x0

    q = np.zeros(m + 1, dtype=complex)
    q[:len(monic)] = scale * monic
    return _verified_pair(P, UnitCirclePoly(q), x, p_vals)


def _verified_pair(P, Q, x, p_vals):
    q_vals = eval_unit_circle(Q, x)
    residual = float(np.max(np.abs(np.abs(p_vals) ** 2 + np.abs(q_vals) ** 2 - 1.0)))
    if residual > pair_tolerance(P.degree):
        raise FactorizationError(f"|P|^2 + |Q|^2 deviates from 1 by {residual:.3g}")
    log_debug(f"complementary_poly: degree {P.degree}, pair residual {residual:.3g}")
    return ComplementaryPair(P, Q)


# ==================== LAYER PEELING ====================

def peel_angles(pair):
    """
    Strip one rotation layer per step from (P, Q), highest degree first.

    Args:
        pair (ComplementaryPair): Verified complementary pair

    Returns:
        PhaseFactorSet: Angles with deg = deg P
    """
    m = pair.P.degree
    p = pair.P.coeffs.astype(complex)
    q = np.zeros(m + 1, dtype=complex)
    q[:min(len(pair.Q.coeffs), m + 1)] = pair.Q.coeffs[:m + 1]

    theta = np.zeros(m + 1)
    phi = np.zeros(m + 1)
    norm = max(float(np.linalg.norm(p) + np.linalg.norm(q)), 1.0)

    for j in range(m, 0, -1):
        pj, qj = p[j], q[j]
        if abs(pj) < DEFLATION_TOL and abs(qj) < DEFLATION_TOL:
            # Degree deflation: pick the angles that annihilate the constant term instead
            p0, q0 = p[0], q[0]
            if abs(p0) < DEFLATION_TOL and abs(q0) < DEFLATION_TOL:
                t, f = 0.0, 0.0
            else:
                t = float(np.arctan2(abs(p0), abs(q0)))
                f = _wrap(np.angle(p0) - np.angle(q0) + np.pi)
            log_warning(f"peel_angles: degree deflation at step {j}")
        elif abs(qj) == 0:
            t, f = 0.0, 0.0
        elif abs(pj) == 0:
            t, f = np.pi / 2, 0.0
        else:
            t = float(np.arctan2(abs(qj), abs(pj)))
            f = _wrap(np.angle(pj) - np.angle(qj))

        theta[j], phi[j] = t, f
        c, s = np.cos(t), np.sin(t)
        e = np.exp(-1j * f)
        upper = e * c * p + s * q
        lower = e * s * p - c * q

        if abs(upper[0]) > PEEL_TOL * norm:
            raise PeelConsistencyError(
                f"constant term {abs(upper[0]):.3g} does not vanish at step {j}",
                step=j, partial={"theta": theta.copy(), "phi": phi.copy(), "p": p, "q": q})
        p = upper[1:j + 1]
        q = lower[:j]

    P0, Q0 = p[0], q[0]
    lam = _wrap(np.angle(Q0)) if abs(Q0) > 0 else 0.0
    phi[0] = _wrap(np.angle(P0) - lam) if abs(P0) > 0 else 0.0
    theta[0] = float(np.arctan2(abs(Q0), abs(P0)))
    return PhaseFactorSet(theta, phi, lam)


# ==================== RECONSTRUCTION ====================

def reconstruct_matrix(phases):
    """
    Multiply Upsilon_m D ... Upsilon_1 D Upsilon_0 over polynomial entries.

    Args:
        phases (PhaseFactorSet): Angles

    Returns:
        np.ndarray: (2, 2, m+1) array; [i, k, :] are ascending coefficients of entry (i, k)
    """
    m = phases.degree
    S = np.zeros((2, 2, m + 1), dtype=complex)
    S[:, :, 0] = rotation(phases.theta[0], phases.phi[0], phases.lam)
    for j in range(1, m + 1):
        shifted = S.copy()
        shifted[0] = np.roll(S[0], 1, axis=-1)
        shifted[0, :, 0] = 0.0
        S = np.einsum('ik,kln->iln', rotation(phases.theta[j], phases.phi[j]), shifted)
    return S


def reconstruct_poly(phases):
    """
    Top-left entry of the GQSP product.

    Args:
        phases (PhaseFactorSet): Angles

    Returns:
        UnitCirclePoly: Realized polynomial
    """
    return UnitCirclePoly(reconstruct_matrix(phases)[0, 0])


def unitarity_residual(phases):
    """Max deviation of S(z) S(z)^dagger from I on the reconstruction grid."""
    S = reconstruct_matrix(phases)
    x = _grid(phases.degree)
    z = np.exp(1j * x)
    values = np.stack([[Poly.polyval(z, S[i, k]) for k in range(2)] for i in range(2)])
    values = np.moveaxis(values, -1, 0)
    product = values @ np.conj(np.swapaxes(values, -1, -2))
    return float(np.max(np.abs(product - np.eye(2))))


def _first_column(params, m, z):
    """(P, Q) at every grid point for flat parameters [theta(m+1), phi(m+1), lambda]."""
    theta = params[:m + 1]
    phi = params[m + 1:2 * m + 2]
    lam = params[-1]
    P = np.full(z.shape, np.exp(1j * (lam + phi[0])) * np.cos(theta[0]))
    Q = np.full(z.shape, np.exp(1j * lam) * np.sin(theta[0]))
    for j in range(1, m + 1):
        c, s = np.cos(theta[j]), np.sin(theta[j])
        zp = z * P
        P = np.exp(1j * phi[j]) * (c * zp + s * Q)
        Q = s * zp - c * Q
    return P, Q


def reconstruction_error(phases, P):
    """
    Max grid error between the realized polynomial and P.

    Args:
        phases (PhaseFactorSet): Angles
        P (UnitCirclePoly): Target

    Returns:
        float: max |reconstruct - P| over 4m+64 angles
    """
    x = _grid(max(phases.degree, P.degree))
    params = np.concatenate((phases.theta, phases.phi, [phases.lam]))
    realized, _ = _first_column(params, phases.degree, np.exp(1j * x))
    return float(np.max(np.abs(realized - eval_unit_circle(P, x))))


# ==================== SOLVER ====================

def _least_squares_phases(P, initial, nfev_factor=LSQ_MAX_NFEV_FACTOR):
    m = P.degree
    x = _grid(m)
    z = np.exp(1j * x)
    target = eval_unit_circle(P, x)

    def residuals(params):
        realized, _ = _first_column(params, m, z)
        diff = realized - target
        return np.concatenate((diff.real, diff.imag))

    start = np.concatenate((initial.theta, initial.phi, [initial.lam]))
    result = least_squares(residuals, start, method='lm', xtol=1e-15, ftol=1e-15, gtol=1e-15,
                           max_nfev=nfev_factor * (len(start) + 1))
    params = result.x
    return PhaseFactorSet(params[:m + 1], params[m + 1:2 * m + 2], params[-1])


def _initial_guess(P, error):
    """Angles to start the fallback from: the partial peel if one exists."""
    m = P.degree
    partial = getattr(error, 'partial', None) or {}
    theta = np.asarray(partial.get("theta", np.full(m + 1, np.pi / 4)), dtype=float)
    phi = np.asarray(partial.get("phi", np.zeros(m + 1)), dtype=float)
    if len(theta) != m + 1:
        theta, phi = np.full(m + 1, np.pi / 4), np.zeros(m + 1)
    return PhaseFactorSet(theta, phi, 0.0)


def polish_phases(phases, P, error=None):
    """
    Refine accepted angles with a short least-squares run started from them.

    Args:
        phases (PhaseFactorSet): Angles within RECONSTRUCTION_TOL of P
        P (UnitCirclePoly): Target
        error (float): Known reconstruction error of phases

    Returns:
        PhaseFactorSet: The polished angles if they reconstruct P better, else phases
    """
    if error is None:
        error = reconstruction_error(phases, P)
    if error <= POLISH_TOL or P.degree == 0:
        return phases
    polished = _least_squares_phases(P, phases, POLISH_MAX_NFEV_FACTOR)
    polished_error = reconstruction_error(polished, P)
    if polished_error < error:
        log_debug(f"polish_phases: degree {P.degree}, error {error:.3g} -> {polished_error:.3g}")
        return polished
    return phases


def solve_phases(P):
    """
    Synthesize angles whose GQSP product has P as its top-left entry.

    Args:
        P (UnitCirclePoly): Target with |P| <= 1 + 1e-12 on the unit circle

    Returns:
        PhaseFactorSet: Angles reproducing P to within 1e-8 on the grid
    """
    if P.degree > MAX_PHASE_DEGREE:
        raise CapacityError(f"phase synthesis supports degree <= {MAX_PHASE_DEGREE}, got {P.degree}")

    failure = None
    initial = None
    try:
        phases = peel_angles(complementary_poly(P))
        error = reconstruction_error(phases, P)
        if error <= RECONSTRUCTION_TOL:
            log_debug(f"solve_phases: degree {P.degree} peeled, error {error:.3g}")
            return polish_phases(phases, P, error)
        failure = f"peel reconstruction error {error:.3g}"
        initial = phases
    except (FactorizationError, PeelConsistencyError) as e:
        failure = str(e)
        initial = _initial_guess(P, e)

    log_warning(f"solve_phases: falling back to least squares for degree {P.degree} ({failure})")
    phases = _least_squares_phases(P, initial)
    error = reconstruction_error(phases, P)
    if error > RECONSTRUCTION_TOL:
        raise SynthesisError(
            f"phase synthesis failed for degree {P.degree}: {failure}; fallback error {error:.3g}")
    log_debug(f"solve_phases: fallback converged, error {error:.3g}")
    return phases


if __name__ == "__main__":
    # Test the solver
    print("Testing phase synthesis...")
    target = UnitCirclePoly([0.25, 0.0, 0.5, 0.0, 0.25])
    found = solve_phases(target)
    print(f"theta:  {found.theta}")
    print(f"phi:    {found.phi}")
    print(f"lambda: {found.lam}")
    print(f"error:  {reconstruction_error(found, target):.3g}")
    print(f"unitarity: {unitarity_residual(found):.3g}")
