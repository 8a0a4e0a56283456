"""
Lanczos Convergence Bound
Two-sided Lanczos tridiagonalization of A, the LDU factors of its tridiagonal matrix,
and the ellipse-based residual bound for BiCG (with its iteration and depth estimate).
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import ConvexHull, QhullError

from shared.utils import LANCZOS_LUCKY_TOL, LANCZOS_SERIOUS_TOL, log_debug, log_info, log_warning
from shared.errors import BreakdownError, InapplicableBoundError, InputError


# ==================== TYPES ====================

@dataclass
class LanczosData:
    """
    Output of two-sided Lanczos.

    Attributes:
        V (np.ndarray): n x m matrix of right vectors v_1..v_m
        Wl (np.ndarray): n x m matrix of left vectors w_1..w_m
        T (np.ndarray): m x m tridiagonal with diagonal mu, subdiagonal delta, superdiagonal tau
        Omega (np.ndarray): diag(w_j^T v_j)
        mu, delta, tau (np.ndarray): The tridiagonal entries
        lucky (bool): Iteration ended on an invariant subspace before n steps
    """
    V: np.ndarray
    Wl: np.ndarray
    T: np.ndarray
    Omega: np.ndarray
    mu: np.ndarray
    delta: np.ndarray
    tau: np.ndarray
    lucky: bool = False

    @property
    def size(self):
        return self.T.shape[0]

    @property
    def T_tilde(self):
        """Tridiagonal of the left recurrence, Omega^{-1} T^T Omega."""
        omega = np.diag(self.Omega)
        return (self.T.T * omega[None, :]) / omega[:, None]


@dataclass
class LduFactors:
    """T = L D U with unit bidiagonal L (lower) and U (upper)."""
    L: np.ndarray
    D: np.ndarray
    U: np.ndarray

    @property
    def pivots(self):
        return np.diag(self.D)


@dataclass
class EllipseFit:
    """
    Ellipse symmetric about the real axis: center d, horizontal semi-axis a, vertical
    semi-axis b, focal distance c (imaginary when b > a). center records how d was chosen.
    """
    d: float
    a: float
    b: float
    c: complex
    center: str = "centroid"

    def contains(self, points, slack=1e-9):
        points = np.asarray(points, dtype=complex)
        if self.a == 0:
            return np.all(np.abs(points - self.d) <= slack)
        re = (points.real - self.d) / self.a
        im = points.imag / self.b if self.b > 0 else np.where(np.abs(points.imag) <= slack, 0.0, np.inf)
        return np.all(re ** 2 + im ** 2 <= 1.0 + slack)


@dataclass
class BoundResult:
    """
    Residual bound ||r_k|| <= 2 kappa * ratio^k.

    Attributes:
        kappa (float): Condition number of |D|^{1/2} U
        ratio (float): Per-iteration contraction
        curve (np.ndarray): Bound for k = 1..len(curve)
        ellipse (EllipseFit): Fitted or given ellipse, None for T = I
        lam (complex): Hull vertex attaining the ratio, or the given lambda
        T_eigenvalues (np.ndarray): Spectrum of T
    """
    kappa: float
    ratio: float
    curve: np.ndarray
    ellipse: Optional[EllipseFit] = None
    lam: Optional[complex] = None
    T_eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_dict(self):
        return {
            "kappa": self.kappa,
            "ratio": self.ratio,
            "curve": self.curve.tolist(),
            "ellipse": None if self.ellipse is None else {
                "d": self.ellipse.d, "a": self.ellipse.a, "b": self.ellipse.b,
                "c": [self.ellipse.c.real, self.ellipse.c.imag], "center": self.ellipse.center,
            },
            "lambda": None if self.lam is None else [self.lam.real, self.lam.imag],
        }


# ==================== LANCZOS ====================

def lanczos_tridiagonalize(A, b, max_steps=None):
    """
    Two-sided Lanczos with v_1 = w_1 = b / ||b||.

    Args:
        A (np.ndarray): Real n x n matrix
        b (np.ndarray): Nonzero start vector
        max_steps (int): Cap on the size of T (default n)

    Returns:
        LanczosData: V, W, T and Omega with W^T A V = Omega T

    Raises:
        BreakdownError: w_j^T v_j vanishes before an invariant subspace is reached
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n or b.shape[0] != n:
        raise InputError(f"incompatible shapes {A.shape} and {b.shape}")
    b_norm = np.linalg.norm(b)
    if b_norm == 0:
        raise InputError("start vector must be nonzero")
    m_cap = n if max_steps is None else min(n, int(max_steps))
    lucky_tol = LANCZOS_LUCKY_TOL * max(np.linalg.norm(A, 2), 1.0)

    vs, ws = [b / b_norm], [b / b_norm]
    omegas, mus, deltas, taus = [], [], [], []
    lucky = False

    for j in range(m_cap):
        v, w = vs[j], ws[j]
        omega = float(w @ v)
        if abs(omega) <= LANCZOS_SERIOUS_TOL:
            raise BreakdownError(f"serious Lanczos breakdown: w^T v = {omega:.3g} at step {j + 1}", iteration=j)
        omegas.append(omega)
        Av = A @ v
        mu = float(w @ Av) / omega
        mus.append(mu)
        if j > 0:
            taus[j - 1] = float(ws[j - 1] @ Av) / omegas[j - 1]

        v_hat = Av - mu * v
        w_hat = A.T @ w - mu * w
        if j > 0:
            v_hat -= taus[j - 1] * vs[j - 1]
            w_hat -= (omega * deltas[j - 1] / omegas[j - 1]) * ws[j - 1]

        if j + 1 == m_cap:
            break
        delta = float(np.linalg.norm(v_hat))
        delta_t = float(np.linalg.norm(w_hat))
        if delta <= lucky_tol or delta_t <= lucky_tol:
            lucky = j + 1 < n
            break
        deltas.append(delta)
        vs.append(v_hat / delta)
        ws.append(w_hat / delta_t)
        # tau_j needs omega_{j+1}; refined from w_j^T A v_{j+1} on the next pass
        taus.append(delta_t * float(ws[j + 1] @ vs[j + 1]) / omega)

    m = len(mus)
    T = np.diag(mus) + np.diag(deltas[:m - 1], -1) + np.diag(taus[:m - 1], 1)
    data = LanczosData(np.column_stack(vs[:m]), np.column_stack(ws[:m]), T, np.diag(omegas),
                       np.array(mus), np.array(deltas[:m - 1]), np.array(taus[:m - 1]), lucky)
    right, left = lanczos_residuals(A, data)
    log_debug(f"lanczos_tridiagonalize: {m} steps, lucky={lucky}, relation residuals {right:.3g} / {left:.3g}")
    return data


def lanczos_residuals(A, data):
    """
    Max-entry residuals of A V = V T and A^T W = W T~.

    The last column is left out unless the run closed (lucky stop or m = n), since it
    carries the truncated delta_{m+1} v_{m+1} term.

    Args:
        A (np.ndarray): Matrix the run was made on
        data (LanczosData): Its tridiagonalization

    Returns:
        tuple: (right residual, left residual)
    """
    A = np.asarray(A, dtype=float)
    m = data.size
    k = m if data.lucky or m == A.shape[0] else m - 1
    if k == 0:
        return 0.0, 0.0
    right = A @ data.V[:, :k] - data.V @ data.T[:, :k]
    left = A.T @ data.Wl[:, :k] - data.Wl @ data.T_tilde[:, :k]
    return float(np.max(np.abs(right))), float(np.max(np.abs(left)))


# ==================== LDU ====================

def ldu_tridiagonal(T):
    """
    LDU factorization of a tridiagonal matrix without pivoting.

    D_1 = T_11, l_j = T_{j+1,j} / D_j, u_j = T_{j,j+1} / D_j,
    D_{j+1} = T_{j+1,j+1} - T_{j+1,j} T_{j,j+1} / D_j.

    Args:
        T (np.ndarray): m x m tridiagonal

    Returns:
        LduFactors: Factors with T = L D U

    Raises:
        InapplicableBoundError: A pivot vanishes
    """
    T = np.asarray(T, dtype=float)
    m = T.shape[0]
    pivots = np.zeros(m)
    L, U = np.eye(m), np.eye(m)
    pivots[0] = T[0, 0]
    for j in range(m - 1):
        if abs(pivots[j]) <= LANCZOS_SERIOUS_TOL * max(1.0, abs(T[j, j])):
            raise InapplicableBoundError(f"LDU pivot {j + 1} vanishes")
        L[j + 1, j] = T[j + 1, j] / pivots[j]
        U[j, j + 1] = T[j, j + 1] / pivots[j]
        pivots[j + 1] = T[j + 1, j + 1] - T[j + 1, j] * T[j, j + 1] / pivots[j]
    if pivots[-1] == 0:
        raise InapplicableBoundError(f"LDU pivot {m} vanishes")
    return LduFactors(L, np.diag(pivots), U)


def _sqrt_abs_d_u(factors):
    return np.sqrt(np.abs(factors.pivots))[:, None] * factors.U


# ==================== ELLIPSE ====================

def _hull_vertices(points):
    points = np.asarray(points, dtype=complex)
    if len(points) < 3:
        return points
    xy = np.column_stack((points.real, points.imag))
    try:
        return points[ConvexHull(xy).vertices]
    except (QhullError, ValueError):
        # collinear or repeated points
        return points


class EllipseCenter:
    """Where fit_ellipse puts the center d on the real axis."""

    CENTROID = "centroid"    # mean of the real parts
    MIDPOINT = "midpoint"    # middle of the real extent

    ALL = (CENTROID, MIDPOINT)


def fit_ellipse(points, center=EllipseCenter.CENTROID):
    """
    Small ellipse, symmetric about the real axis, containing a set of complex points.

    The center d is the centroid of the real parts (or, on request, the midpoint of the
    real extent); the semi-axis a is chosen to minimize the area a*b(a), where b(a) is the
    smallest minor semi-axis keeping every point inside.

    Args:
        points (np.ndarray): Complex points (a spectrum closed under conjugation)
        center (str): EllipseCenter value

    Returns:
        EllipseFit: Ellipse with c = sqrt(a^2 - b^2) (imaginary when b > a)
    """
    if center not in EllipseCenter.ALL:
        raise InputError(f"unknown ellipse center {center!r}")
    points = np.asarray(points, dtype=complex)
    re, im = points.real, np.abs(points.imag)
    if center == EllipseCenter.CENTROID:
        d = float(np.mean(re))
    else:
        d = 0.5 * float(re.max() + re.min())
    reach = float(np.max(np.abs(re - d)))
    im_max = float(im.max())

    if im_max <= 1e-12 * max(1.0, np.abs(points).max()):
        return EllipseFit(d, reach, 0.0, complex(reach), center)

    def minor(a):
        inside = 1.0 - ((re - d) / a) ** 2
        if np.any(inside <= 0):
            return np.inf
        return float(np.max(im / np.sqrt(inside)))

    lo = max(reach * (1.0 + 1e-9), 1e-12)
    hi = max(lo * 2.0, reach + 10.0 * im_max)
    res = minimize_scalar(lambda a: a * minor(a), bounds=(lo, hi), method='bounded',
                          options={'xatol': 1e-12 * hi})
    a = float(res.x)
    b = minor(a)
    c = np.sqrt(complex(a * a - b * b))
    return EllipseFit(d, a, float(b), complex(c), center)


def ellipse_through(d, c, lam):
    """
    Ellipse with center d and foci d +- c passing through lam.

    Args:
        d (float): Center on the real axis
        c (complex): Focal distance, real (horizontal major axis) or imaginary
        lam (complex): Point on the boundary

    Returns:
        EllipseFit: The ellipse, tagged with center 'given'
    """
    c = complex(c)
    lam = complex(lam)
    major = 0.5 * (abs(lam - (d + c)) + abs(lam - (d - c)))
    minor = float(np.sqrt(max(major * major - abs(c) ** 2, 0.0)))
    if abs(c.imag) > abs(c.real):
        return EllipseFit(float(d), minor, major, c, "given")
    return EllipseFit(float(d), major, minor, c, "given")


def _branch(z, c):
    """z + sqrt(z^2 - c^2) taking the root of larger modulus."""
    root = np.sqrt(complex(z * z - c * c))
    first, second = z + root, z - root
    return first if abs(first) >= abs(second) else second


def _contraction(lam, ellipse):
    return abs(_branch(ellipse.d - lam, ellipse.c) / _branch(ellipse.d, ellipse.c))


# ==================== BOUND ====================

def bound_from_lanczos(data, iterations=None, ellipse=None, center="centroid"):
    """
    Residual bound from an existing Lanczos run.

    Args:
        data (LanczosData): Tridiagonalization of (A, b)
        iterations (int): Length of the curve (default: size of T)
        ellipse (tuple): Optional (d, c, lambda); fitted from the spectrum of T when absent
        center (str): EllipseCenter used by the fit

    Returns:
        BoundResult: kappa, ratio and the bound curve for k = 1..iterations
    """
    m = data.size
    count = m if iterations is None else int(iterations)
    factors = ldu_tridiagonal(data.T)
    kappa = float(np.linalg.cond(_sqrt_abs_d_u(factors)))
    eigenvalues = np.linalg.eigvals(data.T)
    if np.any(eigenvalues.real <= 0):
        raise InapplicableBoundError("tridiagonal matrix has eigenvalues with nonpositive real part")
    ks = np.arange(1, count + 1)

    if ellipse is not None:
        d, c, lam = ellipse
        given = ellipse_through(d, c, lam)
        if given.d <= 0 or given.a >= given.d:
            raise InapplicableBoundError(f"given ellipse (d={d}, c={c}) contains the origin")
        if not given.contains(eigenvalues, slack=1e-6):
            log_warning("convergence_bound: spectrum of T is not inside the given ellipse")
        ratio = float(_contraction(complex(lam), given))
        log_info(f"convergence_bound: kappa {kappa:.6g}, ratio {ratio:.6g} from the given ellipse")
        return BoundResult(kappa, ratio, 2.0 * kappa * ratio ** ks, given, complex(lam), eigenvalues)

    if np.allclose(data.T, np.eye(m), atol=1e-12, rtol=0):
        log_info("convergence_bound: T = I, bound is zero")
        return BoundResult(kappa, 0.0, np.zeros(count), None, None, eigenvalues)

    fitted = fit_ellipse(eigenvalues, center)
    if fitted.a >= fitted.d and center == EllipseCenter.CENTROID:
        log_warning("convergence_bound: centroid ellipse reaches the origin, refitting about the midpoint")
        fitted = fit_ellipse(eigenvalues, EllipseCenter.MIDPOINT)
    if fitted.a >= fitted.d:
        raise InapplicableBoundError("enclosing ellipse contains the origin")
    hull = _hull_vertices(eigenvalues)
    ratios = [_contraction(lam, fitted) for lam in hull]
    best = int(np.argmax(ratios))
    ratio = float(ratios[best])
    log_info(f"convergence_bound: kappa {kappa:.6g}, ratio {ratio:.6g}, T size {m}")
    return BoundResult(kappa, ratio, 2.0 * kappa * ratio ** ks, fitted, complex(hull[best]), eigenvalues)


def convergence_bound(A, b, iterations=None, ellipse=None, center="centroid"):
    """
    Residual bound ||r_k|| <= 2 kappa(|D|^{1/2} U) * ratio^k.

    Args:
        A (np.ndarray): Real n x n matrix
        b (np.ndarray): Nonzero right-hand side
        iterations (int): Length of the curve (default: Lanczos size)
        ellipse (tuple): Optional (d, c, lambda) replacing the fitted ellipse
        center (str): 'centroid' or 'midpoint' for the fitted ellipse

    Returns:
        BoundResult: kappa, ratio and the bound curve for k = 1..iterations

    Raises:
        InapplicableBoundError: A pivot of T vanishes, T has an eigenvalue with Re <= 0,
            or the ellipse contains the origin
        BreakdownError: Serious Lanczos breakdown
    """
    return bound_from_lanczos(lanczos_tridiagonalize(A, b), iterations, ellipse, center)


def parse_ellipse(text):
    """
    Parse 'd,c,lambda' into (d, c, lambda).

    c and lambda may be complex in Python notation ('0.3j', '1+0.2j').

    Args:
        text (str): Comma-separated triple

    Returns:
        tuple: (float d, complex c, complex lambda)
    """
    parts = [part.strip().replace(" ", "") for part in str(text).split(",")]
    if len(parts) != 3:
        raise InputError(f"ellipse needs 'd,c,lambda', got {text!r}")
    try:
        d = float(parts[0])
        c = complex(parts[1])
        lam = complex(parts[2])
    except ValueError as e:
        raise InputError(f"ellipse needs numbers, got {text!r}") from e
    if not all(np.isfinite([d, abs(c), abs(lam)])):
        raise InputError(f"ellipse values must be finite, got {text!r}")
    return d, c, lam


# ==================== NORMS AND ESTIMATES ====================

def residual_norm_matrix(A, b):
    """
    M_r = W_n U^T |D| U W_n^T, the matrix whose norm the BiCG bound controls.

    For symmetric positive definite A this is A itself.

    Args:
        A (np.ndarray): Real n x n matrix
        b (np.ndarray): Nonzero right-hand side with a full Lanczos run

    Returns:
        np.ndarray: n x n symmetric positive semidefinite matrix
    """
    data = lanczos_tridiagonalize(A, b)
    if data.size != np.asarray(A).shape[0]:
        raise InapplicableBoundError(f"Lanczos stopped after {data.size} of {np.asarray(A).shape[0]} steps")
    factors = ldu_tridiagonal(data.T)
    inner = factors.U.T @ (np.abs(factors.pivots)[:, None] * factors.U)
    return data.Wl @ inner @ data.Wl.T


def error_norm(e, M):
    """sqrt(e^T M e), clipped at zero."""
    e = np.asarray(e, dtype=float).reshape(-1)
    return float(np.sqrt(max(float(e @ M @ e), 0.0)))


def iteration_estimate(A, b, alpha, epsilon, ellipse=None, center="centroid"):
    """
    Iterations (and circuit depth) after which the bound guarantees accuracy epsilon.

    k = ceil(log(kappa(|D|^{1/2}U) kappa(A) C1 / eps) / log(1 / C2)) with
    C1 = 2 ||(|D|^{1/2}U)|| ||b|| / (sqrt(alpha) ||A||) and C2 the contraction ratio.

    Args:
        A (np.ndarray): Real n x n matrix
        b (np.ndarray): Right-hand side
        alpha (float): Encoding scale
        epsilon (float): Target accuracy
        ellipse (tuple): Optional (d, c, lambda) passed to the bound
        center (str): Center of the fitted ellipse

    Returns:
        dict: {"k", "depth", "c1", "c2", "kappa_du", "kappa_a"}
    """
    if epsilon <= 0:
        raise InputError("epsilon must be positive")
    if alpha <= 0:
        raise InputError("alpha must be positive")
    A = np.asarray(A, dtype=float)
    data = lanczos_tridiagonalize(A, b)
    bound = bound_from_lanczos(data, ellipse=ellipse, center=center)
    du = _sqrt_abs_d_u(ldu_tridiagonal(data.T))
    a_norm = float(np.linalg.norm(A, 2))
    c1 = 2.0 * float(np.linalg.norm(du, 2)) * float(np.linalg.norm(b)) / (np.sqrt(alpha) * a_norm)
    c2 = bound.ratio
    kappa_a = float(np.linalg.cond(A))

    k = 1
    if c2 > 0:
        k = max(1, int(np.ceil(np.log(bound.kappa * kappa_a * c1 / epsilon) / np.log(1.0 / c2))))
    log_debug(f"iteration_estimate: k={k}, C1={c1:.6g}, C2={c2:.6g}")
    return {"k": k, "depth": 2 * (k + 1), "c1": c1, "c2": c2,
            "kappa_du": bound.kappa, "kappa_a": kappa_a}


if __name__ == "__main__":
    # Test the bound on a small SPD matrix
    print("Testing convergence bound...")
    A = np.diag([1.0, 1.25, 1.5, 2.0])
    b = np.ones(4)
    result = convergence_bound(A, b)
    print(f"kappa: {result.kappa:.6f}")
    print(f"ratio: {result.ratio:.6f} (center d = {result.ellipse.d:.6f})")
    midpoint = convergence_bound(A, b, center=EllipseCenter.MIDPOINT)
    print(f"midpoint ratio: {midpoint.ratio:.6f} (expected {(np.sqrt(2) - 1) / (np.sqrt(2) + 1):.6f})")
    print(f"curve: {np.array2string(result.curve, precision=3)}")
