"""
BiCG Solvers
Classical bi-conjugate gradient (reference), the polynomial coefficient recursions behind
it, and the hybrid variant that obtains every inner product from GQSVT programs and swap
tests on the rescaled system A/alpha, b/||b||.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from simulator.poly_core import MonomialPoly, poly_max_on_interval
from simulator.block_encoding import build_standard_encoding
from simulator.engine import (
    GeneralizedFunctionKind, apply_to_state, assemble_program, generalized_action, op_counts,
    synthesize_program
)
from simulator.swap_test import exact_overlap, sampled_overlap
from shared.utils import (
    BREAKDOWN_FACTOR, DEFAULT_MAXIT, DEFAULT_SHOTS, DEFAULT_TOL, HEADROOM,
    log_debug, log_info, log_warning
)
from shared.errors import AccountingError, BreakdownError, InputError


class SolveMode:
    """Ways of obtaining BiCG inner products."""

    CLASSICAL = "classical"
    EXACT = "exact"
    ORACLE = "oracle"
    SAMPLED = "sampled"

    QUANTUM = (EXACT, ORACLE, SAMPLED)


# <p', p~>, ||p'||^2, ||p~||^2, <r, r~> and ||r||^2
SWAP_TESTS_PER_ITERATION = 5


# ==================== TYPES ====================

@dataclass
class BicgState:
    """Vectors of one classical iteration (x_j, r_j, r~_j, p_j, p~_j) and its scalars."""
    j: int
    x: np.ndarray
    r: np.ndarray
    rt: np.ndarray
    p: np.ndarray
    pt: np.ndarray
    alpha: Optional[float] = None
    beta: Optional[float] = None


@dataclass
class BicgCoefficients:
    """
    Power-basis coefficients of X_j, R_j and P_j.

    chi[j] has length max(j, 1), gamma[j] and rho[j] have length j + 1; entries past the
    stored length are the zero boundary values.
    """
    chi: List[np.ndarray] = field(default_factory=lambda: [np.zeros(1)])
    gamma: List[np.ndarray] = field(default_factory=lambda: [np.ones(1)])
    rho: List[np.ndarray] = field(default_factory=lambda: [np.ones(1)])

    @property
    def last(self):
        return len(self.gamma) - 1

    def solution_poly(self, j):
        return MonomialPoly(self.chi[j])

    def residual_poly(self, j):
        return MonomialPoly(self.gamma[j])

    def direction_poly(self, j):
        return MonomialPoly(self.rho[j])

    def to_dict(self):
        return {
            "chi": [c.tolist() for c in self.chi],
            "gamma": [g.tolist() for g in self.gamma],
            "rho": [r.tolist() for r in self.rho],
        }


@dataclass
class IterationRecord:
    """One row of a solve trace."""
    j: int
    alpha: float
    beta: Optional[float]
    rnorm_est: float
    rnorm_true: Optional[float] = None
    degree: int = 0
    r_max: Optional[float] = None
    p_max: Optional[float] = None
    pp_max: Optional[float] = None
    rotations: Optional[int] = None
    controlled: Optional[int] = None
    shots: Optional[int] = None
    gap: Optional[float] = None

    @property
    def depth(self):
        return self.controlled


@dataclass
class SolveReport:
    """
    Outcome of a BiCG run.

    Attributes:
        mode (str): SolveMode value
        records (list): IterationRecord per iteration, ordered by j
        solution (np.ndarray): Approximate solution of A x = b
        converged (bool): Tolerance reached
        coefficients (BicgCoefficients): Polynomial tables
        details (dict): Mode-specific scalars (seed, shots, scale factor, X^max, ...)
    """
    mode: str
    records: List[IterationRecord]
    solution: np.ndarray
    converged: bool
    coefficients: BicgCoefficients
    details: dict = field(default_factory=dict)

    @property
    def iterations(self):
        """Index k of the last completed iteration."""
        return self.records[-1].j if self.records else 0


# ==================== COEFFICIENT RECURSIONS ====================

def _pad(values, length):
    out = np.zeros(length)
    out[:len(values)] = values
    return out


def advance_residual(coeffs, j, alpha_j):
    """
    chi^(j+1) = chi^(j) + alpha_j rho^(j);  gamma^(j+1)_l = gamma^(j)_l - alpha_j rho^(j)_{l-1}.

    Args:
        coeffs (BicgCoefficients): Tables populated through iteration j
        j (int): Current iteration
        alpha_j (float): Step length

    Returns:
        BicgCoefficients: Tables with chi^(j+1), gamma^(j+1)
    """
    if coeffs.last != j or len(coeffs.rho) != j + 1:
        raise ValueError(f"coefficient tables are not at iteration {j}")
    step = alpha_j * coeffs.rho[j]
    chi = _pad(coeffs.chi[j], j + 1) + step
    gamma = _pad(coeffs.gamma[j], j + 2) - np.concatenate(([0.0], step))
    return BicgCoefficients(coeffs.chi + [chi], coeffs.gamma + [gamma], list(coeffs.rho))


def advance_direction(coeffs, j, beta_j):
    """
    rho^(j+1) = gamma^(j+1) + beta_j rho^(j).

    Args:
        coeffs (BicgCoefficients): Tables holding gamma^(j+1)
        j (int): Current iteration
        beta_j (float): Direction coefficient

    Returns:
        BicgCoefficients: Tables with rho^(j+1)
    """
    if len(coeffs.gamma) != j + 2 or len(coeffs.rho) != j + 1:
        raise ValueError(f"residual coefficients for iteration {j + 1} are missing")
    rho = coeffs.gamma[j + 1] + beta_j * _pad(coeffs.rho[j], j + 2)
    return BicgCoefficients(list(coeffs.chi), list(coeffs.gamma), coeffs.rho + [rho])


def coefficient_update(coeffs, j, alpha_j, beta_j):
    """Apply all three recursions for step j -> j+1."""
    return advance_direction(advance_residual(coeffs, j, alpha_j), j, beta_j)


# ==================== CLASSICAL BICG ====================

def _validate_system(A, b):
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"A must be square, got shape {A.shape}")
    if b.shape[0] != A.shape[0]:
        raise InputError(f"b has length {b.shape[0]}, A has {A.shape[0]} rows")
    if not np.any(b):
        raise InputError("right-hand side must be nonzero")
    return A, b


def classical_bicg(A, b, tol=DEFAULT_TOL, maxit=DEFAULT_MAXIT):
    """
    Bi-conjugate gradient from x_0 = 0 with r~_0 = p~_0 = p_0 = r_0 = b.

    Args:
        A (np.ndarray): Real nonsingular matrix
        b (np.ndarray): Nonzero right-hand side
        tol (float): Stop when ||r_{j+1}|| <= tol
        maxit (int): Iteration cap

    Returns:
        tuple: (x, SolveReport, list of BicgState; the last entry holds x_{k+1}, r_{k+1})
    """
    A, b = _validate_system(A, b)
    x = np.zeros_like(b)
    r, rt, p, pt = b.copy(), b.copy(), b.copy(), b.copy()
    coeffs = BicgCoefficients()
    records, history = [], []
    converged = False

    for j in range(maxit):
        Ap = A @ p
        rr = float(r @ rt)
        pp = float(Ap @ pt)
        if abs(rr) < BREAKDOWN_FACTOR * np.linalg.norm(r) * np.linalg.norm(rt):
            raise BreakdownError(f"<r, r~> vanished at iteration {j}", iteration=j)
        if abs(pp) < BREAKDOWN_FACTOR * np.linalg.norm(Ap) * np.linalg.norm(pt):
            raise BreakdownError(f"<Ap, p~> vanished at iteration {j}", iteration=j)

        alpha = rr / pp
        state = BicgState(j, x.copy(), r.copy(), rt.copy(), p.copy(), pt.copy(), alpha)
        history.append(state)

        x = x + alpha * p
        r = r - alpha * Ap
        coeffs = advance_residual(coeffs, j, alpha)
        rnorm = float(np.linalg.norm(r))
        record = IterationRecord(j, alpha, None, rnorm, rnorm, degree=j + 1)
        records.append(record)

        if rnorm <= tol:
            converged = True
            break
        if j + 1 == maxit:
            break

        rt = rt - alpha * (A.T @ pt)
        beta = float(r @ rt) / rr
        p = r + beta * p
        pt = rt + beta * pt
        coeffs = advance_direction(coeffs, j, beta)
        record.beta = beta
        state.beta = beta

    history.append(BicgState(len(history), x.copy(), r.copy(), rt.copy(), p.copy(), pt.copy()))
    report = SolveReport(SolveMode.CLASSICAL, records, x, converged, coeffs,
                         details={"tol": tol, "maxit": maxit})
    if converged:
        log_info(f"classical_bicg: converged at j={report.iterations}, ||r|| = {records[-1].rnorm_est:.3g}")
    else:
        log_warning(f"classical_bicg: not converged after {len(records)} iterations")
    return x, report, history


# ==================== QUANTUM BICG ====================

class _SpectralTrack:
    """
    X_j, R_j and P_j on the singular values of A/alpha, and as true polynomials of A/alpha
    applied to b, advanced with the BiCG scalars instead of read from the power-basis tables.

    The tables hold coefficients as large as the polynomial maxima on [-1, 1]; evaluating
    them near the spectrum cancels almost every digit once R^max is large.
    """

    def __init__(self, A_scaled, svd, b_state):
        self.A = A_scaled
        self.sigma = svd.sigma
        self.x_vals = np.zeros_like(self.sigma)
        self.r_vals = np.ones_like(self.sigma)
        self.p_vals = np.ones_like(self.sigma)
        self.x = np.zeros_like(b_state)
        self.r = b_state.copy()
        self.p = b_state.copy()

    @property
    def shifted_vals(self):
        """sigma * P_j(sigma)."""
        return self.sigma * self.p_vals

    def advance_residual(self, alpha_j):
        self.x_vals = self.x_vals + alpha_j * self.p_vals
        self.r_vals = self.r_vals - alpha_j * self.shifted_vals
        self.x = self.x + alpha_j * self.p
        self.r = self.r - alpha_j * (self.A @ self.p)

    def advance_direction(self, beta_j):
        self.p_vals = self.r_vals + beta_j * self.p_vals
        self.p = self.r + beta_j * self.p


class _InnerProductEstimator:
    """
    <f(A/alpha) b | g((A/alpha)^T) b> through GQSVT programs, the oracle, or sampling.
    """

    def __init__(self, mode, enc, b_state, shots, seed, workers):
        self.mode = mode
        self.enc = enc
        self.b_state = b_state
        self.shots = shots
        self.seed = seed
        self.workers = max(1, int(workers))
        self.calls = 0
        self.shots_used = 0
        self.programs = []

    def _scale(self, poly):
        peak = poly_max_on_interval(poly)
        return peak * (1.0 + HEADROOM) if peak > 0 else 1.0

    def prepare(self, polys, values=None):
        """
        Synthesize (or, in oracle mode, only normalize) each polynomial.

        Args:
            polys (list): MonomialPoly targets
            values (list): Their values on the singular values, used by oracle mode

        Returns:
            list: Per polynomial a dict with its scale and (program, transposed program)
        """
        if values is None:
            values = [poly(self.enc.svd.sigma) for poly in polys]

        def build(item):
            poly, vals = item
            if self.mode == SolveMode.ORACLE:
                return {"poly": poly, "values": vals, "scale": self._scale(poly),
                        "program": None, "program_t": None}
            program = synthesize_program(poly)
            transposed = assemble_program(program.phases, poly, True, program.subnormalization)
            return {"poly": poly, "values": vals, "scale": program.subnormalization,
                    "program": program, "program_t": transposed}

        items = list(zip(polys, values))
        if self.workers > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                prepared = list(pool.map(build, items))
        else:
            prepared = [build(item) for item in items]
        self.programs.extend(p["program"] for p in prepared if p["program"] is not None)
        return prepared

    def _oracle_vector(self, entry, transpose):
        kind = GeneralizedFunctionKind.for_degree(entry["poly"].degree)
        return generalized_action(self.enc.svd, entry["values"] / entry["scale"], kind,
                                  self.b_state, transpose)

    def inner(self, left, right, right_transpose, left_transpose=False):
        """
        Re<left(A) b | right(A^T or A) b>, undoing both subnormalizations.

        Args:
            left (dict): Prepared entry for the ket on the first branch
            right (dict): Prepared entry for the second branch
            right_transpose (bool): Use A^T for the second branch
            left_transpose (bool): Use A^T for the first branch

        Returns:
            float: Rescaled inner product estimate
        """
        scale = left["scale"] * right["scale"]
        if self.mode == SolveMode.ORACLE:
            u = self._oracle_vector(left, left_transpose)
            v = self._oracle_vector(right, right_transpose)
            return float(np.vdot(u, v).real) * scale

        uprog = left["program_t"] if left_transpose else left["program"]
        vprog = right["program_t"] if right_transpose else right["program"]
        if self.mode == SolveMode.EXACT:
            estimate = exact_overlap(uprog, vprog, self.enc, self.b_state)
        else:
            rng = np.random.Generator(np.random.Philox(self.seed).jumped(self.calls))
            estimate = sampled_overlap(uprog, vprog, self.enc, self.b_state,
                                       self.shots, self.seed, rng=rng)
            self.shots_used += self.shots
        self.calls += 1
        return estimate.re_overlap * scale

    def norm_product(self, left, right):
        """||left(A) b|| * ||right(A^T) b|| from two more overlaps, clipped at zero."""
        left_sq = self.inner(left, left, False)
        right_sq = self.inner(right, right, True, left_transpose=True)
        return float(np.sqrt(max(left_sq, 0.0) * max(right_sq, 0.0)))

    def tallies(self, entry):
        """(rotations, controlled) of the program realizing an entry."""
        if entry["program"] is not None:
            return op_counts(entry["program"])
        degree = entry["poly"].degree
        return 2 * degree + 1, 2 * degree

    def prepare_state(self, entry):
        """Post-selected output of the program for entry applied to b, times its scale."""
        if self.mode == SolveMode.ORACLE:
            return self._oracle_vector(entry, False) * entry["scale"]
        _, projected, _ = apply_to_state(entry["program"], self.enc, self.b_state)
        return projected * entry["scale"]


def _breaks_down(value, reference):
    """|value| below BREAKDOWN_FACTOR * reference (an exact zero always counts)."""
    return value == 0.0 or abs(value) < BREAKDOWN_FACTOR * abs(reference)


def quantum_bicg(A, b, alpha, tol=DEFAULT_TOL, maxit=DEFAULT_MAXIT, mode=SolveMode.EXACT,
                 shots=DEFAULT_SHOTS, seed=0, workers=1):
    """
    BiCG with every inner product taken from GQSVT outputs on A/alpha and b/||b||.

    Breakdown tests mirror classical_bicg: <r, r~> against the estimated ||r||^2 and
    <p', p~> against the estimated ||p'|| ||p~||, never against the subnormalizations.

    Args:
        A (np.ndarray): Real n x n matrix, n a power of two
        b (np.ndarray): Nonzero right-hand side
        alpha (float): Encoding scale >= ||A||
        tol (float): Stop when the estimated ||r_{j+1}|| of the scaled system <= tol
        maxit (int): Iteration cap
        mode (str): 'exact', 'oracle' or 'sampled'
        shots (int): Samples per swap test in sampled mode
        seed (int): Philox seed; call i uses Philox(seed).jumped(i)
        workers (int): Threads used for per-iteration program synthesis

    Returns:
        tuple: (solution vector of A x = b, SolveReport)
    """
    if mode not in SolveMode.QUANTUM:
        raise InputError(f"unknown quantum BiCG mode {mode!r}")
    A, b = _validate_system(A, b)
    enc = build_standard_encoding(A, alpha)
    b_norm = float(np.linalg.norm(b))
    b_state = b / b_norm
    estimator = _InnerProductEstimator(mode, enc, b_state, shots, seed, workers)
    track = _SpectralTrack(enc.scaled, enc.svd, b_state)

    coeffs = BicgCoefficients()
    records = []
    converged = False

    def prepare_direction(j):
        direction = coeffs.direction_poly(j)
        p_entry, pp_entry = estimator.prepare([direction, direction.shift()],
                                              [track.p_vals, track.shifted_vals])
        pp = estimator.inner(pp_entry, p_entry, True)
        return p_entry, pp_entry, pp, estimator.norm_product(pp_entry, p_entry)

    rr = 1.0
    p_entry, pp_entry, pp, pp_reference = prepare_direction(0)

    for j in range(maxit):
        if _breaks_down(pp, pp_reference):
            raise BreakdownError(f"<p', p~> vanished at iteration {j}", iteration=j)

        alpha_j = rr / pp
        coeffs = advance_residual(coeffs, j, alpha_j)
        track.advance_residual(alpha_j)
        residual = coeffs.residual_poly(j + 1)
        (r_entry,) = estimator.prepare([residual], [track.r_vals])
        rr_new = estimator.inner(r_entry, r_entry, True)
        rnorm_sq = estimator.inner(r_entry, r_entry, False)
        rnorm_est = float(np.sqrt(max(rnorm_sq, 0.0)))

        kind = GeneralizedFunctionKind.for_degree(residual.degree)
        generalized = generalized_action(enc.svd, track.r_vals, kind, b_state)
        rotations, controlled = estimator.tallies(r_entry)
        record = IterationRecord(
            j, alpha_j, None, rnorm_est,
            rnorm_true=float(np.linalg.norm(b_state - enc.scaled @ track.x)),
            degree=max(residual.degree, pp_entry["poly"].degree),
            r_max=r_entry["scale"], p_max=p_entry["scale"], pp_max=pp_entry["scale"],
            rotations=rotations, controlled=controlled,
            shots=(SWAP_TESTS_PER_ITERATION * shots if mode == SolveMode.SAMPLED else None),
            gap=float(np.linalg.norm(generalized - track.r)),
        )
        records.append(record)
        log_debug(f"quantum_bicg[{mode}] j={j}: alpha={alpha_j:.6g}, ||r|| est {rnorm_est:.3g}, gap {record.gap:.3g}")

        if rnorm_est <= tol:
            converged = True
            break
        if j + 1 == maxit:
            break
        if _breaks_down(rr_new, rnorm_sq):
            raise BreakdownError(f"<r, r~> vanished at iteration {j + 1}", iteration=j + 1)

        beta_j = rr_new / rr
        record.beta = beta_j
        coeffs = advance_direction(coeffs, j, beta_j)
        track.advance_direction(beta_j)
        rr = rr_new
        p_entry, pp_entry, pp, pp_reference = prepare_direction(j + 1)

    k = records[-1].j
    solution_poly = coeffs.solution_poly(k + 1)
    (x_entry,) = estimator.prepare([solution_poly], [track.x_vals])
    scaled_solution = estimator.prepare_state(x_entry)
    solution = (b_norm / enc.alpha) * scaled_solution.real

    details = {
        "alpha": enc.alpha, "b_norm": b_norm, "tol": tol, "maxit": maxit,
        "x_max": x_entry["scale"], "solution_factor": b_norm / enc.alpha * x_entry["scale"],
        "seed": seed, "shots": shots if mode == SolveMode.SAMPLED else None,
        "shots_used": estimator.shots_used, "swap_tests": estimator.calls,
        "program_tallies": [list(op_counts(p)) + [p.degree] for p in estimator.programs],
    }
    report = SolveReport(mode, records, solution, converged, coeffs, details)
    if converged:
        log_info(f"quantum_bicg[{mode}]: converged at j={k}, estimated ||r|| = {records[-1].rnorm_est:.3g}")
    else:
        log_warning(f"quantum_bicg[{mode}]: not converged after {len(records)} iterations")
    return solution, report


# ==================== DEPTH ACCOUNTING ====================

def depth_report(report):
    """
    Maximum circuit depth of a completed solve.

    Args:
        report (SolveReport): Completed run stopping at iteration k

    Returns:
        tuple: (k, max_degree, rotation_count, controlled_count) with max_degree = k + 1
    """
    if not report.records:
        raise AccountingError("report has no iterations")
    k = report.iterations
    max_degree = max(record.degree for record in report.records)
    if max_degree != k + 1:
        raise AccountingError(f"deepest polynomial has degree {max_degree}, expected {k + 1}")
    rotations, controlled = 2 * max_degree + 1, 2 * max_degree

    tallies = report.details.get("program_tallies") or []
    if tallies:
        deepest = max(tallies, key=lambda t: t[2])
        if deepest[2] != max_degree or deepest[0] != rotations or deepest[1] != controlled:
            raise AccountingError(f"assembled programs tally {deepest}, expected "
                                  f"({rotations}, {controlled}, {max_degree})")
    for record in report.records:
        if record.controlled is not None and record.controlled != 2 * (record.j + 1):
            raise AccountingError(f"iteration {record.j} records {record.controlled} controlled operators")
    return k, max_degree, rotations, controlled
