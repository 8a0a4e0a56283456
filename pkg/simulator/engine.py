"""
GQSVT Engine
Assembles the operator sequences that realize generalized matrix polynomials of a block
encoded matrix, executes them by dense composition, and provides the SVD-based oracle
they are compared against.

Register order is (control, ancillas, system), control most significant.
"""

import threading
from dataclasses import dataclass, field

import numpy as np

from simulator.poly_core import (
    MonomialPoly, monomial_to_chebyshev, laurent_from_chebyshev, shift_to_unit_circle,
    poly_max_on_interval
)
from simulator.phase_solver import PhaseFactorSet, rotation, solve_phases
from simulator.block_encoding import (
    canonical_svd, qubitize, build_controlled_ops, polar_factor, unitarity_residual
)
from shared.utils import HEADROOM, log_debug
from shared.errors import ArityError, InputError, ScaleError, ShapeError


# ==================== PROGRAM TYPES ====================

class GeneralizedFunctionKind:
    """Which singular-vector outer products a generalized matrix function uses."""

    RIGHT = "right"        # sum f(sigma) |v><v|
    DIAMOND = "diamond"    # sum f(sigma) |w><v|
    LEFT = "left"          # sum f(sigma) |w><w|

    ALL = (RIGHT, DIAMOND, LEFT)

    @staticmethod
    def for_degree(degree):
        """Even degree realizes the right function, odd degree the diamond function."""
        return GeneralizedFunctionKind.RIGHT if degree % 2 == 0 else GeneralizedFunctionKind.DIAMOND


class OpTag:
    """Operator tags of a GQSVT program."""

    ROTATION = "R"
    M = "M"
    MT = "Mt"
    N = "N"
    NT = "Nt"

    CONTROLLED = (M, MT, N, NT)
    TRANSPOSED = {M: MT, MT: M, N: NT, NT: N}


@dataclass(frozen=True)
class ProgramOp:
    """One operator of a program: a rotation R_index or a controlled walk."""
    tag: str
    index: int = -1

    def label(self):
        return f"R{self.index}" if self.tag == OpTag.ROTATION else self.tag


@dataclass(frozen=True)
class GqsvtProgram:
    """
    Time-ordered GQSVT operator sequence.

    Attributes:
        ops (tuple): ProgramOp entries, first applied first
        phases (PhaseFactorSet): Angles for R_0..R_2d
        target (MonomialPoly): Unnormalized target f
        subnormalization (float): Scale dividing f before synthesis
        transpose (bool): Realizes the function of A^T
    """
    ops: tuple
    phases: PhaseFactorSet
    target: MonomialPoly
    subnormalization: float = 1.0
    transpose: bool = False
    labels: tuple = field(default=(), compare=False)

    @property
    def degree(self):
        return self.target.degree

    @property
    def parity(self):
        return self.target.parity

    @property
    def kind(self):
        return GeneralizedFunctionKind.for_degree(self.degree)

    @property
    def output_frame(self):
        """Odd programs end with the system-register map I x Omega (Omega^T when transposed)."""
        return self.degree % 2 == 1


def op_counts(program):
    """
    Tally the operators of a program.

    Args:
        program (GqsvtProgram): Assembled program

    Returns:
        tuple: (rotation_count, controlled_count)
    """
    rotations = sum(1 for op in program.ops if op.tag == OpTag.ROTATION)
    return rotations, len(program.ops) - rotations


# ==================== ASSEMBLY ====================

def _controlled_sequence(d):
    """Controlled tags in time order for degree d (no transpose)."""
    first = [OpTag.M if j % 2 == 1 else OpTag.MT for j in range(1, d + 1)]
    if d % 2 == 0:
        second = [OpTag.NT if j % 2 == 1 else OpTag.N for j in range(1, d + 1)]
    else:
        second = [OpTag.N if j % 2 == 1 else OpTag.NT for j in range(1, d + 1)]
    return first + second


def assemble_program(phases, target, transpose=False, subnormalization=1.0):
    """
    Interleave rotations with controlled walks.

    Even d: R0, M, R1, M~, ..., M~, R_d, N~, R_{d+1}, N, ..., N, R_2d.
    Odd d:  R0, (M, R, M~, R)^((d-1)/2), M, R_d, (N, R, N~, R)^((d-1)/2), N, R_2d.
    Transposition swaps M <-> M~ and N <-> N~.

    Args:
        phases (PhaseFactorSet): Angles for the shifted polynomial of degree 2d
        target (MonomialPoly): Target f of degree d
        transpose (bool): Realize the function of A^T
        subnormalization (float): Scale recorded for downstream consumers

    Returns:
        GqsvtProgram: Assembled program
    """
    d = target.degree
    if len(phases.theta) != 2 * d + 1:
        raise ArityError(f"degree {d} needs {2 * d + 1} rotations, phases carry {len(phases.theta)}")

    ops = [ProgramOp(OpTag.ROTATION, 0)]
    for j, tag in enumerate(_controlled_sequence(d), start=1):
        if transpose:
            tag = OpTag.TRANSPOSED[tag]
        ops.append(ProgramOp(tag))
        ops.append(ProgramOp(OpTag.ROTATION, j))

    ops = tuple(ops)
    return GqsvtProgram(ops, phases, target, float(subnormalization), bool(transpose),
                        labels=tuple(op.label() for op in ops))


def synthesize_program(target, transpose=False):
    """
    Normalize a target, synthesize its phases and assemble the program.

    The target is divided by poly_max * (1 + 1e-10); the zero polynomial keeps scale 1.

    Args:
        target (MonomialPoly): Polynomial f
        transpose (bool): Realize the function of A^T

    Returns:
        GqsvtProgram: Program whose block equals f^kind(A/alpha) / subnormalization
    """
    peak = poly_max_on_interval(target)
    scale = peak * (1.0 + HEADROOM) if peak > 0 else 1.0
    normalized = target.scaled(1.0 / scale)
    shifted = shift_to_unit_circle(laurent_from_chebyshev(monomial_to_chebyshev(normalized)))
    phases = solve_phases(shifted)
    log_debug(f"synthesize_program: degree {target.degree}, scale {scale:.6g}, transpose {transpose}")
    return assemble_program(phases, target, transpose, subnormalization=scale)


# ==================== EXECUTION ====================

class GqsvtBackend:
    """
    Walk operators and controlled operators of one encoding, ready to execute programs.
    """

    def __init__(self, enc, idle='polar'):
        """
        Prepare the operators of an encoding.

        Args:
            enc (BlockEncodingSpec): Single-ancilla encoding
            idle (str): Inactive-branch convention passed to build_controlled_ops
        """
        if enc.ancillas != 1:
            raise ShapeError("the GQSVT engine executes single-ancilla encodings")
        self.enc = enc
        self.pair = qubitize(enc)
        self.ops = build_controlled_ops(self.pair, enc, idle=idle)
        self.omega = polar_factor(enc)
        self.dimension = 2 * enc.dimension

    def _check(self, program):
        if len(program.phases.theta) != 2 * program.degree + 1:
            raise ShapeError("program phases do not match its degree")

    def apply(self, program, states):
        """
        Left-multiply a stack of column states by the program unitary.

        Args:
            program (GqsvtProgram): Program to run
            states (np.ndarray): (dimension, k) array

        Returns:
            np.ndarray: Transformed states
        """
        self._check(program)
        states = np.asarray(states, dtype=complex)
        if states.shape[0] != self.dimension:
            raise ShapeError(f"state dimension {states.shape[0]} does not match {self.dimension}")
        k = states.shape[1]
        phases = program.phases
        for op in program.ops:
            if op.tag == OpTag.ROTATION:
                lam = phases.lam if op.index == 0 else 0.0
                gate = rotation(phases.theta[op.index], phases.phi[op.index], lam)
                states = np.einsum('ij,jdk->idk', gate, states.reshape(2, -1, k)).reshape(-1, k)
            else:
                states = self.ops.by_tag(op.tag) @ states
        if program.output_frame:
            frame = self.omega.T if program.transpose else self.omega
            n = self.enc.n
            states = np.einsum('ij,ajk->aik', frame, states.reshape(-1, n, k)).reshape(-1, k)
        return states

    def unitary(self, program):
        """Full program unitary, including the odd-parity output frame."""
        return self.apply(program, np.eye(self.dimension, dtype=complex))

    def extract_block(self, program):
        n = self.enc.n
        columns = np.zeros((self.dimension, n), dtype=complex)
        columns[:n, :n] = np.eye(n)
        return self.apply(program, columns)[:n, :]

    def apply_to_state(self, program, phi):
        phi = np.asarray(phi, dtype=complex).reshape(-1)
        n = self.enc.n
        if phi.shape[0] != n:
            raise ShapeError(f"state has length {phi.shape[0]}, expected {n}")
        if abs(np.linalg.norm(phi) - 1.0) > 1e-10:
            raise InputError("input state must have unit norm")
        start = np.zeros((self.dimension, 1), dtype=complex)
        start[:n, 0] = phi
        full = self.apply(program, start)[:, 0]
        projected = full[:n].copy()
        return full, projected, float(np.vdot(projected, projected).real)


_backends = {}
_backends_lock = threading.Lock()


def backend_for(enc):
    """
    Shared backend of an encoding (built once per encoding object).

    Args:
        enc (BlockEncodingSpec): Encoding

    Returns:
        GqsvtBackend: Prepared backend
    """
    with _backends_lock:
        cached = _backends.get(id(enc))
        if cached is not None and cached.enc is enc:
            return cached
    backend = GqsvtBackend(enc)
    with _backends_lock:
        if len(_backends) > 64:
            _backends.clear()
        _backends[id(enc)] = backend
    return backend


def program_unitary(program, enc):
    """Full 2^(1+a+s) unitary of a program."""
    return backend_for(enc).unitary(program)


def extract_block(program, enc):
    """
    The <0, 0_a| . |0, 0_a> block of the program unitary.

    Args:
        program (GqsvtProgram): Assembled program
        enc (BlockEncodingSpec): Encoding the program runs against

    Returns:
        np.ndarray: n x n complex block, equal to f^kind(A/alpha) / subnormalization
    """
    return backend_for(enc).extract_block(program)


def apply_to_state(program, enc, phi):
    """
    Run a program on |0>|0_a>|phi>.

    Args:
        program (GqsvtProgram): Assembled program
        enc (BlockEncodingSpec): Encoding
        phi (np.ndarray): Unit vector of length n

    Returns:
        tuple: (full statevector, projected vector, success probability)
    """
    return backend_for(enc).apply_to_state(program, phi)


def success_probability(program, enc, phi):
    """Squared norm of the post-selected output of apply_to_state."""
    return apply_to_state(program, enc, phi)[2]


def program_unitarity_residual(program, enc):
    return unitarity_residual(program_unitary(program, enc))


# ==================== ORACLE ====================

def _kind_bases(svd, kind, transpose=False):
    """(left, right) singular-vector bases of a generalized function kind."""
    if kind not in GeneralizedFunctionKind.ALL:
        raise ValueError(f"unknown generalized function kind {kind!r}")
    V, W = (svd.W, svd.V) if transpose else (svd.V, svd.W)
    if kind == GeneralizedFunctionKind.RIGHT:
        return V, V
    if kind == GeneralizedFunctionKind.DIAMOND:
        return W, V
    return W, W


def oracle_generalized_function(A_scaled, f, kind):
    """
    Generalized matrix function computed directly from the SVD.

    Args:
        A_scaled (np.ndarray): Real matrix with ||A|| <= 1
        f (MonomialPoly): Polynomial applied to the singular values
        kind (str): GeneralizedFunctionKind value

    Returns:
        np.ndarray: right: sum f(s)|v><v|, diamond: sum f(s)|w><v|, left: sum f(s)|w><w|
    """
    A_scaled = np.asarray(A_scaled, dtype=float)
    norm = float(np.linalg.norm(A_scaled, 2)) if A_scaled.size else 0.0
    if norm > 1.0 + 1e-12:
        raise ScaleError(f"oracle needs ||A|| <= 1, got {norm:.17g}")
    svd = canonical_svd(A_scaled)
    left, right = _kind_bases(svd, kind)
    return ((left * f(svd.sigma)) @ right.T).astype(complex)


def generalized_action(svd, values, kind, vector, transpose=False):
    """
    Apply a generalized function whose values on the singular values are already known.

    Args:
        svd (SingularTriplets): Canonical SVD of A/alpha
        values (np.ndarray): f(sigma_k) for every singular value
        kind (str): GeneralizedFunctionKind value
        vector (np.ndarray): Input vector
        transpose (bool): Act with the function of (A/alpha)^T

    Returns:
        np.ndarray: left diag(values) right^T vector
    """
    values = np.asarray(values)
    if values.shape != svd.sigma.shape:
        raise ShapeError(f"expected {svd.sigma.shape[0]} singular-value images, got shape {values.shape}")
    left, right = _kind_bases(svd, kind, transpose)
    return left @ (values * (right.T @ np.asarray(vector)))


if __name__ == "__main__":
    # Test the engine against the oracle
    from simulator.block_encoding import build_standard_encoding

    print("Testing GQSVT engine...")
    rng = np.random.default_rng(3)
    A = rng.standard_normal((4, 4))
    enc = build_standard_encoding(A, 1.1 * np.linalg.norm(A, 2))
    f = MonomialPoly([0.1, -0.5, 0.0, 1.0])
    program = synthesize_program(f)
    print(f"ops: {' '.join(program.labels)}")
    block = extract_block(program, enc) * program.subnormalization
    oracle = oracle_generalized_function(enc.scaled, f, program.kind)
    print(f"max block error: {np.max(np.abs(block - oracle)):.3g}")
