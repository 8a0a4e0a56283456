"""
Block Encodings and Qubitization
Builds (alpha, a, 0)-block encodings of real matrices, completes the missing blocks from
the SVD, forms the walk operators W and W~, and the four controlled operators M, M~, N, N~
consumed by the GQSVT engine.

Register order everywhere is (ancillas, system) with the ancilla register most
significant, so the zero-ancilla block is the leading n x n block.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from shared.utils import (
    ENCODING_TOL, OPERATOR_TOL, RANK_TOL, EIGEN_ACTION_TOL, MAX_IDENTITY_ANCILLAS,
    is_power_of_two, log_debug, log_info
)
from shared.errors import (
    CapacityError, ConstructionError, QubitizationError, ScaleError, ShapeError
)

KET0 = np.array([1.0, 0.0])
KET1 = np.array([0.0, 1.0])
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
OMEGA_PLUS = np.array([1.0, 1.0j]) / np.sqrt(2)
OMEGA_MINUS = np.array([1.0, -1.0j]) / np.sqrt(2)


# ==================== TYPES ====================

@dataclass(frozen=True)
class SingularTriplets:
    """Canonical SVD A/alpha = sum_k sigma_k |w_k><v_k| (columns of V and W)."""
    sigma: np.ndarray
    V: np.ndarray
    W: np.ndarray

    @property
    def eta(self):
        return np.arccos(np.clip(self.sigma, 0.0, 1.0))


@dataclass(frozen=True)
class BlockEncodingSpec:
    """
    Block encoding of A/alpha in the zero-ancilla block of U.

    Attributes:
        A (np.ndarray): Real n x n matrix, n = 2^s
        alpha (float): Scale, alpha >= ||A||
        ancillas (int): Ancilla qubit count a
        U (np.ndarray): Unitary of dimension 2^(a+s)
        svd (SingularTriplets): Canonical SVD of A/alpha
        pi_mask (np.ndarray): Diagonal 0/1 mask of Pi
        pi_tilde_mask (np.ndarray): Diagonal 0/1 mask of Pi~
    """
    A: np.ndarray
    alpha: float
    ancillas: int
    U: np.ndarray
    svd: SingularTriplets
    pi_mask: np.ndarray
    pi_tilde_mask: np.ndarray

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def system_qubits(self):
        return int(self.n).bit_length() - 1

    @property
    def dimension(self):
        return self.U.shape[0]

    @property
    def scaled(self):
        return self.A / self.alpha

    def projector(self, tilde=False):
        """Dense form of Pi (or Pi~)."""
        mask = self.pi_tilde_mask if tilde else self.pi_mask
        return np.diag(mask.astype(float))


@dataclass(frozen=True)
class QubitizedPair:
    """Walk operators W = (2 Pi~ - I) U and W~ = (2 Pi - I) U^dagger."""
    W: np.ndarray
    Wt: np.ndarray


@dataclass(frozen=True)
class ControlledOperatorSet:
    """
    The four controlled walks on (control, ancillas, system).

    Attributes:
        M, Mt, N, Nt (np.ndarray): Unitaries of dimension 2^(1+a+s)
        idle (str): 'polar' or 'identity', the operator on the inactive control branch
    """
    M: np.ndarray
    Mt: np.ndarray
    N: np.ndarray
    Nt: np.ndarray
    idle: str = 'polar'

    def by_tag(self, tag):
        return {'M': self.M, 'Mt': self.Mt, 'N': self.N, 'Nt': self.Nt}[tag]


# ==================== HELPERS ====================

def unitarity_residual(U):
    """
    Max-entry deviation of U^dagger U from the identity.

    Args:
        U (np.ndarray): Square matrix

    Returns:
        float: max |U^dagger U - I|
    """
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))


def canonical_svd(B):
    """
    SVD with a reproducible basis.

    sigma is descending (LAPACK order breaks ties by index); the first nonzero component
    of every v_k is made positive, flipping w_k with it; sigma is clamped to [0, 1] and
    values below 1e-14 * sigma_max become exact zeros.

    Args:
        B (np.ndarray): Real square matrix with ||B|| <= 1 up to roundoff

    Returns:
        SingularTriplets: sigma, V (columns v_k), W (columns w_k)
    """
    Wm, sigma, Vt = linalg.svd(B)
    V = Vt.T.copy()
    Wm = Wm.copy()
    for k in range(V.shape[1]):
        nonzero = np.flatnonzero(np.abs(V[:, k]) > 1e-12)
        if nonzero.size and V[nonzero[0], k] < 0:
            V[:, k] *= -1
            Wm[:, k] *= -1
    sigma = np.minimum(sigma, 1.0)
    if sigma.size and sigma[0] > 0:
        sigma = np.where(sigma < RANK_TOL * sigma[0], 0.0, sigma)
    return SingularTriplets(sigma, V, Wm)


def _zero_ancilla_mask(ancillas, n):
    return np.arange((2 ** ancillas) * n) < n


def _as_square(A):
    A = np.asarray(A)
    if np.iscomplexobj(A):
        if np.any(A.imag != 0):
            raise ShapeError("only real matrices can be block encoded")
        A = A.real
    A = A.astype(float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {A.shape}")
    if not is_power_of_two(A.shape[0]):
        raise ShapeError(f"dimension {A.shape[0]} is not a power of two")
    return A


def polar_factor(spec):
    """
    Omega = sum_k |w_k><v_k|, the orthogonal map carrying right to left singular vectors.

    Equals the identity for symmetric positive semidefinite A.
    """
    return spec.svd.W @ spec.svd.V.T


# ==================== CONSTRUCTION ====================

def build_standard_encoding(A, alpha):
    """
    Single-ancilla encoding U = [[A/alpha, S], [S, -A/alpha]].

    S = sum_k sqrt(1 - sigma_k^2) |w_k><v_k| completes U to a unitary.

    Args:
        A (np.ndarray): Real n x n matrix, n a power of two
        alpha (float): Scale >= ||A||

    Returns:
        BlockEncodingSpec: Encoding with a = 1
    """
    A = _as_square(A)
    alpha = float(alpha)
    if not alpha > 0:
        raise ScaleError(f"alpha must be positive, got {alpha}")
    norm = float(linalg.norm(A, 2)) if A.size else 0.0
    if norm > alpha * (1.0 + 1e-12):
        raise ScaleError(f"||A|| = {norm:.17g} exceeds alpha = {alpha:.17g}")

    scaled = A / alpha
    svd = canonical_svd(scaled)
    S = svd.W @ np.diag(np.sqrt(1.0 - svd.sigma ** 2)) @ svd.V.T
    U = np.block([[scaled, S], [S, -scaled]])

    n = A.shape[0]
    mask = _zero_ancilla_mask(1, n)
    spec = BlockEncodingSpec(A, alpha, 1, U, svd, mask, mask.copy())
    log_debug(f"build_standard_encoding: n={n}, alpha={alpha:.6g}, sigma_max={svd.sigma[0]:.6g}")
    return spec


def encoding_from_unitary(A, alpha, U, ancillas):
    """
    Wrap an externally supplied unitary as an encoding of A/alpha (not verified here).

    Args:
        A (np.ndarray): Encoded matrix
        alpha (float): Scale
        U (np.ndarray): Candidate unitary of dimension 2^(a+s)
        ancillas (int): Ancilla count a

    Returns:
        BlockEncodingSpec: Spec carrying U as given
    """
    A = _as_square(A)
    U = np.asarray(U)
    expected = (2 ** ancillas) * A.shape[0]
    if U.shape != (expected, expected):
        raise ShapeError(f"U has shape {U.shape}, expected {(expected, expected)}")
    mask = _zero_ancilla_mask(ancillas, A.shape[0])
    return BlockEncodingSpec(A, float(alpha), ancillas, U, canonical_svd(A / alpha), mask, mask.copy())


def _ancilla_rotation(dim, rng):
    """Random orthogonal matrix on the ancilla space fixing |0...0>."""
    G = np.eye(dim)
    if dim > 1:
        Q, R = np.linalg.qr(rng.standard_normal((dim - 1, dim - 1)))
        G[1:, 1:] = Q * np.sign(np.diag(R))
    return G


def dilate_encoding(spec, extra_ancillas, seed):
    """
    Embed an encoding into a larger ancilla register.

    U' = (G_L x I)(I x U)(G_R x I) with G_L, G_R random orthogonal ancilla rotations that
    fix |0...0>, so the zero-ancilla block still equals A/alpha.

    Args:
        spec (BlockEncodingSpec): Source encoding
        extra_ancillas (int): Number of ancilla qubits to add
        seed (int): Philox seed for the ancilla rotations

    Returns:
        BlockEncodingSpec: Encoding with a = spec.ancillas + extra_ancillas
    """
    if extra_ancillas < 0:
        raise ShapeError("extra_ancillas must be non-negative")
    if extra_ancillas == 0:
        return spec
    rng = np.random.Generator(np.random.Philox(seed))
    ancillas = spec.ancillas + extra_ancillas
    dim = 2 ** ancillas
    n = spec.n
    embedded = np.kron(np.eye(2 ** extra_ancillas), spec.U)
    left = np.kron(_ancilla_rotation(dim, rng), np.eye(n))
    right = np.kron(_ancilla_rotation(dim, rng), np.eye(n))
    U = left @ embedded @ right
    mask = _zero_ancilla_mask(ancillas, n)
    return BlockEncodingSpec(spec.A, spec.alpha, ancillas, U, spec.svd, mask, mask.copy())


# ==================== VERIFICATION ====================

def verify_block_encoding(spec):
    """
    Residual of an encoding: max of unitarity and block-extraction residuals.

    Args:
        spec (BlockEncodingSpec): Encoding to check

    Returns:
        float: Residual; the encoding is accepted when <= 1e-10
    """
    unitarity = unitarity_residual(spec.U)
    block = spec.U[np.ix_(spec.pi_tilde_mask, spec.pi_mask)]
    block_residual = float(np.max(np.abs(spec.scaled - block)))
    residual = max(unitarity, block_residual)
    if residual > ENCODING_TOL:
        log_info(f"verify_block_encoding: rejected (unitarity {unitarity:.3g}, block {block_residual:.3g})")
    return residual


def _walk_rebuild(svd, transpose=False):
    """sum_k W_sigma_k x |w_k><v_k| (or x |v_k><w_k| when transpose)."""
    n = svd.V.shape[0]
    total = np.zeros((2 * n, 2 * n))
    for k, sigma in enumerate(svd.sigma):
        s = np.sqrt(1.0 - sigma ** 2)
        rotation = np.array([[sigma, s], [-s, sigma]])
        left, right = (svd.V[:, k], svd.W[:, k]) if transpose else (svd.W[:, k], svd.V[:, k])
        total += np.kron(rotation, np.outer(left, right))
    return total


def qubitize(spec):
    """
    Walk operators W = (2 Pi~ - I) U and W~ = (2 Pi - I) U^dagger.

    For a = 1 both are checked against their direct-sum rebuild from the SVD; for dilated
    encodings the Pi~ W Pi block is checked against A/alpha.

    Args:
        spec (BlockEncodingSpec): Valid encoding

    Returns:
        QubitizedPair: W and W~
    """
    reflect_tilde = 2.0 * spec.pi_tilde_mask.astype(float) - 1.0
    reflect = 2.0 * spec.pi_mask.astype(float) - 1.0
    W = reflect_tilde[:, None] * spec.U
    Wt = reflect[:, None] * spec.U.conj().T

    if spec.ancillas == 1:
        mismatch = max(float(np.max(np.abs(W - _walk_rebuild(spec.svd)))),
                       float(np.max(np.abs(Wt - _walk_rebuild(spec.svd, transpose=True)))))
    else:
        block = W[np.ix_(spec.pi_tilde_mask, spec.pi_mask)]
        mismatch = float(np.max(np.abs(block - spec.scaled)))
    if mismatch > ENCODING_TOL:
        raise QubitizationError(f"walk operator does not match its direct-sum rebuild ({mismatch:.3g})")

    log_debug(f"qubitize: a={spec.ancillas}, rebuild mismatch {mismatch:.3g}")
    return QubitizedPair(W, Wt)


def _controlled(zero_branch, one_branch):
    return linalg.block_diag(zero_branch, one_branch)


def build_controlled_ops(pair, spec, idle='polar'):
    """
    Controlled walks M, M~ (0-controlled) and N, N~ (1-controlled).

    With idle='polar' the inactive branch applies I x Omega (or its transpose) so that both
    control branches move between the same singular-vector subspaces; with idle='identity'
    the inactive branch is I, which only satisfies the eigen-actions when Omega = I.
    The default therefore differs from the plain M = |0><0| x W + |1><1| x I, which breaks
    for nonsymmetric A; odd-degree programs leave their output in the left frame (|w>).

    Args:
        pair (QubitizedPair): W and W~
        spec (BlockEncodingSpec): Single-ancilla encoding they came from
        idle (str): 'polar' or 'identity'

    Returns:
        ControlledOperatorSet: Validated operators
    """
    if spec.ancillas != 1:
        raise ShapeError("controlled walk operators require a single-ancilla encoding")
    if idle not in ('polar', 'identity'):
        raise ValueError(f"unknown idle branch {idle!r}")

    omega = polar_factor(spec) if idle == 'polar' else np.eye(spec.n)
    omega_e = np.kron(np.eye(2), omega)
    ops = ControlledOperatorSet(
        M=_controlled(pair.W, omega_e),
        Mt=_controlled(pair.Wt, omega_e.T),
        N=_controlled(omega_e.T, pair.W.conj().T),
        Nt=_controlled(omega_e, pair.Wt.conj().T),
        idle=idle,
    )

    for tag in ('M', 'Mt', 'N', 'Nt'):
        residual = unitarity_residual(ops.by_tag(tag))
        if residual > OPERATOR_TOL:
            raise ConstructionError(f"{tag} is not unitary ({residual:.3g})")

    mismatch = eigen_action_residual(ops, spec)
    if mismatch > EIGEN_ACTION_TOL:
        raise ConstructionError(f"controlled operators violate their eigen-actions ({mismatch:.3g})")
    log_debug(f"build_controlled_ops: idle={idle}, eigen-action residual {mismatch:.3g}")
    return ops


def eigen_action_residual(ops, spec):
    """
    Largest deviation of the controlled operators from their action on |omega_+-> x |v_k>, |w_k>.

    M:  |0>phi_+- -> e^{+-i eta}|0>phi~_+-,  |1>phi_+- -> |1>phi~_+-
    M~: |0>phi~_+- -> e^{+-i eta}|0>phi_+-,  |1>phi~_+- -> |1>phi_+-
    N:  |0>phi~_+- -> |0>phi_+-,  |1>phi~_+- -> e^{-+i eta}|1>phi_+-
    N~: |0>phi_+- -> |0>phi~_+-,  |1>phi_+- -> e^{-+i eta}|1>phi~_+-
    """
    worst = 0.0
    svd = spec.svd
    for k, eta in enumerate(svd.eta):
        v, w = svd.V[:, k], svd.W[:, k]
        for sign, omega in ((1, OMEGA_PLUS), (-1, OMEGA_MINUS)):
            phi = np.kron(omega, v)
            phi_t = np.kron(omega, w)
            phase = np.exp(1j * sign * eta)
            cases = (
                (ops.M, KET0, phi, phase, phi_t), (ops.M, KET1, phi, 1.0, phi_t),
                (ops.Mt, KET0, phi_t, phase, phi), (ops.Mt, KET1, phi_t, 1.0, phi),
                (ops.N, KET0, phi_t, 1.0, phi), (ops.N, KET1, phi_t, np.conj(phase), phi),
                (ops.Nt, KET0, phi, 1.0, phi_t), (ops.Nt, KET1, phi, np.conj(phase), phi_t),
            )
            for op, control, source, factor, target in cases:
                out = op @ np.kron(control, source)
                worst = max(worst, float(np.max(np.abs(out - factor * np.kron(control, target)))))
    return worst


# ==================== PROJECTOR IDENTITIES ====================

def pi_z_identity_check(spec, projector_mask=None):
    """
    Verify the projector-controlled-NOT circuit identities.

    Checks C_{I-Pi~}NOT (Z x I) C_{I-Pi~}NOT = Z x (2 Pi~ - I) and that this sandwich applied
    after the 0-controlled U gives W on the control-|0> branch and I - 2 Pi~ on the
    control-|1> branch. Residuals are spectral norms.

    Args:
        spec (BlockEncodingSpec): Encoding with a <= 3
        projector_mask (np.ndarray): Mask used to build the CNOTs; defaults to Pi~

    Returns:
        float: Largest residual
    """
    if spec.ancillas > MAX_IDENTITY_ANCILLAS:
        raise CapacityError(f"projector identity checks support a <= {MAX_IDENTITY_ANCILLAS}")

    dim = spec.dimension
    identity = np.eye(dim)
    pi_true = spec.projector(tilde=True)
    mask = spec.pi_tilde_mask if projector_mask is None else np.asarray(projector_mask, dtype=bool)
    pi_used = np.diag(mask.astype(float))

    cnot = np.kron(PAULI_X, identity - pi_used) + np.kron(np.eye(2), pi_used)
    sandwich = cnot @ np.kron(PAULI_Z, identity) @ cnot
    reflection = 2.0 * pi_true - identity
    pi_z_residual = float(linalg.norm(sandwich - np.kron(PAULI_Z, reflection), 2))

    controlled_u = _controlled(spec.U, identity)
    walk = reflection @ spec.U
    circuit_residual = float(linalg.norm(sandwich @ controlled_u - _controlled(walk, -reflection), 2))

    residual = max(pi_z_residual, circuit_residual)
    log_debug(f"pi_z_identity_check: a={spec.ancillas}, Pi_Z {pi_z_residual:.3g}, circuit {circuit_residual:.3g}")
    return residual


if __name__ == "__main__":
    # Test the encoding pipeline
    print("Testing block encoding...")
    enc = build_standard_encoding(np.array([[0.5]]), 1.0)
    print(f"U =\n{enc.U}")
    print(f"verify residual: {verify_block_encoding(enc):.3g}")
    pair = qubitize(enc)
    ops = build_controlled_ops(pair, enc)
    print(f"eigen-action residual: {eigen_action_residual(ops, enc):.3g}")
    print(f"Pi_Z residual (a=2): {pi_z_identity_check(dilate_encoding(enc, 1, seed=7)):.3g}")
