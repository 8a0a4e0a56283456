"""
Swap Test
Estimates Re<u|v> for the post-selected outputs u, v of two GQSVT programs run on the same
encoding: H on a fresh qubit, 0-controlled U program, 1-controlled V program, H, then
measure the fresh qubit together with the control and ancilla registers.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from simulator.engine import backend_for
from shared.errors import InputError, ShapeError
from shared.utils import log_debug

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2)


@dataclass(frozen=True)
class OverlapEstimate:
    """
    Result of one swap test.

    Attributes:
        p0 (float): Probability (or frequency) of |0>|0...0>
        p1 (float): Probability (or frequency) of |1>|0...0>
        re_overlap (float): p0 - p1; in exact mode taken from the branch amplitudes, which
            avoids the cancellation of two nearly equal probabilities
        shots (int): Number of samples, None in exact mode
        stderr (float): Standard error of re_overlap, 0 in exact mode
        seed (int): Seed of the sampling stream, None in exact mode
    """
    p0: float
    p1: float
    re_overlap: float
    shots: Optional[int] = None
    stderr: float = 0.0
    seed: Optional[int] = None

    @property
    def exact(self):
        return self.shots is None

    def to_dict(self):
        return {"p0": self.p0, "p1": self.p1, "re_overlap": self.re_overlap,
                "shots": self.shots, "stderr": self.stderr, "seed": self.seed}


def _branch_outputs(Uprog, Vprog, enc, b_state):
    """Amplitudes of the 0 and 1 branches after the controlled programs, before the last H."""
    backend = backend_for(enc)
    n = enc.n
    b_state = np.asarray(b_state, dtype=complex).reshape(-1)
    if b_state.shape[0] != n:
        raise ShapeError(f"state has length {b_state.shape[0]}, register holds {n}")

    start = np.zeros(backend.dimension, dtype=complex)
    start[:n] = b_state
    state = np.einsum('ij,jd->id', HADAMARD, np.stack((start, np.zeros_like(start))))
    return np.stack((
        backend.apply(Uprog, state[0][:, None])[:, 0],
        backend.apply(Vprog, state[1][:, None])[:, 0],
    ))


def _outcome_probabilities(branches, n):
    final = np.einsum('ij,jd->id', HADAMARD, branches)
    p0 = float(np.sum(np.abs(final[0, :n]) ** 2))
    p1 = float(np.sum(np.abs(final[1, :n]) ** 2))
    return p0, p1


def exact_overlap(Uprog, Vprog, enc, b_state):
    """
    Exact outcome probabilities of the swap-test circuit.

    Args:
        Uprog (GqsvtProgram): Program on the 0 branch
        Vprog (GqsvtProgram): Program on the 1 branch
        enc (BlockEncodingSpec): Shared encoding
        b_state (np.ndarray): Unit input vector

    Returns:
        OverlapEstimate: p0, p1 and Re<u|v> = p0 - p1
    """
    branches = _branch_outputs(Uprog, Vprog, enc, b_state)
    p0, p1 = _outcome_probabilities(branches, enc.n)
    # p0 - p1 = 2 Re<branch0|branch1> on the success subspace
    overlap = 2.0 * float(np.vdot(branches[0, :enc.n], branches[1, :enc.n]).real)
    return OverlapEstimate(p0, p1, overlap)


def sampled_overlap(Uprog, Vprog, enc, b_state, shots, seed, rng=None):
    """
    Shot-sampled swap test.

    Draws `shots` categorical samples over (|0>|0...0>, |1>|0...0>, other).

    Args:
        Uprog (GqsvtProgram): Program on the 0 branch
        Vprog (GqsvtProgram): Program on the 1 branch
        enc (BlockEncodingSpec): Shared encoding
        b_state (np.ndarray): Unit input vector
        shots (int): Number of samples, >= 1
        seed (int): Philox seed, recorded in the estimate
        rng (np.random.Generator): Stream to draw from instead of Philox(seed)

    Returns:
        OverlapEstimate: Empirical frequencies with stderr sqrt((p0+p1-(p0-p1)^2)/shots)
    """
    shots = int(shots)
    if shots < 1:
        raise InputError("shots must be at least 1")
    p0, p1 = _outcome_probabilities(_branch_outputs(Uprog, Vprog, enc, b_state), enc.n)
    rest = max(0.0, 1.0 - p0 - p1)
    probs = np.array([p0, p1, rest])
    probs = probs / probs.sum()

    if rng is None:
        rng = np.random.Generator(np.random.Philox(seed))
    counts = rng.multinomial(shots, probs)
    f0, f1 = counts[0] / shots, counts[1] / shots
    estimate = f0 - f1
    stderr = float(np.sqrt(max(f0 + f1 - estimate ** 2, 0.0) / shots))
    log_debug(f"sampled_overlap: shots {shots}, exact {p0 - p1:.6g}, estimate {estimate:.6g}")
    return OverlapEstimate(float(f0), float(f1), float(estimate), shots, stderr, seed)
