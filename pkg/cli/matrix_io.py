"""
Matrix, Vector and Polynomial Input
Reads dense CSV and Matrix Market files, expands generator specs such as
"spd 8 cond 10 seed 7", and parses right-hand sides and polynomial expressions.
"""

import csv
import os
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import io as sio

from simulator.poly_core import MonomialPoly
from shared.errors import InputError, ShapeError
from shared.utils import is_power_of_two, log_debug, log_info, next_power_of_two


@dataclass
class MatrixSource:
    """
    A parsed matrix with where it came from.

    Attributes:
        matrix (np.ndarray): Dense real matrix (padded when requested)
        source (str): Path or generator spec, verbatim
        kind (str): 'csv', 'mtx' or 'generator'
        original_size (int): Dimension before padding
    """
    matrix: np.ndarray
    source: str
    kind: str
    original_size: int

    @property
    def padded(self):
        return self.matrix.shape[0] != self.original_size

    def metadata(self):
        return {"source": self.source, "kind": self.kind,
                "original_size": self.original_size, "size": int(self.matrix.shape[0])}


# ==================== GENERATORS ====================

GENERATOR_PATTERNS = {
    "identity": re.compile(r"^identity\s+(\d+)$"),
    "spd": re.compile(r"^spd\s+(\d+)\s+cond\s+(\S+)\s+seed\s+(\d+)$"),
    "nonsym": re.compile(r"^nonsym\s+(\d+)\s+cond\s+(\S+)\s+seed\s+(\d+)$"),
    "tridiag": re.compile(r"^tridiag\s+(\d+)\s+(\S+)\s+(\S+)\s+(\S+)$"),
}


def _random_orthogonal(n, rng):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def _spectrum(n, cond):
    if n == 1:
        return np.ones(1)
    return np.geomspace(1.0 / cond, 1.0, n)


def generate_matrix(spec):
    """
    Expand a generator spec.

    identity n                  -> I_n
    spd n cond k seed s         -> Q diag(geomspace(1/k, 1, n)) Q^T
    nonsym n cond k seed s      -> U diag(geomspace(1/k, 1, n)) V^T
    tridiag n a b c             -> subdiagonal a, diagonal b, superdiagonal c

    Random factors come from Philox(seed).

    Args:
        spec (str): Generator spec

    Returns:
        np.ndarray: Generated matrix, or None if spec is not a generator
    """
    text = " ".join(spec.split())
    for name, pattern in GENERATOR_PATTERNS.items():
        match = pattern.match(text)
        if not match:
            continue
        n = int(match.group(1))
        if n < 1:
            raise InputError(f"generator size must be positive: {spec!r}")
        if name == "identity":
            return np.eye(n)
        if name == "tridiag":
            try:
                a, b, c = (float(Fraction(g)) for g in match.groups()[1:])
            except (ValueError, ZeroDivisionError):
                raise InputError(f"tridiag entries must be numbers: {spec!r}")
            return np.diag(np.full(n, b)) + np.diag(np.full(n - 1, a), -1) + np.diag(np.full(n - 1, c), 1)

        try:
            cond = float(match.group(2))
        except ValueError:
            raise InputError(f"condition number must be a number: {spec!r}")
        if not cond >= 1.0:
            raise InputError(f"condition number must be >= 1: {spec!r}")
        rng = np.random.Generator(np.random.Philox(int(match.group(3))))
        sigma = _spectrum(n, cond)
        if name == "spd":
            Q = _random_orthogonal(n, rng)
            A = (Q * sigma) @ Q.T
            return 0.5 * (A + A.T)
        U = _random_orthogonal(n, rng)
        V = _random_orthogonal(n, rng)
        return (U * sigma) @ V.T
    return None


# ==================== FILE READERS ====================

def _read_csv(path):
    rows = []
    width = None
    with open(path, 'r', encoding='utf-8', newline='') as handle:
        for line_no, row in enumerate(csv.reader(handle), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if row[0].lstrip().startswith('#'):
                continue
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                raise InputError(f"non-numeric entry in {path}", line=line_no)
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise InputError(f"row has {len(values)} entries, expected {width}", line=line_no)
            rows.append(values)
    if not rows:
        raise InputError(f"{path} contains no matrix rows")
    return np.array(rows, dtype=float)


def _prescan_matrix_market(path):
    """Check header, size line and entry lines so errors carry line numbers."""
    with open(path, 'r', encoding='utf-8') as handle:
        lines = handle.read().splitlines()
    if not lines or not lines[0].lower().startswith('%%matrixmarket'):
        raise InputError("missing %%MatrixMarket header", line=1)
    header = lines[0].lower().split()
    if len(header) < 5 or header[1] != 'matrix':
        raise InputError("malformed %%MatrixMarket header", line=1)
    layout, field, symmetry = header[2], header[3], header[4]
    if layout not in ('coordinate', 'array'):
        raise InputError(f"unsupported layout {layout!r}", line=1)
    if field not in ('real', 'integer'):
        raise InputError(f"unsupported field {field!r}", line=1)
    if symmetry not in ('general', 'symmetric', 'skew-symmetric'):
        raise InputError(f"unsupported symmetry {symmetry!r}", line=1)

    size_line = None
    entries = 0
    for line_no, line in enumerate(lines[1:], start=2):
        stripped = line.strip()
        if not stripped or stripped.startswith('%'):
            continue
        parts = stripped.split()
        if size_line is None:
            expected = 3 if layout == 'coordinate' else 2
            if len(parts) != expected or not all(p.isdigit() for p in parts):
                raise InputError("malformed size line", line=line_no)
            size_line = [int(p) for p in parts]
            continue
        expected = 3 if layout == 'coordinate' else 1
        if len(parts) != expected:
            raise InputError(f"expected {expected} fields", line=line_no)
        try:
            if layout == 'coordinate':
                i, j = int(parts[0]), int(parts[1])
                if not (1 <= i <= size_line[0] and 1 <= j <= size_line[1]):
                    raise InputError(f"index ({i}, {j}) out of range", line=line_no)
            float(parts[-1])
        except ValueError:
            raise InputError("non-numeric entry", line=line_no)
        entries += 1

    if size_line is None:
        raise InputError("missing size line", line=len(lines))
    if size_line[0] != size_line[1]:
        raise ShapeError(f"matrix is {size_line[0]} x {size_line[1]}, expected square")
    if layout == 'coordinate' and entries != size_line[2]:
        raise InputError(f"size line announces {size_line[2]} entries, found {entries}", line=len(lines))
    return layout


def _read_matrix_market(path):
    _prescan_matrix_market(path)
    data = sio.mmread(path)
    if hasattr(data, 'toarray'):
        data = data.toarray()
    return np.asarray(data, dtype=float)


# ==================== PARSING ====================

def pad_to_power_of_two(A):
    """
    Pad with an identity diagonal block up to the next power of two.

    Args:
        A (np.ndarray): Square matrix

    Returns:
        np.ndarray: [[A, 0], [0, I]]
    """
    n = A.shape[0]
    target = next_power_of_two(n)
    if target == n:
        return A
    padded = np.eye(target)
    padded[:n, :n] = A
    return padded


def parse_matrix(source, pad=False):
    """
    Load a matrix from a file or a generator spec.

    Args:
        source (str): CSV path, Matrix Market (.mtx) path, or generator spec
        pad (bool): Pad to the next power of two instead of failing

    Returns:
        MatrixSource: Matrix with metadata

    Raises:
        InputError: Unreadable file or malformed content (with line number)
        ShapeError: Not square, or not a power of two without pad
    """
    generated = generate_matrix(source)
    if generated is not None:
        A, kind = generated, "generator"
    elif os.path.exists(source):
        try:
            if source.lower().endswith(('.mtx', '.mm')):
                A, kind = _read_matrix_market(source), "mtx"
            else:
                A, kind = _read_csv(source), "csv"
        except OSError as e:
            raise InputError(f"cannot read {source}: {e}")
    else:
        raise InputError(f"{source!r} is neither a file nor a generator spec")

    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"matrix is {A.shape[0]} x {A.shape[1] if A.ndim == 2 else 1}, expected square")
    if not np.all(np.isfinite(A)):
        raise InputError("matrix has non-finite entries")
    original = A.shape[0]
    if not is_power_of_two(original):
        if not pad:
            raise ShapeError(f"dimension {original} is not a power of two (use --pad)")
        A = pad_to_power_of_two(A)
        log_info(f"Padded {original} x {original} matrix to {A.shape[0]}")
    log_debug(f"parse_matrix: {kind} {source!r}, size {A.shape[0]}")
    return MatrixSource(A, source, kind, original)


def write_matrix(A, path):
    """
    Write a matrix as CSV (shortest round-trip floats) or Matrix Market (17 digits).

    Args:
        A (np.ndarray): Real matrix
        path (str): Destination; .mtx selects Matrix Market
    """
    A = np.asarray(A, dtype=float)
    if path.lower().endswith(('.mtx', '.mm')):
        sio.mmwrite(path, A, field='real', precision=17)
        return
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        for row in A:
            writer.writerow([repr(float(v)) for v in row])


def parse_vector(source, n):
    """
    Right-hand side from 'ones', 'e1', 'random seed k' or a file, normalized to unit length.

    Args:
        source (str): Vector source
        n (int): Required length (padded vectors are extended with zeros)

    Returns:
        np.ndarray: Unit vector of length n
    """
    text = " ".join(str(source).split()).lower()
    match = re.match(r"^random\s+seed\s+(\d+)$", text)
    if text == "ones":
        b = np.ones(n)
    elif text == "e1":
        b = np.zeros(n)
        b[0] = 1.0
    elif match:
        b = np.random.Generator(np.random.Philox(int(match.group(1)))).standard_normal(n)
    elif os.path.exists(source):
        b = _read_csv(source).reshape(-1)
        if b.shape[0] < n:
            b = np.concatenate((b, np.zeros(n - b.shape[0])))
    else:
        raise InputError(f"{source!r} is not a vector source")

    if b.shape[0] != n:
        raise ShapeError(f"vector has length {b.shape[0]}, matrix has {n} rows")
    norm = np.linalg.norm(b)
    if norm == 0:
        raise InputError("right-hand side must be nonzero")
    return b / norm


TERM_PATTERN = re.compile(
    r"(?P<sign>[+-]?)"
    r"(?P<coeff>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?(?:/\d+)?)?"
    r"(?P<star>\*)?"
    r"(?P<var>x(?:\^(?P<power>\d+))?)?"
)


def parse_polynomial(text):
    """
    Parse a monomial expression such as "x^3 - 0.5x", "1/2 x^2 + 3" or "-2*x + 1".

    Args:
        text (str): Expression in x with rational or decimal coefficients

    Returns:
        MonomialPoly: Parsed polynomial (repeated powers are summed)
    """
    compact = re.sub(r"\s+", "", str(text)).lower()
    if not compact:
        raise InputError("empty polynomial")

    terms = {}
    pos = 0
    while pos < len(compact):
        match = TERM_PATTERN.match(compact, pos)
        if not match or match.end() == pos or not (match.group('coeff') or match.group('var')):
            raise InputError(f"cannot parse polynomial at column {pos + 1}: {text!r}")
        if pos > 0 and not match.group('sign'):
            raise InputError(f"missing '+' or '-' at column {pos + 1}: {text!r}")
        if match.group('star') and not (match.group('coeff') and match.group('var')):
            raise InputError(f"misplaced '*' at column {pos + 1}: {text!r}")
        try:
            coeff = Fraction(match.group('coeff')) if match.group('coeff') else Fraction(1)
        except (ValueError, ZeroDivisionError):
            raise InputError(f"bad coefficient {match.group('coeff')!r}")
        if match.group('sign') == '-':
            coeff = -coeff
        if match.group('var'):
            power = int(match.group('power')) if match.group('power') else 1
        else:
            power = 0
        terms[power] = terms.get(power, Fraction(0)) + coeff
        pos = match.end()

    coeffs = np.zeros(max(terms) + 1)
    for power, value in terms.items():
        coeffs[power] = float(value)
    return MonomialPoly(coeffs)
