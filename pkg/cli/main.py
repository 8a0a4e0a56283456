"""
GQSVT Command Line

Runs one experiment per invocation (or a JSON batch of them) and writes a report:
- phases: GQSP angles for a target polynomial
- encode: block encoding, qubitization and controlled-operator checks
- gqsvt:  assemble a program and compare its block with the generalized matrix function
- solve:  BiCG with inner products from exact / oracle / sampled swap tests
- bicg:   classical BiCG reference with its coefficient tables
- bound:  Lanczos convergence bound and the predicted iteration count
"""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

# Add parent directory to path to import shared modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from shared.utils import (
    DEFAULT_MAXIT, DEFAULT_SEED, DEFAULT_SHOTS, DEFAULT_TOL, EXIT_BREAKDOWN, EXIT_FAILURE,
    EXIT_INPUT_ERROR, EXIT_NOT_CONVERGED, EXIT_OK, REPORTS_DIR, Colors, enable_file_logging,
    log_error, log_info, validate_positive
)
from shared.errors import (
    GqsvtError, InapplicableBoundError, InputError, ReportIOError, exit_status_for
)
from shared.protocol import ReportProtocol, ReportType
from simulator.poly_core import (
    laurent_from_chebyshev, monomial_to_chebyshev, random_unit_circle_poly, shift_to_unit_circle
)
from simulator.phase_solver import reconstruction_error, solve_phases
from simulator.phase_solver import unitarity_residual as phase_unitarity_residual
from simulator.block_encoding import (
    build_controlled_ops, build_standard_encoding, dilate_encoding, eigen_action_residual,
    pi_z_identity_check, qubitize, unitarity_residual, verify_block_encoding
)
from simulator.engine import (
    extract_block, op_counts, oracle_generalized_function,
    program_unitarity_residual, synthesize_program
)
from solver.bicg import SolveMode, classical_bicg, depth_report, quantum_bicg
from solver.lanczos import (
    EllipseCenter, bound_from_lanczos, error_norm, iteration_estimate, lanczos_residuals,
    lanczos_tridiagonalize, parse_ellipse, residual_norm_matrix
)
from cli.matrix_io import parse_matrix, parse_polynomial, parse_vector
from cli.reports import emit_report

COMMANDS = ("phases", "encode", "gqsvt", "solve", "bicg", "bound")
MODES = (SolveMode.CLASSICAL,) + SolveMode.QUANTUM


# ==================== CONFIGURATION ====================

@dataclass
class ExperimentConfig:
    """
    One command line invocation.

    Attributes:
        command (str): One of COMMANDS
        matrix (str): File path or generator spec
        vector (str): 'ones', 'e1', 'random seed k' or a file
        poly (str): Monomial expression for phases / gqsvt
        poly_degree (int): Degree of a random phases target
        random (bool): Draw a random unit-circle target
        tol (float): BiCG tolerance (also the bound's epsilon)
        maxit (int): BiCG iteration cap
        mode (str): Inner-product mode of solve
        shots (int): Swap-test samples in sampled mode
        seed (int): Philox seed, recorded verbatim
        alpha (float): Encoding scale; defaults to ||A||
        ancillas (int): Ancilla count for encode (a >= 1)
        transpose (bool): gqsvt realizes the function of A^T
        compare_oracle (bool): gqsvt compares against the SVD oracle
        pad (bool): Pad to the next power of two
        workers (int): Threads for program synthesis / batch runs
        ellipse (str): 'd,c,lambda' for bound, replacing the fitted ellipse
        ellipse_center (str): 'centroid' or 'midpoint' for the fitted ellipse
        out_dir (str): Report directory
        stem (str): Report filename stem (defaults to the command)
    """
    command: str
    matrix: str = None
    vector: str = "ones"
    poly: str = None
    poly_degree: int = None
    random: bool = False
    tol: float = DEFAULT_TOL
    maxit: int = DEFAULT_MAXIT
    mode: str = SolveMode.EXACT
    shots: int = DEFAULT_SHOTS
    seed: int = DEFAULT_SEED
    alpha: float = None
    ancillas: int = 1
    transpose: bool = False
    compare_oracle: bool = False
    pad: bool = False
    workers: int = 1
    ellipse: str = None
    ellipse_center: str = EllipseCenter.CENTROID
    out_dir: str = REPORTS_DIR
    stem: str = None

    @classmethod
    def from_dict(cls, values):
        """Build a config from a batch entry, rejecting unknown keys."""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValueError(f"unknown configuration keys: {', '.join(unknown)}")
        return cls(**values)

    def report_config(self):
        """Configuration as recorded in reports (output location left out)."""
        values = asdict(self)
        values.pop("out_dir")
        return values


def validate_config(config):
    """
    Validate a configuration before running it.

    Args:
        config (ExperimentConfig): Configuration

    Returns:
        tuple: (is_valid, error_message)
    """
    if config.command not in COMMANDS:
        return False, f"Unknown command {config.command!r}"

    if config.command in ("encode", "gqsvt", "solve", "bicg", "bound") and not config.matrix:
        return False, f"{config.command} needs --matrix"

    if config.command == "gqsvt" and not config.poly:
        return False, "gqsvt needs --poly"

    if config.command == "phases":
        if config.random:
            if config.poly_degree is None or int(config.poly_degree) < 0:
                return False, "phases --random needs a non-negative --poly-degree"
        elif not config.poly:
            return False, "phases needs --poly or --random"

    if config.mode not in MODES:
        return False, f"mode must be one of {', '.join(MODES)}"

    for name, allow_zero in (("tol", False), ("maxit", False), ("shots", False), ("workers", False)):
        is_valid, error = validate_positive(getattr(config, name), name, allow_zero)
        if not is_valid:
            return False, error

    if int(config.maxit) != config.maxit or int(config.shots) != config.shots:
        return False, "maxit and shots must be integers"

    if not isinstance(config.seed, int) or config.seed < 0:
        return False, "seed must be a non-negative integer"

    if config.alpha is not None:
        is_valid, error = validate_positive(config.alpha, "alpha")
        if not is_valid:
            return False, error

    if not isinstance(config.ancillas, int) or not 1 <= config.ancillas <= 3:
        return False, "ancillas must be 1, 2 or 3"

    if config.ellipse_center not in EllipseCenter.ALL:
        return False, f"ellipse center must be one of {', '.join(EllipseCenter.ALL)}"

    if config.ellipse is not None:
        try:
            parse_ellipse(config.ellipse)
        except InputError as e:
            return False, str(e)

    return True, ""


# ==================== COMMANDS ====================

def _load_system(config):
    source = parse_matrix(config.matrix, pad=config.pad)
    A = source.matrix
    alpha = float(np.linalg.norm(A, 2)) if config.alpha is None else float(config.alpha)
    return source, A, alpha


def run_phases(config):
    if config.random:
        rng = np.random.Generator(np.random.Philox(config.seed))
        target = random_unit_circle_poly(int(config.poly_degree), rng, max_modulus=0.99)
    else:
        f = parse_polynomial(config.poly)
        target = shift_to_unit_circle(laurent_from_chebyshev(monomial_to_chebyshev(f)))
    phases = solve_phases(target)
    data = dict(phases.to_dict())
    data.update({
        "degree": phases.degree,
        "target": target.coeffs,
        "reconstruction_error": reconstruction_error(phases, target),
        "unitarity_residual": phase_unitarity_residual(phases),
    })
    return ReportType.PHASES, data, None, EXIT_OK


def run_encode(config):
    source, A, alpha = _load_system(config)
    base = build_standard_encoding(A, alpha)
    enc = dilate_encoding(base, config.ancillas - 1, config.seed)
    pair = qubitize(enc)
    data = {
        "matrix": source.metadata(),
        "alpha": alpha,
        "ancillas": enc.ancillas,
        "singular_values": enc.svd.sigma,
        "encoding_residual": verify_block_encoding(enc),
        "walk_residual": max(unitarity_residual(pair.W), unitarity_residual(pair.Wt)),
        "pi_z_residual": pi_z_identity_check(enc),
    }
    if enc.ancillas == 1:
        ops = build_controlled_ops(pair, enc)
        data["controlled_residual"] = max(unitarity_residual(ops.by_tag(t)) for t in ("M", "Mt", "N", "Nt"))
        data["eigen_action_residual"] = eigen_action_residual(ops, enc)
    return ReportType.ENCODING, data, None, EXIT_OK


def run_gqsvt(config):
    source, A, alpha = _load_system(config)
    enc = build_standard_encoding(A, alpha)
    f = parse_polynomial(config.poly)
    program = synthesize_program(f, transpose=config.transpose)
    rotations, controlled = op_counts(program)
    block = extract_block(program, enc) * program.subnormalization
    data = {
        "matrix": source.metadata(),
        "alpha": alpha,
        "degree": program.degree,
        "kind": program.kind,
        "labels": list(program.labels),
        "rotations": rotations,
        "controlled": controlled,
        "subnormalization": program.subnormalization,
        "phases": program.phases.to_dict(),
        "unitarity_residual": program_unitarity_residual(program, enc),
        "block_error": None,
    }
    if config.compare_oracle:
        A_scaled = enc.scaled.T if config.transpose else enc.scaled
        oracle = oracle_generalized_function(A_scaled, f, program.kind)
        data["block_error"] = float(np.max(np.abs(block - oracle)))
    return ReportType.GQSVT, data, None, EXIT_OK


def _records_data(report):
    return [vars(record).copy() for record in report.records]


def run_solve(config):
    source, A, alpha = _load_system(config)
    b = parse_vector(config.vector, A.shape[0])

    if config.mode == SolveMode.CLASSICAL:
        # the scaled system, so tolerances mean the same in every mode
        x, report, _ = classical_bicg(A / alpha, b, config.tol, config.maxit)
        x = x / alpha
    else:
        x, report = quantum_bicg(A, b, alpha, config.tol, config.maxit, config.mode,
                                 config.shots, config.seed, config.workers)

    k, max_degree, rotations, controlled = depth_report(report)
    data = {
        "matrix": source.metadata(),
        "alpha": alpha,
        "mode": report.mode,
        "iterations": k,
        "converged": report.converged,
        "records": _records_data(report),
        "solution": x[:source.original_size],
        "residual": float(np.linalg.norm(A @ x - b)),
        "depth": {"k": k, "max_degree": max_degree, "rotations": rotations, "controlled": controlled},
        "details": report.details,
    }
    status = EXIT_OK if report.converged else EXIT_NOT_CONVERGED
    return ReportType.SOLVE, data, report.records, status


def run_bicg(config):
    source, A, alpha = _load_system(config)
    b = parse_vector(config.vector, A.shape[0])
    x, report, history = classical_bicg(A, b, config.tol, config.maxit)
    data = {
        "matrix": source.metadata(),
        "iterations": report.iterations,
        "converged": report.converged,
        "records": _records_data(report),
        "solution": x[:source.original_size],
        "coefficients": report.coefficients.to_dict(),
        "residuals": [np.linalg.norm(state.r) for state in history],
    }
    status = EXIT_OK if report.converged else EXIT_NOT_CONVERGED
    return ReportType.BICG, data, report.records, status


def run_bound(config):
    source, A, alpha = _load_system(config)
    b = parse_vector(config.vector, A.shape[0])
    ellipse = None if config.ellipse is None else parse_ellipse(config.ellipse)
    lanczos = lanczos_tridiagonalize(A, b)
    bound = bound_from_lanczos(lanczos, None, ellipse, config.ellipse_center)
    data = bound.to_dict()
    data["matrix"] = source.metadata()
    right, left = lanczos_residuals(A, lanczos)
    data["lanczos_residual"] = {"right": right, "left": left}
    data["estimate"] = iteration_estimate(A, b, alpha, config.tol, ellipse, config.ellipse_center)

    # measured errors in the norm the bound controls, when that norm is available
    x_true = np.linalg.solve(A, b)
    _, _, history = classical_bicg(A, b, config.tol, config.maxit)
    try:
        M_r = residual_norm_matrix(A, b)
        data["measured_error"] = [error_norm(x_true - state.x, M_r) for state in history[1:]]
    except InapplicableBoundError as e:
        log_info(f"Measured errors skipped: {e}")
        data["measured_error"] = None
    return ReportType.BOUND, data, None, EXIT_OK


HANDLERS = {
    "phases": run_phases,
    "encode": run_encode,
    "gqsvt": run_gqsvt,
    "solve": run_solve,
    "bicg": run_bicg,
    "bound": run_bound,
}


def _write_report(report, out_dir, stem, records=None):
    """emit_report that logs a ReportIOError and returns None instead of raising."""
    try:
        return emit_report(report, out_dir, stem, records)
    except ReportIOError as e:
        log_error(f"Could not write report: {e}")
        return None


def run_command(config):
    """
    Validate, dispatch and write the report of one configuration.

    Args:
        config (ExperimentConfig): Configuration

    Returns:
        tuple: (exit_status, list of written paths)
    """
    stem = config.stem or config.command
    is_valid, error = validate_config(config)
    if not is_valid:
        log_error(f"Invalid configuration: {error}")
        report = ReportProtocol.create_error_report(error, EXIT_INPUT_ERROR, config.report_config())
        paths = _write_report(report, config.out_dir, stem)
        if paths is None:
            return EXIT_FAILURE, []
        return EXIT_INPUT_ERROR, paths

    log_info(f"Running {config.command}")
    try:
        report_type, data, records, status = HANDLERS[config.command](config)
    except Exception as e:  # mapped to exit statuses below
        status = exit_status_for(e)
        if isinstance(e, GqsvtError):
            log_error(f"{config.command} failed: {e}")
        else:
            log_error(f"{config.command} failed unexpectedly: {type(e).__name__}: {e}")
        extra = {"iteration": getattr(e, "iteration", None), "error_type": type(e).__name__}
        report = ReportProtocol.create_error_report(str(e), status, config.report_config())
        report["data"].update(extra)
        return status, _write_report(report, config.out_dir, stem) or []

    report = ReportProtocol.create_report(report_type, data, config.report_config())
    paths = _write_report(report, config.out_dir, stem, records)
    if paths is None:
        return EXIT_FAILURE, []
    return status, paths


# ==================== BATCH ====================

def run_batch(path, base, workers=1):
    """
    Run a JSON array of configurations, each into its own run_<index> directory.

    Args:
        path (str): Batch file
        base (ExperimentConfig): Defaults for fields an entry leaves out (out_dir is the batch root)
        workers (int): Concurrent runs

    Returns:
        tuple: (worst exit status, list of per-run summaries)
    """
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            entries = json.load(handle)
    except (OSError, ValueError) as e:
        log_error(f"Cannot read batch file {path}: {e}")
        return EXIT_INPUT_ERROR, []
    if not isinstance(entries, list):
        log_error("Batch file must hold a JSON array of configurations")
        return EXIT_INPUT_ERROR, []

    configs = []
    for index, entry in enumerate(entries):
        try:
            if not isinstance(entry, dict):
                raise ValueError("entry is not an object")
            values = {**asdict(base), **entry, "out_dir": os.path.join(base.out_dir, f"run_{index:03d}")}
            configs.append(ExperimentConfig.from_dict(values))
        except (TypeError, ValueError) as e:
            log_error(f"Batch entry {index}: {e}")
            return EXIT_INPUT_ERROR, []

    with ThreadPoolExecutor(max_workers=max(1, int(workers))) as pool:
        outcomes = list(pool.map(run_command, configs))

    runs = [{"index": i, "command": c.command, "exit_status": status, "out_dir": os.path.basename(c.out_dir)}
            for i, (c, (status, _)) in enumerate(zip(configs, outcomes))]
    summary = ReportProtocol.create_report(ReportType.BATCH, {"runs": runs})
    emit_report(summary, base.out_dir, "batch")
    worst = max((status for status, _ in outcomes), default=EXIT_OK)
    return worst, runs


# ==================== ARGUMENTS ====================

def build_parser():
    parser = argparse.ArgumentParser(prog="gqsvt", description="GQSVT simulator and quantum BiCG experiments")
    parser.add_argument("command", nargs="?", choices=COMMANDS)
    parser.add_argument("--matrix", help="file (.csv / .mtx) or generator such as 'spd 8 cond 10 seed 7'")
    parser.add_argument("--b", dest="vector", default="ones", help="ones, e1, 'random seed k' or a file")
    parser.add_argument("--poly", help="polynomial in x, e.g. 'x^3-0.5x'")
    parser.add_argument("--poly-degree", type=int)
    parser.add_argument("--random", action="store_true")
    parser.add_argument("--tol", type=float, default=DEFAULT_TOL)
    parser.add_argument("--maxit", type=int, default=DEFAULT_MAXIT)
    parser.add_argument("--mode", choices=MODES, default=SolveMode.EXACT)
    parser.add_argument("--shots", type=int, default=DEFAULT_SHOTS)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--ancillas", type=int, default=1)
    parser.add_argument("--transpose", action="store_true")
    parser.add_argument("--compare-oracle", action="store_true")
    parser.add_argument("--pad", action="store_true")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--ellipse", help="'d,c,lambda' for bound, e.g. '1.5,0.5,1'")
    parser.add_argument("--ellipse-center", choices=EllipseCenter.ALL, default=EllipseCenter.CENTROID)
    parser.add_argument("--out", dest="out_dir", default=REPORTS_DIR)
    parser.add_argument("--stem")
    parser.add_argument("--batch", help="JSON array of configurations")
    parser.add_argument("--no-color", action="store_true")
    return parser


def _summary(status, paths, color):
    labels = {EXIT_OK: "ok", EXIT_NOT_CONVERGED: "not converged", EXIT_BREAKDOWN: "breakdown",
              EXIT_INPUT_ERROR: "input error", EXIT_FAILURE: "failed"}
    text = f"[{labels.get(status, status)}] {paths[0] if paths else 'no report written'}"
    if not color:
        return text
    tint = Colors.OKGREEN if status == EXIT_OK else (Colors.WARNING if status == EXIT_NOT_CONVERGED else Colors.FAIL)
    return f"{tint}{text}{Colors.ENDC}"


def main(argv=None):
    """
    Parse arguments, run the command (or batch) and return the exit status.
    """
    args = build_parser().parse_args(argv)
    enable_file_logging()
    values = {k: v for k, v in vars(args).items() if k not in ("batch", "no_color")}

    if args.batch:
        base = ExperimentConfig(**{**values, "command": values["command"] or "solve"})
        status, runs = run_batch(args.batch, base, args.workers)
        for run in runs:
            print(_summary(run["exit_status"], [os.path.join(base.out_dir, run["out_dir"])], not args.no_color))
        return status

    if not args.command:
        log_error("A command or --batch is required")
        return EXIT_INPUT_ERROR
    status, paths = run_command(ExperimentConfig(**values))
    print(_summary(status, paths, not args.no_color))
    return status


if __name__ == "__main__":
    sys.exit(main())
