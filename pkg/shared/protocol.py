"""
Report Protocol Definition
This file defines the structure and format of every JSON report written by the command line.
"""

import json
import math

import numpy as np

from shared.utils import SCHEMA_VERSION, log_error


# ==================== REPORT TYPES ====================

class ReportType:
    """Defines all report types in the protocol."""

    PHASES = "phases"          # GQSP angles of a unit-circle polynomial
    ENCODING = "encoding"      # Block-encoding and qubitization checks
    GQSVT = "gqsvt"            # Program block compared with the oracle
    SOLVE = "solve"            # BiCG run in any inner-product mode
    BICG = "bicg"              # Classical BiCG reference with coefficient tables
    BOUND = "bound"            # Lanczos convergence bound
    BATCH = "batch"            # Summary of a batch of configurations
    ERROR = "error"            # Failed run

    ALL = (PHASES, ENCODING, GQSVT, SOLVE, BICG, BOUND, BATCH, ERROR)


# Keys each report type must carry inside "data"
REQUIRED_DATA_KEYS = {
    ReportType.PHASES: ("theta", "phi", "lambda", "reconstruction_error"),
    ReportType.ENCODING: ("alpha", "ancillas", "encoding_residual", "walk_residual"),
    ReportType.GQSVT: ("labels", "rotations", "controlled", "block_error"),
    ReportType.SOLVE: ("iterations", "converged", "records", "solution", "depth"),
    ReportType.BICG: ("iterations", "converged", "records", "solution", "coefficients"),
    ReportType.BOUND: ("kappa", "ratio", "curve"),
    ReportType.BATCH: ("runs",),
    ReportType.ERROR: ("error", "exit_status"),
}


def to_jsonable(value):
    """
    Convert numpy values and complex numbers into plain JSON types.

    Complex numbers become [re, im]; arrays become nested lists; non-finite floats
    become the strings "nan", "inf" and "-inf".

    Args:
        value: Any nesting of dicts, lists, tuples, numpy arrays and scalars

    Returns:
        Plain Python structure accepted by json.dumps
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [to_jsonable(float(value.real)), to_jsonable(float(value.imag))]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


# ==================== PROTOCOL CLASS ====================

class ReportProtocol:
    """
    Handles report formatting and parsing.
    All reports are JSON with sorted keys and no timestamps, so reruns are byte-identical.
    """

    @staticmethod
    def create_report(report_type, data, config=None):
        """
        Create a report dictionary according to protocol.

        Args:
            report_type (str): Type of report (from ReportType)
            data (dict): Results
            config (dict): Configuration that produced the results

        Returns:
            dict: Report dictionary
        """
        report = {
            "schema_version": SCHEMA_VERSION,
            "type": report_type,
            "data": to_jsonable(data or {}),
        }

        if config:
            report["config"] = to_jsonable(config)

        return report

    @staticmethod
    def create_error_report(error_text, exit_status, config=None):
        """
        Create error report.

        Args:
            error_text (str): Error description
            exit_status (int): Process exit status of the failed run
            config (dict): Configuration of the failed run

        Returns:
            dict: Error report
        """
        return ReportProtocol.create_report(
            ReportType.ERROR,
            {"error": error_text, "exit_status": exit_status},
            config
        )

    @staticmethod
    def serialize(report_dict):
        """
        Convert a report dictionary to its canonical JSON text.

        Floats use the shortest round-trip representation.

        Args:
            report_dict (dict): Report dictionary

        Returns:
            str: JSON string ending in a newline
        """
        try:
            return json.dumps(to_jsonable(report_dict), sort_keys=True, indent=2, allow_nan=False) + "\n"
        except (TypeError, ValueError) as e:
            log_error(f"Error serializing report: {e}")
            return None

    @staticmethod
    def deserialize(json_string):
        """
        Convert JSON text to a report dictionary.

        Args:
            json_string (str): JSON string

        Returns:
            dict: Report dictionary, None if the text is not JSON
        """
        try:
            return json.loads(json_string)
        except (TypeError, ValueError) as e:
            log_error(f"Error deserializing report: {e}")
            return None

    @staticmethod
    def validate_report(report_dict):
        """
        Validate if a report has the required fields.

        Args:
            report_dict (dict): Report to validate

        Returns:
            tuple: (is_valid, error_message)
        """
        if not isinstance(report_dict, dict):
            return False, "Report must be a dictionary"

        if report_dict.get("schema_version") != SCHEMA_VERSION:
            return False, f"Report must have schema_version {SCHEMA_VERSION!r}"

        if report_dict.get("type") not in ReportType.ALL:
            return False, f"Unknown report type {report_dict.get('type')!r}"

        data = report_dict.get("data")
        if not isinstance(data, dict):
            return False, "Report must have a 'data' object"

        for key in REQUIRED_DATA_KEYS[report_dict["type"]]:
            if key not in data:
                return False, f"{report_dict['type']} report must have a '{key}' field"

        return True, ""


# ==================== EXAMPLE USAGE ====================

if __name__ == "__main__":
    # Test report creation
    print("Testing ReportProtocol...")

    report = ReportProtocol.create_report(
        ReportType.BOUND,
        {"kappa": np.float64(1.5), "ratio": 0.17, "curve": np.array([0.5, 0.08]), "lambda": 1 + 0j},
        {"matrix": "spd 4 cond 2 seed 0"}
    )
    text = ReportProtocol.serialize(report)
    print(f"\nSerialized:\n{text}")

    is_valid, error = ReportProtocol.validate_report(ReportProtocol.deserialize(text))
    print(f"Validation: {is_valid}, Error: {error}")
