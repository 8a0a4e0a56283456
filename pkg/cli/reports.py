"""
Report Emission
Writes the JSON report, the CSV convergence trace and the SHA-256 manifest of one run.
"""

import csv
import io
import os

from shared.errors import ReportIOError
from shared.integrity import MANIFEST_SUFFIX, write_manifest
from shared.protocol import ReportProtocol
from shared.utils import TRACE_COLUMNS, log_info


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def trace_rows(records):
    """
    Rows of the convergence trace, one per iteration.

    Args:
        records (list): IterationRecord objects

    Returns:
        list: Lists of strings in TRACE_COLUMNS order
    """
    rows = []
    for record in records:
        rows.append([_cell(record.j), _cell(float(record.alpha)),
                     _cell(None if record.beta is None else float(record.beta)),
                     _cell(float(record.rnorm_est)),
                     _cell(None if record.rnorm_true is None else float(record.rnorm_true)),
                     _cell(record.degree), _cell(record.depth)])
    return rows


def render_trace(records):
    """CSV text of a trace: header row, '.' decimals, '\\n' line ends."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(TRACE_COLUMNS)
    writer.writerows(trace_rows(records))
    return buffer.getvalue()


def _write_text(path, text):
    try:
        with open(path, 'w', encoding='utf-8', newline='') as handle:
            handle.write(text)
    except OSError as e:
        raise ReportIOError(f"cannot write {path}: {e}") from e


def emit_report(report, out_dir, stem, records=None):
    """
    Write <stem>.json, <stem>_trace.csv (when records are given) and <stem>.sha256.

    Args:
        report (dict): Report built by ReportProtocol.create_report
        out_dir (str): Output directory, created when missing
        stem (str): Base filename
        records (list): IterationRecord objects for the trace

    Returns:
        list: Paths written, manifest last
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise ReportIOError(f"cannot create {out_dir}: {e}") from e

    text = ReportProtocol.serialize(report)
    if text is None:
        raise ReportIOError("report could not be serialized")

    paths = [os.path.join(out_dir, f"{stem}.json")]
    _write_text(paths[0], text)
    if records is not None:
        paths.append(os.path.join(out_dir, f"{stem}_trace.csv"))
        _write_text(paths[-1], render_trace(records))

    manifest = os.path.join(out_dir, f"{stem}{MANIFEST_SUFFIX}")
    write_manifest(paths, manifest)
    paths.append(manifest)
    log_info(f"Report written to {paths[0]}")
    return paths
