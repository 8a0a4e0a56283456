"""
Report Integrity Functions
This file computes SHA-256 digests of emitted report files and writes / checks the
manifest that lists them.
"""

import os

from cryptography.hazmat.primitives import hashes

from shared.errors import ReportIOError
from shared.utils import log_info, log_warning

CHUNK_SIZE = 1 << 16
MANIFEST_SUFFIX = ".sha256"


class Digest:
    """
    SHA-256 digests through cryptography's hash primitives.
    """

    @staticmethod
    def of_bytes(data):
        """
        Digest a byte string.

        Args:
            data (bytes or str): Content (str is UTF-8 encoded)

        Returns:
            str: Lowercase hex digest
        """
        if isinstance(data, str):
            data = data.encode('utf-8')
        hasher = hashes.Hash(hashes.SHA256())
        hasher.update(data)
        return hasher.finalize().hex()

    @staticmethod
    def of_file(path):
        """
        Digest a file in chunks.

        Args:
            path (str): File to read

        Returns:
            str: Lowercase hex digest
        """
        hasher = hashes.Hash(hashes.SHA256())
        try:
            with open(path, 'rb') as handle:
                for chunk in iter(lambda: handle.read(CHUNK_SIZE), b""):
                    hasher.update(chunk)
        except OSError as e:
            raise ReportIOError(f"cannot read {path}: {e}") from e
        return hasher.finalize().hex()


# ==================== MANIFEST ====================

def write_manifest(paths, manifest_path):
    """
    Write 'digest  filename' lines for every file, sorted by filename.

    Args:
        paths (list): Files to list (same directory as the manifest)
        manifest_path (str): Destination, conventionally <stem>.sha256

    Returns:
        dict: filename -> digest
    """
    entries = {os.path.basename(p): Digest.of_file(p) for p in paths}
    lines = [f"{digest}  {name}\n" for name, digest in sorted(entries.items())]
    try:
        with open(manifest_path, 'w', encoding='utf-8', newline='\n') as handle:
            handle.writelines(lines)
    except OSError as e:
        raise ReportIOError(f"cannot write {manifest_path}: {e}") from e
    log_info(f"Manifest written to {manifest_path} ({len(entries)} files)")
    return entries


def read_manifest(manifest_path):
    """
    Parse a manifest.

    Args:
        manifest_path (str): Manifest file

    Returns:
        dict: filename -> digest
    """
    entries = {}
    try:
        with open(manifest_path, 'r', encoding='utf-8') as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                digest, _, name = line.partition("  ")
                if not name:
                    raise ReportIOError(f"malformed manifest line: {line!r}")
                entries[name] = digest
    except OSError as e:
        raise ReportIOError(f"cannot read {manifest_path}: {e}") from e
    return entries


def verify_manifest(manifest_path):
    """
    Recompute every digest listed in a manifest.

    Args:
        manifest_path (str): Manifest file

    Returns:
        tuple: (is_valid, error_message)
    """
    directory = os.path.dirname(os.path.abspath(manifest_path))
    for name, expected in read_manifest(manifest_path).items():
        path = os.path.join(directory, name)
        if not os.path.exists(path):
            log_warning(f"Manifest entry {name} is missing")
            return False, f"{name} is missing"
        if Digest.of_file(path) != expected:
            log_warning(f"Digest mismatch for {name}")
            return False, f"{name} does not match its digest"
    return True, ""


if __name__ == "__main__":
    print("Testing digests...")
    print(f"sha256('abc') = {Digest.of_bytes('abc')}")
