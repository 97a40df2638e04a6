"""Read and write graphs as edge lists, and cluster labels as membership files."""

import re
from pathlib import Path

import numpy as np

from dispectral.errors import ValidationError
from dispectral.graph import SparseMatrix


HEADER_PREFIX = "# dispectral-edgelist v1"
HEADER_PATTERN = re.compile(r"^# dispectral-edgelist v1 n=(\d+)\s*$")


def format_float(value):
    """Format a float with 17 significant digits."""
    return f"{float(value):.17g}"


def write_edgelist(file_path, matrix):
    """
    Store a square real matrix as `src<TAB>dst<TAB>weight` lines.

    Indices are 0-based; the header records n.
    """
    if not matrix.is_square:
        raise ValidationError("Edge lists describe square adjacency matrices only.")
    if np.iscomplexobj(matrix.csr.data):
        raise ValidationError("Edge lists hold real weights only.")
    lines = [f"{HEADER_PREFIX} n={matrix.n_rows}"]
    lines.extend(
        f"{row}\t{col}\t{format_float(value)}" for row, col, value in matrix.entries()
    )
    Path(file_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_lines(file_path):
    """Decoded lines of a UTF-8 text file; decode errors name the line."""
    lines = []
    for line_number, raw in enumerate(Path(file_path).read_bytes().splitlines(), start=1):
        try:
            lines.append(raw.decode("utf-8"))
        except UnicodeDecodeError as e:
            raise ValidationError(
                f"{file_path}:{line_number}: not valid UTF-8 ({e.reason} at byte {e.start})."
            ) from e
    return lines


def read_edgelist(file_path, allow_duplicates=True):
    """
    Load a matrix written by write_edgelist.

    Lines repeating an earlier (src, dst) pair add their weight to it, as
    multi-edges do in the adjacency matrix. With allow_duplicates=False a
    repeated pair raises ValidationError instead.
    """
    lines = _read_lines(file_path)
    if not lines:
        raise ValidationError(f"{file_path}: empty edge list file.")
    match = HEADER_PATTERN.match(lines[0])
    if not match:
        raise ValidationError(f"{file_path}: missing '{HEADER_PREFIX} n=<n>' header.")
    n = int(match.group(1))

    rows, cols, values = [], [], []
    seen = {}
    for line_number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ValidationError(f"{file_path}:{line_number}: expected 3 tab-separated fields.")
        try:
            row, col, value = int(fields[0]), int(fields[1]), float(fields[2])
        except ValueError as e:
            raise ValidationError(f"{file_path}:{line_number}: {e}") from e
        first = seen.setdefault((row, col), line_number)
        if first != line_number and not allow_duplicates:
            raise ValidationError(
                f"{file_path}:{line_number}: edge {row} -> {col} already listed on line {first}."
            )
        rows.append(row)
        cols.append(col)
        values.append(value)

    return SparseMatrix.from_entries(rows, cols, np.asarray(values, dtype=float), (n, n))


def write_memberships(file_path, labels):
    """One integer label per line."""
    Path(file_path).write_text(
        "".join(f"{int(label)}\n" for label in labels), encoding="utf-8"
    )


def read_memberships(file_path):
    """Load labels written by write_memberships."""
    labels = []
    for line_number, line in enumerate(_read_lines(file_path), start=1):
        try:
            labels.extend(int(token) for token in line.split())
        except ValueError as e:
            raise ValidationError(f"{file_path}:{line_number}: {e}") from e
    return np.asarray(labels, dtype=np.int64)
