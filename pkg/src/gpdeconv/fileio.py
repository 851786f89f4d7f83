"""File formats: columnar CSV (header mandatory, '#' comments), numeric
matrix CSV, binary 8-bit PGM (P5), and stable-key-order JSON.

All writers are deterministic: identical inputs produce byte-identical
files (floats via repr's shortest round-trip form, sorted JSON keys, no
timestamps).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataFormatError


def _format_value(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, columns):
    """Write named columns: ``columns`` is a list of (name, array) pairs."""
    names = [name for name, _ in columns]
    arrays = [np.asarray(values) for _, values in columns]
    lengths = {arr.shape[0] for arr in arrays}
    if len(lengths) > 1:
        raise DataFormatError(f"column lengths differ: {sorted(lengths)}")
    lines = [",".join(names)]
    for row in range(arrays[0].shape[0] if arrays else 0):
        lines.append(",".join(_format_value(arr[row]) for arr in arrays))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv(path):
    """Read a columnar CSV into {name: float array}.

    The first non-comment line is the mandatory header; '#' lines are
    skipped anywhere.  Malformed rows raise with their 1-based line number.
    """
    header = None
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [part.strip() for part in line.split(",")]
            if header is None:
                header = parts
                continue
            if len(parts) != len(header):
                raise DataFormatError(
                    f"{path}: line {lineno} has {len(parts)} fields, "
                    f"expected {len(header)}", line=lineno)
            try:
                rows.append([float(part) for part in parts])
            except ValueError as exc:
                raise DataFormatError(f"{path}: line {lineno}: {exc}",
                                      line=lineno) from None
    if header is None:
        raise DataFormatError(f"{path}: missing header row")
    data = np.asarray(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def write_matrix_csv(path, matrix):
    """Write a 2D numeric array as plain comma-separated rows (no header)."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise DataFormatError("matrix CSV expects a 2D array")
    lines = [",".join(repr(float(v)) for v in row) for row in matrix]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_matrix_csv(path):
    """Read a rectangular numeric matrix; a header row, if present, is skipped."""
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [part.strip() for part in line.split(",")]
            try:
                row = [float(part) for part in parts]
            except ValueError:
                if not rows and width is None:
                    continue  # header row
                raise DataFormatError(f"{path}: line {lineno} is not numeric",
                                      line=lineno) from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataFormatError(
                    f"{path}: line {lineno} has {len(row)} fields, expected {width}",
                    line=lineno)
            rows.append(row)
    if not rows:
        raise DataFormatError(f"{path}: no numeric rows")
    return np.asarray(rows, dtype=float)


def write_pgm(path, image):
    """Write values in [0, 1] as a binary 8-bit PGM (P5)."""
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise DataFormatError("PGM expects a 2D array")
    levels = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + levels.tobytes())


def read_pgm(path):
    """Read a binary 8-bit PGM (P5) into floats in [0, 1]."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise DataFormatError(f"{path}: not a binary PGM (P5) file")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise DataFormatError(f"{path}: malformed PGM header") from None
    if maxval != 255:
        raise DataFormatError(f"{path}: only 8-bit PGM supported, maxval={maxval}")
    pos += 1  # single whitespace after maxval
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    if pixels.size != width * height:
        raise DataFormatError(f"{path}: truncated pixel data")
    return pixels.reshape(height, width).astype(float) / 255.0


def write_json(path, payload):
    """Stable JSON: sorted keys, two-space indent, trailing newline."""
    text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON: {exc}") from None
