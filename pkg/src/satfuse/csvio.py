"""Small CSV helpers with atomic writes and round-trip float formatting."""

from __future__ import annotations

import csv
import os
import tempfile


def fmt(value):
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_rows(path, header, rows):
    """Write CSV atomically: temp file in the target directory + rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([fmt(v) for v in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_rows(path):
    """Returns (header, rows) with rows as lists of strings."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]
