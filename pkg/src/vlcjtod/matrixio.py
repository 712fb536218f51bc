"""Plain-text matrix files: a ``rows cols`` header followed by the rows.

Lines starting with ``#`` are comments and may carry run metadata.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

__all__ = ["read_matrix", "write_matrix", "atomic_write_text"]


def read_matrix(path) -> np.ndarray:
    lines = [
        (i + 1, ln.strip())
        for i, ln in enumerate(Path(path).read_text().splitlines())
        if ln.strip() and not ln.lstrip().startswith("#")
    ]
    if not lines:
        raise ValueError(f"{path}: empty matrix file")
    lineno, header = lines[0]
    try:
        rows, cols = (int(tok) for tok in header.split())
    except ValueError:
        raise ValueError(f"{path}:{lineno}: expected 'rows cols' header, got {header!r}") from None
    body = lines[1:]
    if len(body) != rows:
        raise ValueError(f"{path}: header declares {rows} rows, found {len(body)}")
    out = np.empty((rows, cols))
    for r, (lineno, text) in enumerate(body):
        try:
            vals = [float(tok) for tok in text.split()]
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric entry") from None
        if len(vals) != cols:
            raise ValueError(f"{path}:{lineno}: expected {cols} values, got {len(vals)}")
        out[r] = vals
    return out


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_matrix(path, a, comments=()) -> None:
    """Write ``a`` (1-D arrays become a column) with full float precision."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    lines = [f"# {c}" for c in comments]
    lines.append(f"{a.shape[0]} {a.shape[1]}")
    lines.extend(" ".join(repr(float(v)) for v in row) for row in a)
    atomic_write_text(path, "\n".join(lines) + "\n")
