"""Plain-text matrix and trajectory files.

Matrix files are CSV preceded by a ``# rows cols`` line. Trajectory files
hold one state vector per row; blank lines and ``#`` comments are skipped.
Floats are written with ``repr`` so a write/read cycle is lossless.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from snapreg.errors import ParseError


def _fmt(x: float) -> str:
    return repr(float(x))


def write_matrix(path: str | Path, M: ArrayLike) -> Path:
    a = np.atleast_2d(np.asarray(M, dtype=float))
    path = Path(path)
    lines = [f"# {a.shape[0]} {a.shape[1]}"]
    lines += [",".join(_fmt(v) for v in row) for row in a]
    path.write_text("\n".join(lines) + "\n")
    return path


def _parse_rows(lines: list[str]) -> list[tuple[int, list[float]]]:
    rows = []
    for lineno, row in enumerate(csv.reader(lines), start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        values = []
        for col, cell in enumerate(row, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric cell {cell.strip()!r}", lineno, col) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite cell {cell.strip()!r}", lineno, col)
            values.append(v)
        if rows and len(values) != len(rows[0][1]):
            raise ParseError(
                f"ragged row: expected {len(rows[0][1])} values, got {len(values)}", lineno
            )
        rows.append((lineno, values))
    return rows


def read_matrix(path: str | Path) -> NDArray[np.float64]:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("#"):
        raise ParseError("missing '# rows cols' header", 1)
    try:
        r, c = (int(t) for t in text[0][1:].split())
    except ValueError:
        raise ParseError("malformed '# rows cols' header", 1) from None
    rows = _parse_rows(text[1:])
    a = np.array([v for _, v in rows], dtype=float).reshape(len(rows), -1) if rows else np.zeros((0, c))
    if a.shape != (r, c):
        raise ParseError(f"header says {r}x{c}, found {a.shape[0]}x{a.shape[1]}")
    return a


def write_trajectory(path: str | Path, states: ArrayLike) -> Path:
    """Write an n x T state matrix as T rows of n values."""
    a = np.asarray(states, dtype=float)
    path = Path(path)
    path.write_text("".join(",".join(_fmt(v) for v in col) + "\n" for col in a.T))
    return path


def read_trajectory(path: str | Path) -> NDArray[np.float64]:
    """Read T rows of n values and return the n x T state matrix."""
    rows = _parse_rows(Path(path).read_text().splitlines())
    if not rows:
        raise ParseError("no data rows")
    return np.array([v for _, v in rows], dtype=float).T.copy()
