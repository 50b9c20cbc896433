"""CSV artifacts: fixed headers, 17 significant digits, atomic writes.

Formats (one header row, '.' decimal separator, '\\n' line endings):

* tails:     ``n,value,stderr``   (stderr empty for exact tables)
* memloss:   ``n,tv``
* mixing:    ``n,mass``
* coupling:  ``n,p_dp,p_mc,stderr,ratio``
* frequency: ``n,value``
* density:   ``x,value``
"""

from __future__ import annotations

import os
import tempfile

import numpy as np

from .errors import FormatError
from .partitions import TailTable

_FMT = "%.17g"

HEADERS = {
    "tails": ["n", "value", "stderr"],
    "memloss": ["n", "tv"],
    "mixing": ["n", "mass"],
    "coupling": ["n", "p_dp", "p_mc", "stderr", "ratio"],
    "frequency": ["n", "value"],
    "density": ["x", "value"],
}


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v: float) -> str:
    return _FMT % v


def write_columns(path: str, kind: str, columns: list[np.ndarray | None]) -> None:
    header = HEADERS[kind]
    if len(columns) != len(header):
        raise ValueError(f"{kind} needs {len(header)} columns")
    n_rows = len(next(c for c in columns if c is not None))
    lines = [",".join(header)]
    for i in range(n_rows):
        cells = ["" if col is None else _fmt(float(col[i])) for col in columns]
        lines.append(",".join(cells))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_tail_csv(path: str, table: TailTable) -> None:
    n = np.arange(len(table.values), dtype=float)
    write_columns(path, "tails", [n, table.values, table.stderr])


def read_csv(path: str) -> tuple[str, dict[str, np.ndarray]]:
    """Read a CSV produced by this package; returns (kind, columns).

    Raises FormatError for empty files or headers this package never
    writes."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh]
    except OSError as e:
        raise FormatError(f"{path}: {e}") from None
    lines = [ln for ln in lines if ln != ""]
    if not lines:
        raise FormatError(f"{path}: empty file")
    header = lines[0].split(",")
    kind = next((k for k, h in HEADERS.items() if h == header), None)
    if kind is None:
        raise FormatError(f"{path}: unrecognized header {lines[0]!r}")
    cols: dict[str, list[float]] = {name: [] for name in header}
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != len(header):
            raise FormatError(f"{path}: ragged row {ln!r}")
        for name, cell in zip(header, cells):
            cols[name].append(np.nan if cell == "" else float(cell))
    if not lines[1:]:
        raise FormatError(f"{path}: no data rows")
    return kind, {name: np.asarray(vals) for name, vals in cols.items()}
