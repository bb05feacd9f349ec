"""Per-iteration records of a solver run and their CSV form."""
from __future__ import annotations

import io
import math
import os
from typing import Dict, Iterable, List, Optional

import numpy as np

__all__ = ["Trace", "read_csv", "SCHEMA_VERSION", "COLUMNS"]

SCHEMA_VERSION = "v1"
COLUMNS = ("k", "oracle_calls", "cost_units", "f_gap", "dist_sq_B", "lyapunov")
INT_COLUMNS = ("k", "oracle_calls")


def _fmt(col, v):
    if col in INT_COLUMNS:
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


class Trace:
    """Rows of ``k, oracle_calls, cost_units, f_gap, dist_sq_B, lyapunov``.

    Unknown quantities are stored as NaN. ``wall_ns`` is added when
    ``timing=True``; it is left out by default so that reruns produce
    identical files.
    """

    def __init__(self, metadata: Optional[Dict[str, object]] = None, timing: bool = False,
                 extra_columns: Iterable[str] = ()):
        self.metadata = dict(metadata or {})
        self.columns = list(COLUMNS) + list(extra_columns) + (["wall_ns"] if timing else [])
        self._rows: List[tuple] = []

    def append(self, **values):
        row = []
        for col in self.columns:
            v = values.get(col, np.nan)
            row.append(v)
        if self._rows:
            prev = self._rows[-1]
            if row[0] < prev[0] or row[1] < prev[1]:
                raise ValueError("k and oracle_calls must be nondecreasing")
        self._rows.append(tuple(row))

    def __len__(self):
        return len(self._rows)

    def __getitem__(self, col: str) -> np.ndarray:
        j = self.columns.index(col)
        dtype = np.int64 if col in INT_COLUMNS or col == "wall_ns" else float
        return np.array([r[j] for r in self._rows], dtype=dtype)

    def last(self, col: str):
        return self._rows[-1][self.columns.index(col)]

    def first_hit(self, col: str, threshold: float, by: str = "k") -> Optional[float]:
        """Value of column ``by`` at the first row where ``col <= threshold``."""
        vals = self[col]
        idx = np.flatnonzero(vals <= threshold)
        return None if idx.size == 0 else self[by][idx[0]]

    # -- CSV ------------------------------------------------------------
    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(f"# sega-trace {SCHEMA_VERSION}\n")
        for key in sorted(self.metadata):
            val = str(self.metadata[key]).replace("\n", " ")
            buf.write(f"# {key}: {val}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self._rows:
            buf.write(",".join(_fmt(c, v) for c, v in zip(self.columns, row)) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(os.fspath(path), "w", newline="") as fh:
                fh.write(text)
        return text

    @staticmethod
    def body(text: str) -> str:
        """CSV text without comment lines."""
        return "".join(line for line in text.splitlines(True) if not line.startswith("#"))


def read_csv(path_or_text) -> Trace:
    """Read a trace written by :meth:`Trace.to_csv`."""
    if isinstance(path_or_text, str) and "\n" in path_or_text:
        text = path_or_text
    else:
        with open(os.fspath(path_or_text)) as fh:
            text = fh.read()
    lines = text.splitlines()
    meta = {}
    header = None
    rows = []
    version = None
    for line in lines:
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("sega-trace"):
                version = body.split()[-1]
            elif ":" in body:
                k, v = body.split(":", 1)
                meta[k.strip()] = v.strip()
            continue
        if not line.strip():
            continue
        if header is None:
            header = line.split(",")
            continue
        rows.append(line.split(","))
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported trace schema {version!r}")
    if header is None or header[:len(COLUMNS)] != list(COLUMNS):
        raise ValueError("trace header does not match the v1 schema")
    extra = [c for c in header[len(COLUMNS):] if c != "wall_ns"]
    tr = Trace(meta, timing="wall_ns" in header, extra_columns=extra)
    tr.columns = header
    for r in rows:
        vals = []
        for c, v in zip(header, r):
            vals.append(int(v) if c in INT_COLUMNS or c == "wall_ns" else float(v))
        tr._rows.append(tuple(vals))
    return tr
