"""SVG convergence plots from trace CSVs (log-scale y)."""
from __future__ import annotations

import os
import re
from collections import OrderedDict
from typing import Dict, List, Sequence

import numpy as np

from sega.trace import read_csv

__all__ = ["X_AXES", "PlotError", "emit_plot", "group_traces"]

X_AXES = {"iter": "k", "oracle": "oracle_calls", "cost": "cost_units"}
Y_FLOOR = 1e-300


class PlotError(ValueError):
    pass


def _label(path: str, trace) -> str:
    if "method" in trace.metadata:
        return str(trace.metadata["method"])
    stem = os.path.splitext(os.path.basename(path))[0]
    return re.sub(r"_seed\d+$", "", stem)


def group_traces(paths: Sequence[str]) -> Dict[str, list]:
    """Traces grouped by method label, in first-seen order; schemas must agree."""
    if not paths:
        raise PlotError("no CSV files given")
    groups: Dict[str, list] = OrderedDict()
    columns = None
    for path in paths:
        try:
            tr = read_csv(path)
        except OSError as exc:
            raise PlotError(f"cannot read {path}: {exc.strerror}") from None
        except ValueError as exc:
            raise PlotError(f"{path}: {exc}") from None
        cols = [c for c in tr.columns if c != "wall_ns"]
        if columns is None:
            columns = cols
        elif cols != columns:
            raise PlotError(f"{path}: schema mismatch ({','.join(cols)} vs {','.join(columns)})")
        groups.setdefault(_label(path, tr), []).append(tr)
    return groups


def _band(traces, xcol, ycol):
    m = min(len(t) for t in traces)
    x = traces[0][xcol][:m].astype(float)
    Y = np.vstack([np.abs(t[ycol][:m]) for t in traces])
    Y = np.maximum(Y, Y_FLOOR)
    return x, np.median(Y, axis=0), Y.min(axis=0), Y.max(axis=0)


def emit_plot(paths: Sequence[str], out: str, x: str = "iter", y: str = "f_gap",
              title: str = "") -> List[str]:
    """Write one SVG; one polyline per method, with a min/max band over seeds.

    Returns the method labels in legend order.
    """
    if x not in X_AXES:
        raise PlotError(f"--x must be one of {', '.join(X_AXES)}")
    groups = group_traces(paths)
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "sega"
    first = next(iter(groups.values()))[0]
    if y not in first.columns:
        raise PlotError(f"column {y!r} not in traces")
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, traces in groups.items():
        xs, med, lo, hi = _band(traces, X_AXES[x], y)
        line, = ax.plot(xs, med, label=label, linewidth=1.4)
        if len(traces) > 1:
            ax.fill_between(xs, lo, hi, color=line.get_color(), alpha=0.2, linewidth=0)
    ax.set_yscale("log")
    ax.set_xlabel({"iter": "iteration", "oracle": "oracle calls", "cost": "cost units"}[x])
    ax.set_ylabel(y)
    if title:
        ax.set_title(title)
    ax.legend()
    ax.grid(True, which="major", alpha=0.3)
    fig.tight_layout()
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    fig.savefig(out, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return list(groups)
