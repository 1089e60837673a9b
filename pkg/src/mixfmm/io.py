"""File formats: signal matrices, labels, traces, metric and template tables.

Floats are written with ``repr``, the shortest representation that
parses back to the identical double, so every write/read round trip is
exact and repeated runs with the same inputs produce byte-identical
files.
"""

from __future__ import annotations

import numpy as np

from .selection import SelectionTrace


def _fmt(value) -> str:
    return repr(float(value))


def write_signals(path, X, labels=None) -> None:
    """Write one curve per row; optional trailing integer label column."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if labels is not None and len(labels) != X.shape[0]:
        raise ValueError("labels length must match the number of rows")
    with open(path, "w") as fh:
        for i, row in enumerate(X):
            cells = [_fmt(v) for v in row]
            if labels is not None:
                cells.append(str(int(labels[i])))
            fh.write(",".join(cells) + "\n")


def read_signals(path, labeled: bool = False):
    """Read a signal matrix; returns (X, labels) with labels None if unlabeled."""
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    if data.size == 0:
        raise ValueError(f"{path}: no data")
    if labeled:
        if data.shape[1] < 2:
            raise ValueError(f"{path}: labeled file needs at least 2 columns")
        return data[:, :-1], data[:, -1].astype(int)
    return data, None


def write_trace_samples(path, samples) -> None:
    with open(path, "w") as fh:
        for v in np.asarray(samples, dtype=float):
            fh.write(_fmt(v) + "\n")


def read_trace_samples(path) -> np.ndarray:
    return np.loadtxt(path, ndmin=1)


def write_labels(path, labels) -> None:
    with open(path, "w") as fh:
        for v in labels:
            fh.write(f"{int(v)}\n")


def read_labels(path) -> np.ndarray:
    return np.loadtxt(path, dtype=int, ndmin=1)


def write_peaks(path, peaks) -> None:
    write_labels(path, peaks)


def read_peaks(path) -> np.ndarray:
    return read_labels(path)


def write_metrics_table(path, metrics: dict) -> None:
    """Two-column table: metric name, value."""
    with open(path, "w") as fh:
        fh.write("metric,value\n")
        for name, value in metrics.items():
            fh.write(f"{name},{_fmt(value)}\n")


def write_selection_trace(path, trace: SelectionTrace) -> None:
    """Table behind the likelihood-versus-K plot.

    Columns: k, log_likelihood, gain, gain_ratio, chosen. The gain is
    empty for K = 1 and the ratio is empty where undefined.
    """
    with open(path, "w") as fh:
        fh.write("k,log_likelihood,gain,gain_ratio,chosen\n")
        for i, k in enumerate(trace.k_values):
            gain = _fmt(trace.gains[i - 1]) if i >= 1 else ""
            ratio = _fmt(trace.gain_ratios[i - 1]) \
                if 1 <= i <= len(trace.gain_ratios) else ""
            chosen = 1 if k == trace.chosen_k else 0
            fh.write(f"{k},{_fmt(trace.log_likelihoods[i])},{gain},{ratio},{chosen}\n")


def write_templates(path, grid, curves) -> None:
    """Long-form table of per-cluster template curves: cluster, t, value."""
    t = grid.points if hasattr(grid, "points") else np.asarray(grid, dtype=float)
    curves = np.atleast_2d(np.asarray(curves, dtype=float))
    with open(path, "w") as fh:
        fh.write("cluster,t,value\n")
        for c, curve in enumerate(curves):
            for tj, vj in zip(t, curve):
                fh.write(f"{c},{_fmt(tj)},{_fmt(vj)}\n")
