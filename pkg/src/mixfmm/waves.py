"""FMM waves: evaluation, time grids, and model canonicalization.

An FMM wave is a single-oscillation waveform with four parameters:
amplitude, phase location (alpha), skew (beta) and width (omega).
A full model is an intercept plus a sum of such waves, kept in a
canonical order so that parameter vectors are identifiable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import GridError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TimeGrid:
    """Shared sampling grid on the circle.

    Parameters
    ----------
    points : ndarray, shape (p,)
        Strictly increasing time values in [0, 2*pi).
    original_span : tuple of float
        (t0, T) of the raw domain before rescaling; (0, 2*pi) if the
        input needed no rescaling.
    """

    points: np.ndarray
    original_span: tuple[float, float] = (0.0, TWO_PI)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise GridError("time grid needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise GridError("time grid contains non-finite values")
        if np.any(np.diff(pts) <= 0):
            raise GridError("time grid must be strictly increasing")
        if pts[0] < 0.0 or pts[-1] >= TWO_PI:
            raise GridError("time grid values must lie in [0, 2*pi)")
        object.__setattr__(self, "points", pts)

    @property
    def p(self) -> int:
        return self.points.size


@dataclass(frozen=True)
class Signal:
    """One observed curve on a shared grid."""

    values: np.ndarray
    id: str = ""

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1:
            raise ValueError("signal values must be one-dimensional")
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"signal {self.id!r} contains non-finite values")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class FMMWave:
    """Parameters of one FMM wave.

    amplitude > 0; alpha and beta are angles (wrapped into [0, 2*pi));
    omega in [0, 1] controls width, with omega = 1 giving a pure sinusoid.
    """

    amplitude: float
    alpha: float
    beta: float
    omega: float

    def __post_init__(self):
        if not (self.amplitude > 0 and np.isfinite(self.amplitude)):
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if not (0.0 <= self.omega <= 1.0):
            raise ValueError(f"omega must lie in [0, 1], got {self.omega}")
        object.__setattr__(self, "alpha", float(np.mod(self.alpha, TWO_PI)))
        object.__setattr__(self, "beta", float(np.mod(self.beta, TWO_PI)))


@dataclass(frozen=True)
class FMMModel:
    """Intercept plus a sum of FMM waves."""

    intercept: float
    waves: tuple[FMMWave, ...] = field(default_factory=tuple)

    def __post_init__(self):
        waves = tuple(self.waves)
        if len(waves) < 1:
            raise ValueError("model needs at least one wave")
        object.__setattr__(self, "waves", waves)

    @property
    def m(self) -> int:
        return len(self.waves)


def rescale_time(raw_times) -> TimeGrid:
    """Map raw sample times onto [0, 2*pi).

    Input already inside [0, 2*pi) is returned unchanged with span
    (0, 2*pi). Otherwise t' = (t - t0) * 2*pi / T with T = t_last - t0
    plus one sample step, so the rescaled points stay strictly below
    2*pi (the grid is treated as one period of a circular domain).

    Parameters
    ----------
    raw_times : array_like, shape (p,)
        Strictly increasing times, p >= 2.

    Returns
    -------
    TimeGrid
    """
    raw = np.asarray(raw_times, dtype=float)
    if raw.ndim != 1 or raw.size < 2:
        raise GridError("need at least 2 time points")
    if not np.all(np.isfinite(raw)):
        raise GridError("raw times contain non-finite values")
    if np.any(np.diff(raw) <= 0):
        raise GridError("raw times must be strictly increasing")
    if raw[0] >= 0.0 and raw[-1] < TWO_PI:
        return TimeGrid(points=raw.copy(), original_span=(0.0, TWO_PI))
    t0 = raw[0]
    # mean step; equals the sampling interval on uniform grids
    step = (raw[-1] - t0) / (raw.size - 1)
    span = raw[-1] - t0 + step
    points = (raw - t0) * TWO_PI / span
    return TimeGrid(points=points, original_span=(float(t0), float(span)))


def eval_wave(wave: FMMWave, t):
    """Evaluate one FMM wave at time(s) t.

    Uses the two-argument arctangent form of the Moebius phase,
    2*atan2(omega*sin(u), cos(u)) with u = (t - alpha)/2, which is
    continuous across t - alpha = pi where the tan form is singular.
    """
    t = np.asarray(t, dtype=float)
    u = 0.5 * (t - wave.alpha)
    phase = 2.0 * np.arctan2(wave.omega * np.sin(u), np.cos(u))
    return wave.amplitude * np.cos(wave.beta + phase)


def eval_model(model: FMMModel, grid):
    """Evaluate the model mean curve on a grid.

    Parameters
    ----------
    model : FMMModel
    grid : TimeGrid or array_like
        Evaluation times in [0, 2*pi).

    Returns
    -------
    ndarray, shape (p,)
    """
    t = grid.points if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    out = np.full(t.shape, model.intercept, dtype=float)
    for wave in model.waves:
        out += eval_wave(wave, t)
    return out


def canonicalize(model: FMMModel) -> FMMModel:
    """Reorder waves into the identifiable canonical form.

    The maximum-amplitude wave comes first (ties broken by smaller
    alpha, then smaller beta) and the remaining waves follow in
    increasing cyclic alpha order starting from the first wave's alpha.
    The predicted curve is unchanged.
    """
    waves = model.waves
    if len(waves) == 1:
        return model
    lead = min(range(len(waves)),
               key=lambda i: (-waves[i].amplitude, waves[i].alpha, waves[i].beta))
    first = waves[lead]
    rest = [w for i, w in enumerate(waves) if i != lead]
    rest.sort(key=lambda w: (np.mod(w.alpha - first.alpha, TWO_PI), w.beta, w.amplitude))
    return FMMModel(intercept=model.intercept, waves=(first, *rest))


def as_matrix(signals) -> np.ndarray:
    """Stack signals into an (n, p) float matrix.

    Accepts an ndarray, a sequence of Signal objects, or a sequence of
    value arrays.
    """
    if isinstance(signals, np.ndarray):
        out = np.atleast_2d(np.asarray(signals, dtype=float))
    else:
        rows = [s.values if isinstance(s, Signal) else np.asarray(s, dtype=float)
                for s in signals]
        out = np.vstack(rows)
    if not np.all(np.isfinite(out)):
        raise ValueError("signals contain non-finite values")
    return out
