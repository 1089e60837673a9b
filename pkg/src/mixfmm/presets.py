"""Built-in class templates for synthetic benchmark spike sets.

Three spike-like three-wave templates that share the same peak height
(scaled to exactly 1) and peak position (the standard alignment sample)
but differ in width, trough depth and after-potential, i.e. in shape
rather than amplitude. They feed the `simulate` command and the
verification suites.
"""

from __future__ import annotations

import numpy as np

from .pipeline import DEFAULT_ALIGN_AT, DEFAULT_WINDOW, GeneratorSpec
from .waves import FMMModel, FMMWave, eval_model, rescale_time


def _normalized(waves, n_points=DEFAULT_WINDOW, peak_index=DEFAULT_ALIGN_AT - 1):
    """Scale to unit peak and circular-shift the peak onto peak_index."""
    grid = rescale_time(np.arange(n_points))
    model = FMMModel(intercept=0.0, waves=tuple(waves))
    curve = eval_model(model, grid)
    shift = grid.points[peak_index] - grid.points[int(np.argmax(curve))]
    scale = 1.0 / float(np.max(curve))
    shifted = tuple(
        FMMWave(amplitude=w.amplitude * scale, alpha=w.alpha + shift,
                beta=w.beta, omega=w.omega)
        for w in waves)
    return FMMModel(intercept=0.0, waves=shifted)


def _norm_calibrated(waves, target_norm, n_points=DEFAULT_WINDOW):
    """Rescale the non-dominant waves so the unit-peak curve hits target_norm.

    Equal template norms keep per-spike gain variation parallel to the
    class boundaries instead of across them.
    """
    grid = rescale_time(np.arange(n_points))

    def build(s):
        scaled = [waves[0]] + [
            FMMWave(amplitude=w.amplitude * s, alpha=w.alpha, beta=w.beta,
                    omega=w.omega) for w in waves[1:]]
        return _normalized(scaled, n_points)

    lo, hi = 0.2, 4.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        norm = float(np.linalg.norm(eval_model(build(mid), grid)))
        if norm < target_norm:
            lo = mid
        else:
            hi = mid
    return build(0.5 * (lo + hi))


def three_class_templates(n_points: int = DEFAULT_WINDOW) -> list[FMMModel]:
    """Three equal-peak spike templates differing in shape, not amplitude.

    The first class has a clearly narrower peak; the other two share the
    peak and differ only in the repolarization trough, which makes them
    hard to tell apart from a few principal components.
    """
    t_peak = 2.0 * np.pi * (DEFAULT_ALIGN_AT - 1) / n_points
    narrow = [
        FMMWave(amplitude=1.00, alpha=t_peak, beta=0.0, omega=0.10),
        FMMWave(amplitude=0.55, alpha=t_peak + 0.55, beta=np.pi, omega=0.14),
        FMMWave(amplitude=0.18, alpha=t_peak + 2.20, beta=np.pi, omega=0.50),
    ]
    wide_sharp_trough = [
        FMMWave(amplitude=1.00, alpha=t_peak, beta=0.0, omega=0.15),
        FMMWave(amplitude=0.50, alpha=t_peak + 0.70, beta=np.pi, omega=0.20),
        FMMWave(amplitude=0.14, alpha=t_peak + 2.50, beta=np.pi, omega=0.55),
    ]
    wide_broad_trough = [
        FMMWave(amplitude=1.00, alpha=t_peak, beta=0.0, omega=0.15),
        FMMWave(amplitude=0.46, alpha=t_peak + 0.78, beta=np.pi, omega=0.32),
        FMMWave(amplitude=0.12, alpha=t_peak + 2.70, beta=np.pi, omega=0.55),
    ]
    return [_norm_calibrated(w, target_norm=4.2, n_points=n_points)
            for w in (narrow, wide_sharp_trough, wide_broad_trough)]


def benchmark_spec(n_per_class=(100, 100, 100), noise_sigma: float | None = None,
                   jitter: float = 0.03, amplitude_scatter: float = 0.2,
                   seed: int = 0, n_points: int = DEFAULT_WINDOW) -> GeneratorSpec:
    """Generator recipe used by the synthetic benchmark.

    When noise_sigma is None it is set to 20% of the root-mean-square
    of the class templates.
    """
    templates = three_class_templates(n_points)
    if noise_sigma is None:
        grid = rescale_time(np.arange(n_points))
        rms = np.sqrt(np.mean([eval_model(t, grid) ** 2 for t in templates]))
        noise_sigma = 0.2 * float(rms)
    return GeneratorSpec(templates=templates, counts=list(n_per_class),
                         noise_sigma=noise_sigma, jitter=jitter,
                         amplitude_scatter=amplitude_scatter, seed=seed,
                         n_points=n_points)
