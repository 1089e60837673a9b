"""Least-squares estimation of FMM wave models for a single curve.

The nonlinearity of a wave lives only in (alpha, omega): once those are
fixed, the model is linear in (intercept, delta, gamma) through
cos/sin of the transformed phase. Fitting therefore scans an
(alpha, omega) grid solving a 3-parameter linear subproblem at each
node, then refines the best node with a Nelder-Mead search.
Multi-wave models are fitted by backfitting single waves to residuals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateTargetError, InsufficientDataError
from .waves import TWO_PI, FMMModel, FMMWave, TimeGrid, canonicalize, eval_wave

OMEGA_MIN = 0.005  # refinement clamp; omega -> 0 degenerates into a spike


def _default_omega_grid() -> np.ndarray:
    return np.geomspace(0.01, 1.0, 24)


@dataclass
class FitConfig:
    """Knobs of the grid-plus-refinement fit."""

    alpha_grid_size: int = 48
    omega_grid: np.ndarray = field(default_factory=_default_omega_grid)
    backfit_max_passes: int = 10
    backfit_rel_tol: float = 1e-4
    refine: bool = True

    def __post_init__(self):
        self.omega_grid = np.asarray(self.omega_grid, dtype=float)
        if self.alpha_grid_size < 4:
            raise ValueError("alpha_grid_size must be >= 4")
        if np.any(self.omega_grid <= 0) or np.any(self.omega_grid > 1):
            raise ValueError("omega grid values must lie in (0, 1]")
        if self.backfit_max_passes < 1 or self.backfit_rel_tol <= 0:
            raise ValueError("backfit settings must be positive")


@dataclass
class FitResult:
    """A fitted model plus goodness-of-fit diagnostics."""

    model: FMMModel
    rss: float
    r_squared: float
    passes_used: int
    rss_per_pass: list[float] = field(default_factory=list)


class _GridDesign:
    """Precomputed regressors for every (alpha, omega) grid node.

    The cos/sin regressor rows and the pseudo-inverses of the 3x3 Gram
    matrices depend only on the grid and the config, so they are built
    once and reused for every target sharing them.
    """

    def __init__(self, t: np.ndarray, alphas: np.ndarray, omegas: np.ndarray):
        # alpha-major candidate order fixes the argmin tie-break:
        # lowest alpha index first, then lowest omega index
        aa, ww = np.meshgrid(alphas, omegas, indexing="ij")
        self.alphas = aa.ravel()
        self.omegas = ww.ravel()
        u = 0.5 * (t[None, :] - self.alphas[:, None])
        su, cu = np.sin(u), np.cos(u)
        wsu = self.omegas[:, None] * su
        den = cu * cu + wsu * wsu
        self.cos_rows = (cu * cu - wsu * wsu) / den
        self.sin_rows = 2.0 * wsu * cu / den
        n_cand, p = self.cos_rows.shape
        gram = np.empty((n_cand, 3, 3))
        gram[:, 0, 0] = p
        gram[:, 0, 1] = gram[:, 1, 0] = self.cos_rows.sum(axis=1)
        gram[:, 0, 2] = gram[:, 2, 0] = self.sin_rows.sum(axis=1)
        gram[:, 1, 1] = np.einsum("cp,cp->c", self.cos_rows, self.cos_rows)
        gram[:, 2, 2] = np.einsum("cp,cp->c", self.sin_rows, self.sin_rows)
        gram[:, 1, 2] = gram[:, 2, 1] = np.einsum("cp,cp->c", self.cos_rows, self.sin_rows)
        self.gram_inv = np.linalg.pinv(gram)


_DESIGN_CACHE: dict[tuple, _GridDesign] = {}
_DESIGN_CACHE_MAX = 16


def _design_for(t: np.ndarray, cfg: FitConfig) -> _GridDesign:
    key = (t.tobytes(), cfg.alpha_grid_size, cfg.omega_grid.tobytes())
    design = _DESIGN_CACHE.get(key)
    if design is None:
        alphas = np.linspace(0.0, TWO_PI, cfg.alpha_grid_size, endpoint=False)
        design = _GridDesign(t, alphas, cfg.omega_grid)
        if len(_DESIGN_CACHE) >= _DESIGN_CACHE_MAX:
            _DESIGN_CACHE.pop(next(iter(_DESIGN_CACHE)))
        _DESIGN_CACHE[key] = design
    return design


def _linear_at(y: np.ndarray, t: np.ndarray, y_dot_y: float,
               alpha: float, omega: float):
    """Solve the 3-parameter linear subproblem at one (alpha, omega)."""
    u = 0.5 * (t - alpha)
    su, cu = np.sin(u), np.cos(u)
    wsu = omega * su
    cu2 = cu * cu
    wsu2 = wsu * wsu
    den = cu2 + wsu2
    c = (cu2 - wsu2) / den
    s = 2.0 * wsu * cu / den
    g00 = float(t.size)
    g01 = float(c.sum())
    g02 = float(s.sum())
    g11 = float(c @ c)
    g12 = float(c @ s)
    g22 = float(s @ s)
    b0 = float(y.sum())
    b1 = float(c @ y)
    b2 = float(s @ y)
    # adjugate solve of the symmetric 3x3 normal equations
    a00 = g11 * g22 - g12 * g12
    a01 = g02 * g12 - g01 * g22
    a02 = g01 * g12 - g02 * g11
    det = g00 * a00 + g01 * a01 + g02 * a02
    if abs(det) > 1e-12 * max(g00 * g11 * g22, 1e-300):
        a11 = g00 * g22 - g02 * g02
        a12 = g01 * g02 - g00 * g12
        a22 = g00 * g11 - g01 * g01
        coef = np.array([
            (a00 * b0 + a01 * b1 + a02 * b2) / det,
            (a01 * b0 + a11 * b1 + a12 * b2) / det,
            (a02 * b0 + a12 * b1 + a22 * b2) / det,
        ])
    else:
        gram = np.array([[g00, g01, g02], [g01, g11, g12], [g02, g12, g22]])
        coef = np.linalg.lstsq(gram, np.array([b0, b1, b2]), rcond=None)[0]
    rss = y_dot_y - (coef[0] * b0 + coef[1] * b1 + coef[2] * b2)
    return max(float(rss), 0.0), coef


def _nelder_mead_2d(fn, x0, steps, max_evals=110, xtol=1e-4, ftol_abs=0.0):
    """Minimize fn over two variables; returns the best vertex seen."""
    simplex = [np.asarray(x0, dtype=float)]
    for i in range(2):
        v = simplex[0].copy()
        v[i] += steps[i]
        simplex.append(v)
    fvals = [fn(v) for v in simplex]
    evals = 3
    while evals < max_evals:
        if fvals[1] < fvals[0]:
            simplex[0], simplex[1] = simplex[1], simplex[0]
            fvals[0], fvals[1] = fvals[1], fvals[0]
        if fvals[2] < fvals[1]:
            simplex[1], simplex[2] = simplex[2], simplex[1]
            fvals[1], fvals[2] = fvals[2], fvals[1]
            if fvals[1] < fvals[0]:
                simplex[0], simplex[1] = simplex[1], simplex[0]
                fvals[0], fvals[1] = fvals[1], fvals[0]
        extent = max(abs(simplex[1][0] - simplex[0][0]), abs(simplex[2][0] - simplex[0][0]),
                     abs(simplex[1][1] - simplex[0][1]), abs(simplex[2][1] - simplex[0][1]))
        if extent <= xtol or (fvals[2] - fvals[0]) <= ftol_abs:
            break
        centroid = 0.5 * (simplex[0] + simplex[1])
        xr = centroid + (centroid - simplex[2])
        fr = fn(xr)
        evals += 1
        if fr < fvals[0]:
            xe = centroid + 2.0 * (centroid - simplex[2])
            fe = fn(xe)
            evals += 1
            if fe < fr:
                simplex[2], fvals[2] = xe, fe
            else:
                simplex[2], fvals[2] = xr, fr
        elif fr < fvals[1]:
            simplex[2], fvals[2] = xr, fr
        else:
            if fr < fvals[2]:
                xc = centroid + 0.5 * (xr - centroid)
            else:
                xc = centroid - 0.5 * (centroid - simplex[2])
            fc = fn(xc)
            evals += 1
            if fc < min(fr, fvals[2]):
                simplex[2], fvals[2] = xc, fc
            else:
                for i in (1, 2):
                    simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
                    fvals[i] = fn(simplex[i])
                evals += 2
    i = int(np.argmin(fvals))
    return simplex[i], fvals[i]


def _wave_from_coef(alpha: float, omega: float, coef: np.ndarray):
    """Recover (wave, intercept) from the linear solution at (alpha, omega)."""
    delta, gamma = coef[1], coef[2]
    amplitude = float(np.hypot(delta, gamma))
    if amplitude == 0.0:
        # flat residual: keep a negligible but valid wave
        amplitude, beta = 1e-12, 0.0
    else:
        beta = float(np.mod(np.arctan2(-gamma, delta), TWO_PI))
    wave = FMMWave(amplitude=amplitude, alpha=float(np.mod(alpha, TWO_PI)),
                   beta=beta, omega=float(omega))
    return wave, float(coef[0])


def _exact_rss(y: np.ndarray, t: np.ndarray, wave: FMMWave, intercept: float) -> float:
    resid = y - intercept - eval_wave(wave, t)
    return float(resid @ resid)


def _fit_single_wave(y: np.ndarray, t: np.ndarray, cfg: FitConfig,
                     design: _GridDesign, init: tuple[float, float] | None = None):
    """Best single wave plus intercept for y; never raises on flat input.

    Returns (wave, intercept, rss) with rss computed from the actual
    wave prediction, never above the best grid candidate's. An optional
    (alpha, omega) warm start joins the competition for the refinement
    seed; backfitting passes use the previous wave here.
    """
    y_dot_y = float(y @ y)
    b = np.empty((design.alphas.size, 3))
    b[:, 0] = y.sum()
    b[:, 1] = design.cos_rows @ y
    b[:, 2] = design.sin_rows @ y
    coef = np.einsum("cij,cj->ci", design.gram_inv, b)
    rss = y_dot_y - np.einsum("ci,ci->c", coef, b)
    best = int(np.argmin(rss))
    alpha0, omega0 = design.alphas[best], design.omegas[best]

    wave, intercept = _wave_from_coef(alpha0, omega0, coef[best])
    best_rss = _exact_rss(y, t, wave, intercept)

    warm = False
    if init is not None:
        rss_lin, coef_i = _linear_at(y, t, y_dot_y, init[0], init[1])
        if rss_lin < best_rss:
            wave_i, intercept_i = _wave_from_coef(init[0], init[1], coef_i)
            rss_i = _exact_rss(y, t, wave_i, intercept_i)
            if rss_i < best_rss:
                alpha0, omega0 = init
                wave, intercept, best_rss = wave_i, intercept_i, rss_i
                warm = True

    if cfg.refine:
        def objective(x):
            om = min(max(x[1], OMEGA_MIN), 1.0)
            return _linear_at(y, t, y_dot_y, x[0], om)[0]

        if warm:
            # previous pass left us near the optimum; contract from close by
            alpha_step = 0.01
            omega_step = -0.05 * omega0 if omega0 >= 0.5 else 0.05 * omega0 + 3e-4
            xtol = 1e-3
        else:
            alpha_step = np.pi / cfg.alpha_grid_size
            omega_step = -0.15 * omega0 if omega0 >= 0.5 else 0.15 * omega0 + 1e-3
            xtol = 1e-4
        xbest, _ = _nelder_mead_2d(
            objective, (alpha0, omega0), (alpha_step, omega_step),
            xtol=xtol, ftol_abs=1e-13 * (y_dot_y + 1.0))
        om = min(max(xbest[1], OMEGA_MIN), 1.0)
        _, coef_r = _linear_at(y, t, y_dot_y, xbest[0], om)
        wave_r, intercept_r = _wave_from_coef(xbest[0], om, coef_r)
        rss_r = _exact_rss(y, t, wave_r, intercept_r)
        if rss_r < best_rss:
            wave, intercept, best_rss = wave_r, intercept_r, rss_r

    return wave, intercept, best_rss


def _validate_target(target, grid, m: int):
    y = np.asarray(target, dtype=float)
    t = grid.points if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=float)
    if y.ndim != 1 or y.size != t.size:
        raise ValueError(f"target length {y.size} does not match grid length {t.size}")
    if not np.all(np.isfinite(y)):
        raise ValueError("target contains non-finite values")
    if y.size < 4 * m + 1:
        raise InsufficientDataError(
            f"need at least {4 * m + 1} samples to fit {m} wave(s), got {y.size}")
    if np.min(y) == np.max(y):
        raise DegenerateTargetError("target is constant; nothing to fit")
    centered = y - y.mean()
    return y, t, float(centered @ centered)


def fit_fmm_m(target, grid, m: int, cfg: FitConfig | None = None,
              init_model: FMMModel | None = None) -> FitResult:
    """Fit an m-wave model by backfitting single waves to residuals.

    Each cycle refits every wave in turn against the residual of the
    others, absorbing the subproblem intercept into the global one (the
    joint linear solve makes the absorbed intercept the exact
    closed-form optimum). A wave update is kept only if it does not
    increase the residual sum of squares, so RSS is non-increasing
    across passes. Cycling stops when a full pass improves RSS by less
    than ``cfg.backfit_rel_tol`` (relative) or after
    ``cfg.backfit_max_passes``.

    Parameters
    ----------
    target : array_like, shape (p,)
        Curve to fit; p >= 4m + 1.
    grid : TimeGrid or array_like
    m : int
        Number of waves, >= 1.
    cfg : FitConfig, optional
    init_model : FMMModel, optional
        Starting waves (must have m of them); the full grid scan still
        runs on every wave update, so a bad start cannot trap the fit.

    Returns
    -------
    FitResult
        Canonicalized model with RSS, R^2 and pass diagnostics.

    Raises
    ------
    InsufficientDataError
        If the grid is too short for m waves.
    DegenerateTargetError
        If the target is constant.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    cfg = cfg if cfg is not None else FitConfig()
    y, t, tss = _validate_target(target, grid, m)
    design = _design_for(t, cfg)

    intercept = float(y.mean())
    waves: list[FMMWave | None] = [None] * m
    preds = np.zeros((m, t.size))
    rss_prev = None
    if init_model is not None:
        if init_model.m != m:
            raise ValueError(f"init_model has {init_model.m} waves, expected {m}")
        intercept = init_model.intercept
        waves = list(init_model.waves)
        for j, wave in enumerate(waves):
            preds[j] = eval_wave(wave, t)
        resid0 = y - intercept - preds.sum(axis=0)
        rss_prev = float(resid0 @ resid0)
    rss_per_pass: list[float] = []
    passes = 0
    for _ in range(cfg.backfit_max_passes):
        passes += 1
        for j in range(m):
            others = preds.sum(axis=0) - preds[j]
            partial = y - intercept - others
            current = partial - preds[j]
            current_rss = float(current @ current)
            init = (waves[j].alpha, waves[j].omega) if waves[j] is not None else None
            wave, extra_intercept, new_rss = _fit_single_wave(partial, t, cfg, design,
                                                              init=init)
            if new_rss <= current_rss:
                waves[j] = wave
                intercept += extra_intercept
                preds[j] = eval_wave(wave, t)
        resid = y - intercept - preds.sum(axis=0)
        rss = float(resid @ resid)
        rss_per_pass.append(rss)
        if m == 1:
            break
        if rss_prev is not None and (
                rss_prev <= 0.0 or (rss_prev - rss) / rss_prev < cfg.backfit_rel_tol):
            break
        rss_prev = rss

    model = canonicalize(FMMModel(intercept=intercept, waves=tuple(waves)))
    return FitResult(model=model, rss=rss_per_pass[-1],
                     r_squared=1.0 - rss_per_pass[-1] / tss,
                     passes_used=passes, rss_per_pass=rss_per_pass)


def fit_fmm1(target, grid, cfg: FitConfig | None = None) -> FitResult:
    """Fit a single-wave model; see fit_fmm_m."""
    return fit_fmm_m(target, grid, 1, cfg)
