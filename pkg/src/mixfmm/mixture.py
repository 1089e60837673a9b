"""Gaussian mixtures with FMM wave means, estimated by EM.

Each mixture component is an isotropic Gaussian over the p samples of a
curve, centered on an FMM model curve. The E-step computes posterior
responsibilities in the log domain; the M-step refits each component's
wave model to the responsibility-weighted mean curve, then updates the
noise level(s) and the mixing proportions. Multiple random starts guard
against local optima.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .exceptions import InsufficientDataError
from .fit import FitConfig, fit_fmm_m
from .waves import FMMModel, FMMWave, TimeGrid, Signal, as_matrix, eval_model

LOG_TWO_PI = float(np.log(2.0 * np.pi))

# a responsibility column below this fraction of n marks a dead component
EMPTY_CLUSTER_FRACTION = 1e-8


@dataclass
class EMConfig:
    """Settings of the EM estimator."""

    max_iter: int = 100
    rel_tol: float = 1e-6
    n_starts: int = 10
    seed: int = 0
    homoscedastic: bool = True
    sigma_floor: float | None = None  # None: 1e-8 x data root-mean-square

    def __post_init__(self):
        if self.max_iter < 1 or self.rel_tol <= 0 or self.n_starts < 1:
            raise ValueError("max_iter, rel_tol and n_starts must be positive")
        if self.sigma_floor is not None and self.sigma_floor <= 0:
            raise ValueError("sigma_floor must be positive")


@dataclass
class MixFMMModel:
    """A fitted mixture: proportions, wave models, noise levels, diagnostics."""

    k: int
    m: int
    gammas: np.ndarray
    thetas: list[FMMModel]
    sigmas: np.ndarray  # length 1 if homoscedastic, else length k
    homoscedastic: bool
    log_likelihood: float
    n_iterations: int
    converged: bool
    seed: int | None = None
    config: dict | None = None
    log_likelihood_history: list[float] = field(default_factory=list)
    start_histories: list[list[float]] | None = None
    reseeds: int = 0

    def sigma_of(self, k: int) -> float:
        return float(self.sigmas[0] if self.sigmas.size == 1 else self.sigmas[k])

    def mean_curves(self, grid) -> np.ndarray:
        """Component template curves, shape (k, p)."""
        return np.vstack([eval_model(theta, grid) for theta in self.thetas])


def log_density(x, theta: FMMModel, sigma: float, grid) -> float:
    """Log of the isotropic Gaussian density of one curve under one component."""
    values = x.values if isinstance(x, Signal) else np.asarray(x, dtype=float)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    mu = eval_model(theta, grid)
    resid = values - mu
    p = values.size
    return float(-0.5 * p * (LOG_TWO_PI + 2.0 * np.log(sigma))
                 - (resid @ resid) / (2.0 * sigma ** 2))


def _log_density_matrix(X: np.ndarray, mu: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    """(n, k) log densities for all curves under all components."""
    p = X.shape[1]
    sq = ((X[:, None, :] - mu[None, :, :]) ** 2).sum(axis=2)
    sig = sigmas if sigmas.size == mu.shape[0] else np.repeat(sigmas, mu.shape[0])
    return -0.5 * p * (LOG_TWO_PI + 2.0 * np.log(sig))[None, :] - sq / (2.0 * sig ** 2)[None, :]


def _posteriors(X: np.ndarray, mu: np.ndarray, sigmas: np.ndarray,
                gammas: np.ndarray):
    """Responsibilities and total log-likelihood for the current parameters."""
    logw = _log_density_matrix(X, mu, sigmas) + np.log(gammas)[None, :]
    norms = logsumexp(logw, axis=1)
    tau = np.exp(logw - norms[:, None])
    tau /= tau.sum(axis=1, keepdims=True)
    return tau, float(norms.sum())


def e_step(signals, model: MixFMMModel, grid) -> np.ndarray:
    """Posterior responsibility matrix, shape (n, k); rows sum to one.

    Computed with the log-sum-exp trick, so widely separated components
    cannot underflow to all-zero rows.
    """
    X = as_matrix(signals)
    mu = model.mean_curves(grid)
    sigmas = model.sigmas if model.sigmas.size == model.k else np.full(model.k, model.sigmas[0])
    tau, _ = _posteriors(X, mu, sigmas, model.gammas)
    return tau


def hard_labels(tau: np.ndarray) -> np.ndarray:
    """Cluster index of the highest responsibility per row (ties: lowest index)."""
    return np.argmax(tau, axis=1)


def _weighted_sigma(X, mu, tau, homoscedastic, floor):
    """Noise update: weighted residual RMS per component, or pooled."""
    n, p = X.shape
    sq = ((X[:, None, :] - mu[None, :, :]) ** 2).sum(axis=2)
    if homoscedastic:
        pooled = np.sqrt((tau * sq).sum() / (n * p))
        return np.maximum(np.array([pooled]), floor)
    col = tau.sum(axis=0)
    sig = np.sqrt((tau * sq).sum(axis=0) / (p * np.maximum(col, 1e-300)))
    return np.maximum(sig, floor)


def _m_step_impl(X, tau, grid, m, cfg: EMConfig, fit_cfg: FitConfig,
                 prev_thetas=None, sigma_floor=0.0):
    """M-step returning (thetas, sigmas, gammas, mu, n_reseeded).

    Dead components (responsibility mass below a tiny fraction of n) are
    reseeded at the worst-explained signal before the update. The wave
    refit is inexact, so each new theta is kept only if it does not
    increase the weighted residual against the previous one; this
    preserves the EM ascent property.
    """
    n, p = X.shape
    k = tau.shape[1]
    tau = tau.copy()
    col = tau.sum(axis=0)
    n_reseeded = 0
    reseeded_idx = []
    for j in np.nonzero(col < EMPTY_CLUSTER_FRACTION * n)[0]:
        worst = int(np.argmin(tau.max(axis=1)))
        tau[worst, :] = 0.0
        tau[worst, j] = 1.0
        n_reseeded += 1
        reseeded_idx.append(int(j))
    if n_reseeded:
        col = tau.sum(axis=0)

    xbar = (tau.T @ X) / col[:, None]
    thetas = []
    mu = np.empty((k, p))
    for j in range(k):
        init = prev_thetas[j] if prev_thetas is not None else None
        theta = fit_fmm_m(xbar[j], grid, m, fit_cfg, init_model=init).model
        curve = eval_model(theta, grid)
        if init is not None:
            prev_curve = eval_model(init, grid)
            d_new = xbar[j] - curve
            d_old = xbar[j] - prev_curve
            if d_new @ d_new > d_old @ d_old:
                theta, curve = init, prev_curve
        thetas.append(theta)
        mu[j] = curve
    sigmas = _weighted_sigma(X, mu, tau, cfg.homoscedastic, sigma_floor)
    if n_reseeded and not cfg.homoscedastic:
        # a reborn component gets the pooled noise level, not its own
        pooled = _weighted_sigma(X, mu, tau, True, sigma_floor)[0]
        sigmas[reseeded_idx] = pooled
    gammas = col / n
    return thetas, sigmas, gammas, mu, n_reseeded


def m_step(signals, tau, grid, m, cfg: EMConfig, fit_cfg: FitConfig | None = None,
           prev_thetas=None):
    """One maximization step.

    Parameters
    ----------
    signals : matrix-like of n curves
    tau : ndarray (n, k)
        Row-stochastic responsibilities.
    grid : TimeGrid
    m : int
        Waves per component.
    cfg : EMConfig
    fit_cfg : FitConfig, optional
    prev_thetas : list of FMMModel, optional
        Previous component models; enables the monotonicity guard and
        warm-started refits.

    Returns
    -------
    (thetas, sigmas, gammas)
    """
    X = as_matrix(signals)
    fit_cfg = fit_cfg if fit_cfg is not None else FitConfig()
    floor = cfg.sigma_floor if cfg.sigma_floor is not None \
        else 1e-8 * float(np.sqrt((X ** 2).mean()))
    thetas, sigmas, gammas, _, _ = _m_step_impl(
        X, np.asarray(tau, dtype=float), grid, m, cfg, fit_cfg,
        prev_thetas=prev_thetas, sigma_floor=floor)
    return thetas, sigmas, gammas


def _init_partition(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    """Random hard assignment with every cluster non-empty."""
    assign = rng.integers(0, k, size=n)
    perm = rng.permutation(n)
    assign[perm[:k]] = np.arange(k)
    return assign


def _run_em(X, grid, k, m, cfg: EMConfig, fit_cfg: FitConfig, seed_seq,
            sigma_floor):
    n, p = X.shape
    rng = np.random.default_rng(seed_seq)
    assign = _init_partition(rng, n, k)
    tau = np.zeros((n, k))
    tau[np.arange(n), assign] = 1.0

    thetas = []
    mu = np.empty((k, p))
    for j in range(k):
        theta = fit_fmm_m(X[assign == j].mean(axis=0), grid, m, fit_cfg).model
        thetas.append(theta)
        mu[j] = eval_model(theta, grid)
    gammas = np.full(k, 1.0 / k)
    sigmas = _weighted_sigma(X, mu, tau, cfg.homoscedastic, sigma_floor)

    history: list[float] = []
    converged = False
    n_reseeded_total = 0
    ll_prev = None
    iterations = 0
    for _ in range(cfg.max_iter):
        sig_full = sigmas if sigmas.size == k else np.full(k, sigmas[0])
        tau, ll = _posteriors(X, mu, sig_full, gammas)
        history.append(ll)
        if ll_prev is not None and abs(ll - ll_prev) <= cfg.rel_tol * abs(ll_prev):
            converged = True
            break
        ll_prev = ll
        thetas, sigmas, gammas, mu, reseeded = _m_step_impl(
            X, tau, grid, m, cfg, fit_cfg, prev_thetas=thetas,
            sigma_floor=sigma_floor)
        n_reseeded_total += reseeded
        iterations += 1
    else:
        sig_full = sigmas if sigmas.size == k else np.full(k, sigmas[0])
        tau, ll = _posteriors(X, mu, sig_full, gammas)
        history.append(ll)

    model = MixFMMModel(
        k=k, m=m, gammas=gammas, thetas=thetas, sigmas=sigmas,
        homoscedastic=cfg.homoscedastic, log_likelihood=history[-1],
        n_iterations=iterations, converged=converged,
        log_likelihood_history=history, reseeds=n_reseeded_total)
    return model, tau


def fit_em(signals, grid, k: int, m: int, cfg: EMConfig | None = None,
           fit_cfg: FitConfig | None = None):
    """Fit a k-component mixture of m-wave models by multi-start EM.

    Each start draws a random hard partition, fits component models to
    the cluster means, then alternates E and M steps until the relative
    log-likelihood change drops below ``cfg.rel_tol`` or ``cfg.max_iter``
    is reached. The start with the highest final log-likelihood wins
    (ties: lowest start index). With k = 1 every start is identical, so
    a single run is performed.

    Parameters
    ----------
    signals : n curves (matrix, list of Signal, or list of arrays)
    grid : TimeGrid
    k : int
        Number of mixture components; n > k required.
    m : int
        Waves per component.
    cfg : EMConfig, optional
    fit_cfg : FitConfig, optional
        Settings of the inner wave fits.

    Returns
    -------
    (MixFMMModel, ndarray)
        The best model and its (n, k) responsibility matrix.
    """
    cfg = cfg if cfg is not None else EMConfig()
    fit_cfg = fit_cfg if fit_cfg is not None else FitConfig()
    X = as_matrix(signals)
    n = X.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if n <= k:
        raise InsufficientDataError(f"need more than k={k} curves, got {n}")
    if not isinstance(grid, TimeGrid):
        raise TypeError("grid must be a TimeGrid")

    floor = cfg.sigma_floor if cfg.sigma_floor is not None \
        else 1e-8 * float(np.sqrt((X ** 2).mean()))
    n_starts = 1 if k == 1 else cfg.n_starts
    seed_seqs = np.random.SeedSequence(cfg.seed).spawn(n_starts)

    best = None
    best_tau = None
    histories = []
    for run_idx in range(n_starts):
        model, tau = _run_em(X, grid, k, m, cfg, fit_cfg, seed_seqs[run_idx], floor)
        histories.append(model.log_likelihood_history)
        if best is None or model.log_likelihood > best.log_likelihood:
            best, best_tau = model, tau

    best.seed = cfg.seed
    best.config = {
        "max_iter": cfg.max_iter, "rel_tol": cfg.rel_tol,
        "n_starts": cfg.n_starts, "homoscedastic": cfg.homoscedastic,
        "sigma_floor": cfg.sigma_floor,
        "fit_alpha_grid_size": fit_cfg.alpha_grid_size,
        "fit_backfit_max_passes": fit_cfg.backfit_max_passes,
        "fit_backfit_rel_tol": fit_cfg.backfit_rel_tol,
        "fit_refine": fit_cfg.refine,
    }
    best.start_histories = histories
    return best, best_tau


def model_to_dict(model: MixFMMModel) -> dict:
    return {
        "k": model.k,
        "m": model.m,
        "gammas": [float(g) for g in model.gammas],
        "clusters": [
            {
                "intercept": theta.intercept,
                "waves": [
                    {"amplitude": w.amplitude, "alpha": w.alpha,
                     "beta": w.beta, "omega": w.omega}
                    for w in theta.waves
                ],
            }
            for theta in model.thetas
        ],
        "sigmas": [float(s) for s in model.sigmas],
        "homoscedastic": model.homoscedastic,
        "log_likelihood": model.log_likelihood,
        "n_iterations": model.n_iterations,
        "converged": model.converged,
        "seed": model.seed,
        "config": model.config,
    }


def model_from_dict(doc: dict) -> MixFMMModel:
    thetas = [
        FMMModel(
            intercept=c["intercept"],
            waves=tuple(FMMWave(amplitude=w["amplitude"], alpha=w["alpha"],
                                beta=w["beta"], omega=w["omega"])
                        for w in c["waves"]),
        )
        for c in doc["clusters"]
    ]
    return MixFMMModel(
        k=doc["k"], m=doc["m"], gammas=np.asarray(doc["gammas"], dtype=float),
        thetas=thetas, sigmas=np.asarray(doc["sigmas"], dtype=float),
        homoscedastic=doc["homoscedastic"],
        log_likelihood=doc["log_likelihood"],
        n_iterations=doc.get("n_iterations", 0),
        converged=doc.get("converged", True),
        seed=doc.get("seed"), config=doc.get("config"))


def save_model(model: MixFMMModel, path) -> None:
    """Write the model as JSON; floats round-trip exactly."""
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> MixFMMModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
