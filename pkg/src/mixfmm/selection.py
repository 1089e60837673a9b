"""Choosing the number of clusters from the log-likelihood curve.

Fitting richer mixtures always raises the best log-likelihood; real
structure shows up as large early gains that collapse once the true
number of clusters is passed. The rule implemented here picks the
smallest K whose next gain is a small fraction (rho) of the current
one, i.e. where the steep rise turns into a flat trend.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InsufficientDataError
from .fit import FitConfig
from .metrics import silhouette
from .mixture import EMConfig, fit_em, hard_labels
from .waves import as_matrix


@dataclass
class SelectionTrace:
    """The log-likelihood sweep and the choice it led to."""

    k_values: list[int]
    log_likelihoods: list[float]
    chosen_k: int
    gains: list[float]
    gain_ratios: list[float]
    fallback: bool = False  # no elbow found; chose k_max
    asw_tiebreak_used: bool = False
    rho: float = 0.5


def choose_from_curve(log_likelihoods, rho: float = 0.5):
    """Apply the gain-ratio elbow rule to a log-likelihood sequence.

    Parameters
    ----------
    log_likelihoods : sequence of float
        Best log-likelihood per K for K = 1..k_max, in order.
    rho : float in (0, 1)
        Ratio threshold; the chosen K is the smallest K >= 2 with
        gain(K+1)/gain(K) < rho. Gains are floored at zero and a zero
        gain makes the ratio zero (an immediate elbow).

    Returns
    -------
    (chosen_k, gains, ratios, fallback)
        gains[i] is the gain at K = i + 2; ratios[i] the ratio at
        K = i + 2. fallback is True when no K qualified and k_max was
        returned.
    """
    ll = [float(v) for v in log_likelihoods]
    if len(ll) < 2:
        raise ValueError("need log-likelihoods for at least K = 1 and 2")
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    gains = [max(0.0, ll[i] - ll[i - 1]) for i in range(1, len(ll))]
    ratios = []
    for i in range(len(gains) - 1):
        ratios.append(gains[i + 1] / gains[i] if gains[i] > 0 else 0.0)
    for i, ratio in enumerate(ratios):
        if ratio < rho:
            return i + 2, gains, ratios, False
    return len(ll), gains, ratios, True


def select_k(signals, grid, m: int, k_max: int, cfg: EMConfig | None = None,
             fit_cfg: FitConfig | None = None, rho: float = 0.5,
             asw_tiebreak: bool = False):
    """Sweep K = 1..k_max with full multi-start EM and pick the elbow.

    Parameters
    ----------
    signals, grid, m : as in fit_em
    k_max : int >= 2
    cfg, fit_cfg : EM and fit settings used for every K
    rho : float in (0, 1)
        Gain-ratio threshold of the elbow rule.
    asw_tiebreak : bool
        When the deciding ratio lands within 0.1 of rho, compare the
        average silhouette width of the chosen K and K + 1 and keep the
        better one.

    Returns
    -------
    (SelectionTrace, dict)
        The trace and a dict mapping each K to its (model, tau) fit.
    """
    cfg = cfg if cfg is not None else EMConfig()
    fit_cfg = fit_cfg if fit_cfg is not None else FitConfig()
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    X = as_matrix(signals)
    if k_max >= X.shape[0]:
        raise InsufficientDataError(
            f"k_max={k_max} needs more than k_max curves, got {X.shape[0]}")

    fits = {}
    lls = []
    for k in range(1, k_max + 1):
        model, tau = fit_em(X, grid, k, m, cfg, fit_cfg)
        fits[k] = (model, tau)
        lls.append(model.log_likelihood)

    chosen, gains, ratios, fallback = choose_from_curve(lls, rho)
    asw_used = False
    if asw_tiebreak and not fallback and chosen + 1 <= k_max:
        deciding = ratios[chosen - 2]
        if abs(deciding - rho) <= 0.1:
            asw_here, _ = silhouette(X, hard_labels(fits[chosen][1]))
            asw_next, _ = silhouette(X, hard_labels(fits[chosen + 1][1]))
            if asw_next > asw_here:
                chosen = chosen + 1
            asw_used = True

    trace = SelectionTrace(
        k_values=list(range(1, k_max + 1)), log_likelihoods=lls,
        chosen_k=chosen, gains=gains, gain_ratios=ratios,
        fallback=fallback, asw_tiebreak_used=asw_used, rho=rho)
    return trace, fits
