"""Robustness studies: weight paths over time and sensitivity of prior and
posterior weights to a volatility multiplier applied to the covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blacklitterman import bl_pipeline, default_omega
from .backtest import BacktestLedger
from .covariance import CovEstimate, sample_cov, shrunk_cov
from .errors import BadInput

CORNER_THRESHOLD = 0.9


@dataclass(frozen=True)
class WeightPath:
    scheme: str
    dates: np.ndarray
    weights: np.ndarray  # rounds x N
    corner_flags: np.ndarray  # rounds, True where max weight exceeds the threshold


def weight_paths(ledger: BacktestLedger, threshold: float = CORNER_THRESHOLD) -> list[WeightPath]:
    """Stack each scheme's per-rebalance weights and flag corner solutions."""
    paths = []
    for scheme in ledger.schemes:
        recs = [r for r in ledger.records if r.scheme == scheme]
        dates = np.array([r.date for r in recs], dtype="datetime64[D]")
        weights = np.stack([r.weights.weights for r in recs])
        flags = weights.max(axis=1) > threshold
        paths.append(WeightPath(scheme, dates, weights, flags))
    return paths


@dataclass(frozen=True)
class VolSweepResult:
    multipliers: np.ndarray  # ascending positive scalars
    prior_weights: np.ndarray  # grid x N
    posterior_weights: np.ndarray  # grid x N

    def __post_init__(self):
        m = np.asarray(self.multipliers, dtype=float)
        if np.any(m <= 0) or np.any(np.diff(m) <= 0):
            raise BadInput("multipliers must be strictly increasing and positive")


def default_multipliers() -> np.ndarray:
    """21 log-spaced points in [0.25, 4]."""
    return np.geomspace(0.25, 4.0, 21)


def volatility_sweep(
    prior_weights_fn,
    sigma: CovEstimate,
    views,
    aversion,
    multipliers=None,
    fixed_omega: bool = False,
) -> VolSweepResult:
    """Recompute prior and Black-Litterman posterior weights under m * Sigma.

    prior_weights_fn maps a CovEstimate to a WeightVector, so the prior can be
    any scheme. By default the view uncertainty is re-derived from each scaled
    covariance; fixed_omega keeps the Omega computed from the base covariance,
    which is the contrast the proportional rule removes.
    """
    if multipliers is None:
        multipliers = default_multipliers()
    multipliers = np.asarray(multipliers, dtype=float)

    base_views = views
    if fixed_omega and base_views.k and base_views.omega is None:
        base_views = base_views.with_omega(default_omega(base_views, sigma))

    priors = []
    posteriors = []
    for m in multipliers:
        scaled = CovEstimate(m * sigma.sigma, sigma.estimator, sigma.intensity, sigma.window, sigma.names)
        w_prior = prior_weights_fn(scaled)
        round_views = base_views
        if base_views.k and not fixed_omega:
            round_views = base_views.with_omega(default_omega(base_views, scaled))
        result = bl_pipeline(w_prior, scaled, round_views, aversion)
        priors.append(w_prior.weights)
        posteriors.append(result.posterior_weights.weights)
    return VolSweepResult(multipliers, np.stack(priors), np.stack(posteriors))


def shrinkage_impact(panel, window=None, weights_fn=None) -> dict:
    """Quantify how much the shrunk estimator moves the covariance and the
    weights: Frobenius distance between the two estimates and the max
    per-weight difference under weights_fn (GMV by default)."""
    from .allocate import solve_constrained

    s_sample = sample_cov(panel, window)
    s_shrunk = shrunk_cov(panel, window)
    gap = float(np.linalg.norm(s_sample.sigma - s_shrunk.sigma, "fro"))
    if weights_fn is None:
        def weights_fn(est):
            return solve_constrained("gmv", est)[0]
    w1 = weights_fn(s_sample).weights
    w2 = weights_fn(s_shrunk).weights
    return {
        "frobenius_gap": gap,
        "max_weight_diff": float(np.abs(w1 - w2).max()),
        "intensity": s_shrunk.intensity,
    }
