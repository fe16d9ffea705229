"""Factor covariance estimation: sample, constant-correlation shrinkage, and excess-return moments."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BadInput, InsufficientData
from .marketdata import ReturnPanel

_EIG_TOL = 1e-10


@dataclass(frozen=True)
class CovEstimate:
    """N x N factor covariance in per-day return variance units."""

    sigma: np.ndarray
    estimator: str  # "sample" | "shrunk"
    intensity: float | None  # shrinkage delta actually applied; None for sample
    window: tuple  # (start date, end date) the estimate was fit on
    names: tuple[str, ...]

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise BadInput("covariance must be square")
        if not np.allclose(sigma, sigma.T, atol=1e-12):
            raise BadInput("covariance must be symmetric within 1e-12")
        eigs = np.linalg.eigvalsh(sigma)
        scale = max(1.0, float(eigs[-1]))
        if eigs[0] < -_EIG_TOL * scale:
            raise BadInput("covariance is not positive semidefinite")
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n(self) -> int:
        return self.sigma.shape[0]


@dataclass(frozen=True)
class MomentEstimate:
    """Mean daily excess return per factor plus the mean daily risk-free rate."""

    mu: np.ndarray
    rf_mean: float

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if not (np.all(np.isfinite(mu)) and np.isfinite(self.rf_mean)):
            raise BadInput("moments must be finite")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)


def cov_from_matrix(sigma, names=None, estimator="sample", intensity=None) -> CovEstimate:
    """Wrap a raw matrix as a CovEstimate (mostly for tests and sweeps)."""
    sigma = np.asarray(sigma, dtype=float)
    if names is None:
        names = tuple(f"f{i}" for i in range(sigma.shape[0]))
    return CovEstimate(sigma, estimator, intensity, (None, None), tuple(names))


def _window_factors(panel: ReturnPanel, window):
    lo, hi = panel.window_rows(window)
    rows = panel.factor_matrix()[lo:hi]
    if rows.shape[0] < 2:
        raise InsufficientData("covariance needs at least 2 observations")
    if rows.shape[0] < rows.shape[1] + 1:
        warnings.warn(
            f"covariance window has {rows.shape[0]} rows for {rows.shape[1]} factors; "
            "estimate will be rank deficient",
            stacklevel=3,
        )
    return rows, (panel.dates[lo], panel.dates[hi - 1])


def sample_cov(panel: ReturnPanel, window=None) -> CovEstimate:
    """Unbiased sample covariance (divisor T-1) of the factor columns."""
    rows, span = _window_factors(panel, window)
    centered = rows - rows.mean(axis=0, keepdims=True)
    sigma = centered.T @ centered / (rows.shape[0] - 1)
    sigma = 0.5 * (sigma + sigma.T)
    return CovEstimate(sigma, "sample", None, span, panel.universe.factor_names)


def _constant_correlation_target(sample: np.ndarray) -> np.ndarray:
    """Average off-diagonal correlation applied to the sample standard deviations.

    The target keeps the sample variances on the diagonal, so shrinking never
    moves the diagonal of the estimate.
    """
    n = sample.shape[0]
    if n == 1:
        return sample.copy()
    sd = np.sqrt(np.diag(sample))
    outer = np.outer(sd, sd)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(outer > 0, sample / outer, 0.0)
    r_bar = (corr.sum() - n) / (n * (n - 1))
    target = r_bar * outer
    np.fill_diagonal(target, np.diag(sample))
    return target


def _analytic_intensity(rows: np.ndarray) -> float:
    """Ledoit-Wolf optimal shrinkage toward the constant-correlation target.

    Asymptotic estimate from "Honey, I Shrunk the Sample Covariance Matrix":
    delta* = (pi_hat - rho_hat) / gamma_hat / T, clamped to [0, 1].
    """
    t, n = rows.shape
    if n == 1:
        return 0.0
    x = rows - rows.mean(axis=0, keepdims=True)
    sample = x.T @ x / t
    var = np.diag(sample)
    sd = np.sqrt(var)
    outer = np.outer(sd, sd)
    r_bar = ((sample / outer).sum() - n) / (n * (n - 1))
    prior = r_bar * outer
    np.fill_diagonal(prior, var)

    y = x**2
    phi_mat = (y.T @ y) / t - 2 * (x.T @ x) * sample / t + sample**2
    phi = phi_mat.sum()

    term1 = ((x**3).T @ x) / t
    theta_mat = term1 - np.outer(var, np.ones(n)) * sample
    np.fill_diagonal(theta_mat, 0.0)
    rho = np.diag(phi_mat).sum() + r_bar * ((1.0 / sd)[:, None] * sd[None, :] * theta_mat).sum()

    gamma = np.linalg.norm(sample - prior, "fro") ** 2
    if gamma <= 0:
        return 0.0
    kappa = (phi - rho) / gamma
    return float(min(1.0, max(0.0, kappa / t)))


def shrunk_cov(panel: ReturnPanel, window=None, intensity: float | None = None) -> CovEstimate:
    """Convex blend delta*F + (1-delta)*S of the sample covariance S with the
    constant-correlation target F. delta is the supplied intensity, or the
    Ledoit-Wolf analytic estimate when omitted."""
    rows, span = _window_factors(panel, window)
    centered = rows - rows.mean(axis=0, keepdims=True)
    sample = centered.T @ centered / (rows.shape[0] - 1)
    sample = 0.5 * (sample + sample.T)
    if intensity is None:
        delta = _analytic_intensity(rows)
    else:
        if not 0.0 <= intensity <= 1.0:
            raise BadInput("shrinkage intensity must lie in [0, 1]")
        delta = float(intensity)
    target = _constant_correlation_target(sample)
    sigma = delta * target + (1.0 - delta) * sample
    sigma = 0.5 * (sigma + sigma.T)
    return CovEstimate(sigma, "shrunk", delta, span, panel.universe.factor_names)


def mean_excess(panel: ReturnPanel, window=None) -> MomentEstimate:
    """Mean daily return in excess of the risk-free rate, per factor."""
    lo, hi = panel.window_rows(window)
    factors = panel.factor_matrix()[lo:hi]
    rf = panel.riskfree_returns()[lo:hi]
    mu = (factors - rf[:, None]).mean(axis=0)
    return MomentEstimate(mu, float(rf.mean()))
