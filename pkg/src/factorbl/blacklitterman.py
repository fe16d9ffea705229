"""Black-Litterman pipeline: risk-aversion calibration, reverse-optimised
equilibrium prior, view encoding, and the posterior update.

The posterior blends the equilibrium excess returns pi with K investor views
(P, Q, Omega, tau):

    mu_bl = [(tau Sigma)^-1 + P' Omega^-1 P]^-1 [(tau Sigma)^-1 pi + P' Omega^-1 Q]

Views are assumed independent, so Omega is diagonal throughout.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .allocate import WeightVector, _inverse_apply
from .covariance import CovEstimate
from .errors import (
    BadInput,
    DegenerateSeries,
    NonPositiveAversion,
    SingularCovariance,
    UniverseMismatch,
)
from .marketdata import FactorUniverse, ReturnPanel

log = logging.getLogger(__name__)

AVERSION_SCENARIOS = {
    "kelly": 0.005,  # near-Kelly: barely risk averse, heavy leverage
    "average": 1.12,
    "averse": 3.0,
}


@dataclass(frozen=True)
class RiskAversion:
    value: float
    source: str  # Empirical | NearKelly | Average | Averse | Custom

    def __post_init__(self):
        if not np.isfinite(self.value) or self.value <= 0:
            raise NonPositiveAversion(f"risk aversion must be positive, got {self.value}")


def market_risk_aversion(panel: ReturnPanel, window=None) -> RiskAversion:
    """Calibrate lambda = mu_B / (2 sigma_B^2) from the benchmark series.

    mu_B is the mean daily benchmark return in excess of the risk-free rate
    and sigma_B^2 the daily benchmark return variance. The halved value is
    logged alongside, since some conventions fold the factor 2 into lambda.
    """
    lo, hi = panel.window_rows(window)
    bench = panel.benchmark_returns()[lo:hi]
    rf = panel.riskfree_returns()[lo:hi]
    var_b = bench.var(ddof=1)
    if var_b <= 0:
        raise DegenerateSeries("benchmark variance is zero over the window")
    mu_b = float((bench - rf).mean())
    lam = mu_b / (2.0 * var_b)
    if lam <= 0:
        raise NonPositiveAversion("benchmark excess mean is non-positive over the window")
    log.info("market risk aversion: lambda=%.6f (halved convention: %.6f)", lam, lam / 2.0)
    return RiskAversion(lam, "Empirical")


def scenario_aversion(kind, panel: ReturnPanel | None = None, window=None) -> RiskAversion:
    """Named risk-aversion scenarios: kelly 0.005, average 1.12, averse 3.0,
    empirical (calibrated from the panel), or a custom positive value."""
    if isinstance(kind, (int, float)):
        return RiskAversion(float(kind), "Custom")
    key = str(kind).strip().lower()
    if key in ("kelly", "near_kelly", "near-kelly"):
        return RiskAversion(AVERSION_SCENARIOS["kelly"], "NearKelly")
    if key == "average":
        return RiskAversion(AVERSION_SCENARIOS["average"], "Average")
    if key in ("averse", "risk_averse", "risk-averse"):
        return RiskAversion(AVERSION_SCENARIOS["averse"], "Averse")
    if key == "empirical":
        if panel is None:
            raise BadInput("empirical aversion needs a return panel")
        return market_risk_aversion(panel, window)
    try:
        return RiskAversion(float(key), "Custom")
    except ValueError:
        raise BadInput(f"unknown aversion scenario {kind!r}") from None


def equilibrium_prior(weights: WeightVector, sigma: CovEstimate, aversion: RiskAversion) -> np.ndarray:
    """Reverse optimisation: pi = 2 lambda Sigma w."""
    if weights.n != sigma.n:
        raise BadInput("weights and covariance disagree on N")
    return 2.0 * aversion.value * (sigma.sigma @ weights.weights)


@dataclass(frozen=True)
class ViewSpec:
    """One investor view.

    kind 'absolute': a single factor's expected excess return (row sums to 1).
    kind 'relative': longs minus shorts, row sums to 0.
    kind 'global': an arbitrary long portfolio minus an arbitrary short
    portfolio; the row carries the given portfolio weights verbatim.
    omega optionally fixes this view's uncertainty instead of the default rule.
    """

    kind: str
    q: float
    factor: str | None = None
    longs: dict = field(default_factory=dict)
    shorts: dict = field(default_factory=dict)
    omega: float | None = None


def absolute_view(factor: str, q: float, omega: float | None = None) -> ViewSpec:
    return ViewSpec("absolute", q, factor=factor, omega=omega)


def relative_view(longs: dict, shorts: dict, q: float, omega: float | None = None) -> ViewSpec:
    return ViewSpec("relative", q, longs=dict(longs), shorts=dict(shorts), omega=omega)


def global_view(long_portfolio: dict, short_portfolio: dict, q: float, omega: float | None = None) -> ViewSpec:
    return ViewSpec("global", q, longs=dict(long_portfolio), shorts=dict(short_portfolio), omega=omega)


@dataclass(frozen=True)
class ViewSet:
    """The belief bundle (P, Q, Omega, tau). K = 0 encodes "no views"."""

    p: np.ndarray  # K x N
    q: np.ndarray  # K
    omega: np.ndarray | None  # K x K diagonal, or None until defaulted
    tau: float
    kinds: tuple[str, ...] = ()

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.p, dtype=float))
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        if p.shape[0] != q.size:
            raise BadInput("P and Q disagree on the number of views")
        if self.tau <= 0:
            raise BadInput("tau must be positive")
        kinds = tuple(self.kinds) if self.kinds else ("global",) * p.shape[0]
        if len(kinds) != p.shape[0]:
            raise BadInput("one kind per view required")
        for i, kind in enumerate(kinds):
            row_sum = p[i].sum()
            if kind == "relative" and abs(row_sum) > 1e-12:
                raise BadInput(f"relative view {i} must have a zero-sum row")
            if kind == "absolute" and abs(row_sum - 1.0) > 1e-12:
                raise BadInput(f"absolute view {i} must have a row summing to 1")
        if self.omega is not None:
            om = np.asarray(self.omega, dtype=float)
            if om.shape != (p.shape[0], p.shape[0]):
                raise BadInput("Omega must be K x K")
            if p.shape[0] and (np.any(np.diag(om) <= 0) or np.any(om - np.diag(np.diag(om)))):
                raise BadInput("Omega must be diagonal with strictly positive diagonal")
            om.setflags(write=False)
            object.__setattr__(self, "omega", om)
        p.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "kinds", kinds)

    @property
    def k(self) -> int:
        return self.p.shape[0]

    def with_omega(self, omega: np.ndarray) -> "ViewSet":
        return ViewSet(self.p, self.q, omega, self.tau, self.kinds)


def empty_views(n: int, tau: float = 1.0) -> ViewSet:
    return ViewSet(np.zeros((0, n)), np.zeros(0), np.zeros((0, 0)), tau, ())


def build_views(
    specs,
    universe: FactorUniverse,
    tau: float = 1.0,
    sigma: CovEstimate | None = None,
) -> ViewSet:
    """Encode view specs into (P, Q, Omega, tau).

    Absolute rows place a single 1; relative rows put longs positive and
    shorts negative and must net to zero; global rows carry the two portfolio
    weightings as given. Omega follows the proportional default rule when a
    covariance is supplied, with per-view fixed overrides honoured.
    """
    specs = list(specs)
    names = universe.factor_names
    index = {name: i for i, name in enumerate(names)}
    n = len(names)
    if not specs:
        return empty_views(n, tau)

    p = np.zeros((len(specs), n))
    q = np.zeros(len(specs))
    kinds = []
    overrides: list[float | None] = []
    for row, spec in enumerate(specs):
        q[row] = spec.q
        kinds.append(spec.kind)
        overrides.append(spec.omega)
        if spec.kind == "absolute":
            if spec.factor not in index:
                raise UniverseMismatch(f"unknown factor {spec.factor!r}")
            p[row, index[spec.factor]] = 1.0
        elif spec.kind in ("relative", "global"):
            for name, weight in spec.longs.items():
                if name not in index:
                    raise UniverseMismatch(f"unknown factor {name!r}")
                p[row, index[name]] += weight
            for name, weight in spec.shorts.items():
                if name not in index:
                    raise UniverseMismatch(f"unknown factor {name!r}")
                p[row, index[name]] -= weight
        else:
            raise BadInput(f"unknown view kind {spec.kind!r}")

    views = ViewSet(p, q, None, tau, tuple(kinds))
    if sigma is not None:
        omega = default_omega(views, sigma)
        for i, fixed in enumerate(overrides):
            if fixed is not None:
                if fixed <= 0:
                    raise BadInput("fixed view uncertainty must be positive")
                omega[i, i] = fixed
        views = views.with_omega(omega)
    elif all(o is not None for o in overrides):
        views = views.with_omega(np.diag([float(o) for o in overrides]))
    return views


def default_omega(views: ViewSet, sigma: CovEstimate) -> np.ndarray:
    """Proportional uncertainty: Omega = diag(P (tau Sigma) P')."""
    if views.p.shape[1] != sigma.n:
        raise BadInput("views and covariance disagree on N")
    quad = views.p @ (views.tau * sigma.sigma) @ views.p.T
    diag = np.diag(quad).copy()
    if views.k and np.any(diag <= 0):
        raise BadInput("a view row has zero variance under Sigma")
    return np.diag(diag)


def posterior_returns(prior: np.ndarray, sigma: CovEstimate, views: ViewSet) -> np.ndarray:
    """Evaluate the posterior formula; with no views the prior passes through."""
    prior = np.asarray(prior, dtype=float)
    if views.k == 0:
        return prior.copy()
    if views.omega is None:
        raise BadInput("views need Omega before the posterior update")
    ts = views.tau * sigma.sigma
    if np.linalg.cond(ts) > 1e12:
        raise SingularCovariance("tau * Sigma is too ill-conditioned to invert")
    ts_inv = np.linalg.inv(ts)
    om_inv_diag = 1.0 / np.diag(views.omega)
    a_mat = ts_inv + views.p.T @ (om_inv_diag[:, None] * views.p)
    b_vec = ts_inv @ prior + views.p.T @ (om_inv_diag * views.q)
    return np.linalg.solve(a_mat, b_vec)


def posterior_weights(mu_bl: np.ndarray, sigma: CovEstimate, aversion: RiskAversion) -> WeightVector:
    """Invert the reverse optimisation: w = Sigma^-1 mu_bl / (2 lambda).

    Unconstrained on purpose; posterior weights may be negative and the
    leverage scales with 1/lambda.
    """
    w = _inverse_apply(sigma.sigma, np.asarray(mu_bl, dtype=float)) / (2.0 * aversion.value)
    return WeightVector(w, "black_litterman", constrained=False, aversion=aversion.value)


@dataclass(frozen=True)
class BLResult:
    prior_pi: np.ndarray
    posterior_mu: np.ndarray
    posterior_weights: WeightVector
    lambda_used: RiskAversion
    prior_weights: WeightVector

    @property
    def active_weights(self) -> np.ndarray:
        return self.posterior_weights.weights - self.prior_weights.weights


def bl_pipeline(
    prior_weights: WeightVector,
    sigma: CovEstimate,
    views: ViewSet,
    aversion: RiskAversion,
    market_aversion: RiskAversion | None = None,
) -> BLResult:
    """Equilibrium prior -> posterior returns -> posterior weights.

    The prior always uses the market-calibrated lambda so pi is invariant
    across investor scenarios; the scenario lambda only rescales the final
    weights.
    """
    market_aversion = market_aversion or aversion
    if views.k and views.omega is None:
        views = views.with_omega(default_omega(views, sigma))
    pi = equilibrium_prior(prior_weights, sigma, market_aversion)
    mu_bl = posterior_returns(pi, sigma, views)
    w_bl = posterior_weights(mu_bl, sigma, aversion)
    return BLResult(pi, mu_bl, w_bl, aversion, prior_weights)


def reference_views(universe: FactorUniverse, tau: float = 1.0, sigma: CovEstimate | None = None) -> ViewSet:
    """The engine's stock three-view example on the default 20-factor universe.

    1. us_momentum earns 1% (absolute).
    2. us_growth beats us_value by 1% (relative).
    3. A global basket long the five China equity factors at 1/5 each plus
       us_bond_longterm at 1, targeting 2%.
    """
    china = ["china_benchmark", "china_growth", "china_value", "china_tech", "china_quality"]
    specs = [
        absolute_view("us_momentum", 0.01),
        relative_view({"us_growth": 1.0}, {"us_value": 1.0}, 0.01),
        global_view({name: 0.2 for name in china} | {"us_bond_longterm": 1.0}, {}, 0.02),
    ]
    return build_views(specs, universe, tau=tau, sigma=sigma)
