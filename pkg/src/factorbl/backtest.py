"""Static and rolling weight-allocation backtests.

The rolling protocol advances in `window`-day steps. Each round trains a
fresh sequence classifier on the trailing train_span worth of rolling
samples, estimates covariance and mean excess returns on the most recent
sequence_length days, computes constrained comparison weights plus the
Markowitz prior, updates it with the generated view through Black-Litterman,
and invests every scheme for the next `window` days.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .allocate import (
    WeightVector,
    equal_weights,
    implied_beta_weights,
    market_cap_weights,
    solve_constrained,
)
from .blacklitterman import (
    RiskAversion,
    bl_pipeline,
    empty_views,
    market_risk_aversion,
)
from .covariance import mean_excess, sample_cov, shrunk_cov
from .errors import (
    BadInput,
    DegenerateSeries,
    InsufficientData,
    MissingInput,
    NonPositiveAversion,
)
from .marketdata import MarketCapWeights, ReturnPanel
from .viewgen import (
    DYNAMIC_TAU,
    GeneratedView,
    ViewModelConfig,
    build_dataset,
    cumulative_return,
    momentum_oracle_view,
    predict_view,
    train_sequence_model,
    view_to_viewset,
)

STATIC_SCHEMES = ("equal", "market_cap", "implied_beta", "gmv", "max_sharpe", "markowitz", "black_litterman")
DYNAMIC_SCHEMES = ("equal", "gmv", "max_sharpe", "markowitz", "black_litterman")


@dataclass(frozen=True)
class RebalanceRecord:
    date: np.datetime64
    scheme: str
    weights: WeightVector
    realized_period_return: float
    view: GeneratedView | None = None


@dataclass(frozen=True)
class RoundInfo:
    """Audit metadata for one rolling round."""

    train_start: np.datetime64
    train_end: np.datetime64
    max_label_date: np.datetime64
    invest_start: np.datetime64
    invest_end: np.datetime64
    view_factor: int
    view_q: float


@dataclass
class BacktestLedger:
    records: list[RebalanceRecord]
    schemes: tuple[str, ...]
    cumulative_wealth: dict[str, np.ndarray]  # per scheme, starts at 1.0
    period_days: float  # trading days per rebalance period
    rf_per_period: float  # mean compounded risk-free return per period
    rounds: tuple[RoundInfo, ...] = ()

    @property
    def rebalance_dates(self) -> np.ndarray:
        seen = []
        for rec in self.records:
            if rec.scheme == self.schemes[0]:
                seen.append(rec.date)
        return np.array(seen, dtype="datetime64[D]")


def _assemble_ledger(dates, per_scheme_returns, per_scheme_weights, views=None,
                     period_days=1.0, rf_per_period=0.0, rounds=()) -> BacktestLedger:
    schemes = tuple(per_scheme_returns)
    records = []
    wealth = {}
    for scheme in schemes:
        rets = np.asarray(per_scheme_returns[scheme], dtype=float)
        wealth[scheme] = np.concatenate([[1.0], np.cumprod(1.0 + rets)])
        if np.any(wealth[scheme] <= 0):
            warnings.warn(f"scheme {scheme!r} wealth hit zero or below", stacklevel=2)
    for k, date in enumerate(dates):
        for scheme in schemes:
            view = views[k] if (views is not None and scheme == "black_litterman") else None
            records.append(
                RebalanceRecord(
                    date=np.datetime64(date, "D"),
                    scheme=scheme,
                    weights=per_scheme_weights[scheme][k],
                    realized_period_return=float(per_scheme_returns[scheme][k]),
                    view=view,
                )
            )
    return BacktestLedger(records, schemes, wealth, period_days, rf_per_period, tuple(rounds))


def _estimate(panel, window, estimator):
    if estimator == "sample":
        return sample_cov(panel, window)
    if estimator == "shrunk":
        return shrunk_cov(panel, window)
    raise BadInput(f"unknown estimator {estimator!r}")


def run_static(
    panel: ReturnPanel,
    schemes=None,
    views=None,
    aversion: RiskAversion | None = None,
    caps: MarketCapWeights | None = None,
    estimator: str = "sample",
    markowitz_aversion: float = 2.0,
) -> BacktestLedger:
    """Fit every scheme once on the full panel and hold the weights, accruing
    daily portfolio returns (constant-mix)."""
    schemes = tuple(schemes) if schemes else STATIC_SCHEMES
    n = panel.universe.n_factors
    sigma = _estimate(panel, None, estimator)
    moments = mean_excess(panel)

    weights: dict[str, WeightVector] = {}
    for scheme in schemes:
        if scheme == "equal":
            weights[scheme] = equal_weights(n)
        elif scheme == "market_cap":
            if caps is None:
                raise MissingInput("market_cap scheme needs market caps")
            weights[scheme] = market_cap_weights(caps)
        elif scheme == "implied_beta":
            weights[scheme] = implied_beta_weights(sigma, panel)
        elif scheme in ("gmv", "max_sharpe"):
            weights[scheme], _ = solve_constrained(scheme, sigma, moments)
        elif scheme == "markowitz":
            weights[scheme], _ = solve_constrained(scheme, sigma, moments, aversion=markowitz_aversion)
        elif scheme == "black_litterman":
            if caps is None:
                raise MissingInput("black_litterman prior needs market caps")
            lam_mkt = market_risk_aversion(panel)
            vset = views if views is not None else empty_views(n, tau=1.0)
            result = bl_pipeline(market_cap_weights(caps), sigma, vset, aversion or lam_mkt, lam_mkt)
            weights[scheme] = result.posterior_weights
        else:
            raise BadInput(f"unknown scheme {scheme!r}")

    factors = panel.factor_matrix()
    rf = panel.riskfree_returns()
    per_returns = {s: factors @ weights[s].weights for s in schemes}
    per_weights = {s: [weights[s]] * panel.n_days for s in schemes}
    return _assemble_ledger(
        panel.dates,
        per_returns,
        per_weights,
        period_days=1.0,
        rf_per_period=float(rf.mean()),
    )


def run_dynamic_bl(
    panel: ReturnPanel,
    config: ViewModelConfig,
    aversion: RiskAversion | None = None,
    estimator: str = "sample",
    view_source="model",
    markowitz_aversion: float = 2.0,
    tau: float = DYNAMIC_TAU,
) -> BacktestLedger:
    """Rolling Black-Litterman backtest with a freshly trained view model per round.

    `aversion` is the posterior risk aversion; None means use each round's
    market-calibrated lambda (the empirical scenario), which keeps posterior
    weights anchored to the round's prior. `view_source` may be "model"
    (train the LSTM), "momentum" (deterministic trailing-return baseline), or
    any callable with the same signature as momentum_oracle_view.
    """
    length = config.sequence_length
    span = config.train_span
    window = config.window
    round_len = span + length + window
    if panel.n_days < round_len:
        raise InsufficientData(
            f"panel has {panel.n_days} days; one round needs {round_len}"
        )
    factors = panel.factor_matrix()
    rf = panel.riskfree_returns()
    dates = panel.dates

    per_returns = {s: [] for s in DYNAMIC_SCHEMES}
    per_weights = {s: [] for s in DYNAMIC_SCHEMES}
    invest_dates = []
    views_per_round = []
    rounds = []
    rf_periods = []

    for t0 in range(0, panel.n_days - round_len + 1, window):
        est_lo = t0 + span
        invest_lo = t0 + span + length
        train_window = (dates[t0], dates[invest_lo - 1])
        est_window = (dates[est_lo], dates[invest_lo - 1])
        # last sample start within the training range, hence the newest label row
        last_start = t0 + ((span + length - length - window) // window) * window
        max_label_row = last_start + length + window - 1

        sigma = _estimate(panel, est_window, estimator)
        moments = mean_excess(panel, est_window)
        try:
            lam_mkt = market_risk_aversion(panel, est_window)
        except (NonPositiveAversion, DegenerateSeries):
            # benchmark drifted down over this window; fall back to the
            # posterior lambda (or the prior's) so the round still runs
            lam_mkt = aversion or RiskAversion(markowitz_aversion, "Custom")
        round_aversion = aversion or lam_mkt

        w_equal = equal_weights(panel.universe.n_factors)
        w_gmv, _ = solve_constrained("gmv", sigma, moments)
        w_sharpe, _ = solve_constrained("max_sharpe", sigma, moments)
        w_marko, _ = solve_constrained("markowitz", sigma, moments, aversion=markowitz_aversion)

        if view_source == "model":
            dataset = build_dataset(panel, train_window, config)
            model = train_sequence_model(dataset, config)
            view = predict_view(model, factors[est_lo:invest_lo])
        elif view_source == "momentum":
            view = momentum_oracle_view(panel, est_window, config)
        elif callable(view_source):
            view = view_source(panel, est_window, config)
        else:
            raise BadInput(f"unknown view source {view_source!r}")

        vset = view_to_viewset(view, sigma, tau)
        bl = bl_pipeline(w_marko, sigma, vset, round_aversion, lam_mkt)

        invested = factors[invest_lo : invest_lo + window]
        period = cumulative_return(invested)
        round_weights = {
            "equal": w_equal,
            "gmv": w_gmv,
            "max_sharpe": w_sharpe,
            "markowitz": w_marko,
            "black_litterman": bl.posterior_weights,
        }
        for scheme in DYNAMIC_SCHEMES:
            per_weights[scheme].append(round_weights[scheme])
            per_returns[scheme].append(float(round_weights[scheme].weights @ period))
        invest_dates.append(dates[invest_lo])
        views_per_round.append(view)
        rf_periods.append(float(np.prod(1.0 + rf[invest_lo : invest_lo + window]) - 1.0))
        rounds.append(
            RoundInfo(
                train_start=dates[t0],
                train_end=dates[invest_lo - 1],
                max_label_date=dates[max_label_row],
                invest_start=dates[invest_lo],
                invest_end=dates[invest_lo + window - 1],
                view_factor=view.factor,
                view_q=view.q,
            )
        )

    return _assemble_ledger(
        invest_dates,
        per_returns,
        per_weights,
        views=views_per_round,
        period_days=float(window),
        rf_per_period=float(np.mean(rf_periods)),
        rounds=rounds,
    )


def audit_no_lookahead(ledger: BacktestLedger) -> dict:
    """Check every round's newest training-label date precedes its invested window."""
    violations = [
        {"invest_start": str(r.invest_start), "max_label_date": str(r.max_label_date)}
        for r in ledger.rounds
        if not r.max_label_date < r.invest_start
    ]
    return {"ok": not violations, "rounds": len(ledger.rounds), "violations": violations}


def run_contrarian(panel: ReturnPanel, n_select: int = 5) -> BacktestLedger:
    """Weekly mean-reversion baseline: equal-weight the n_select factors with
    the lowest cumulative return over the previous calendar week."""
    iso = [d.isocalendar()[:2] for d in panel.dates.astype(object)]
    weeks = []
    for row, key in enumerate(iso):
        if weeks and weeks[-1][0] == key:
            weeks[-1][1].append(row)
        else:
            weeks.append((key, [row]))
    if len(weeks) < 2:
        raise InsufficientData("contrarian strategy needs at least 2 weeks of data")

    n = panel.universe.n_factors
    n_select = min(n_select, n)
    factors = panel.factor_matrix()
    rf = panel.riskfree_returns()
    per_returns = {"contrarian": []}
    per_weights = {"contrarian": []}
    dates = []
    week_lengths = []
    rf_periods = []
    for j in range(1, len(weeks)):
        prev_rows = weeks[j - 1][1]
        rows = weeks[j][1]
        ranking = np.argsort(cumulative_return(factors[prev_rows]), kind="stable")
        chosen = np.sort(ranking[:n_select])
        w = np.zeros(n)
        w[chosen] = 1.0 / n_select
        period = cumulative_return(factors[rows])
        per_weights["contrarian"].append(WeightVector(w, "contrarian", constrained=True))
        per_returns["contrarian"].append(float(w @ period))
        dates.append(panel.dates[rows[0]])
        week_lengths.append(len(rows))
        rf_periods.append(float(np.prod(1.0 + rf[rows]) - 1.0))

    return _assemble_ledger(
        dates,
        per_returns,
        per_weights,
        period_days=float(np.mean(week_lengths)),
        rf_per_period=float(np.mean(rf_periods)),
    )


def ledger_report(ledger: BacktestLedger) -> dict:
    """Cumulative return, annualised vol, max drawdown, and Sharpe per scheme."""
    out = {}
    annualiser = np.sqrt(252.0 / ledger.period_days)
    for scheme in ledger.schemes:
        rets = np.array(
            [r.realized_period_return for r in ledger.records if r.scheme == scheme]
        )
        wealth = ledger.cumulative_wealth[scheme]
        drawdown = float(np.max(1.0 - wealth / np.maximum.accumulate(wealth)))
        vol = float(rets.std(ddof=1)) if len(rets) > 1 else 0.0
        if vol > 0:
            sharpe = float((rets - ledger.rf_per_period).mean() / vol * annualiser)
        else:
            sharpe = None
        out[scheme] = {
            "cumulative_return": float(wealth[-1] - 1.0),
            "annualized_vol": vol * annualiser,
            "max_drawdown": drawdown,
            "sharpe": sharpe,
        }
    return out


def ledger_to_csv(ledger: BacktestLedger, path) -> None:
    """One row per record; floats at full precision so replay is bit-exact."""
    with open(path, "w", newline="") as fh:
        fh.write("date,scheme,period_return,wealth,view_factor,view_q,weights\n")
        counters = {s: 0 for s in ledger.schemes}
        for rec in ledger.records:
            counters[rec.scheme] += 1
            wealth = ledger.cumulative_wealth[rec.scheme][counters[rec.scheme]]
            vf = "" if rec.view is None else str(rec.view.factor)
            vq = "" if rec.view is None else repr(rec.view.q)
            joined = "|".join(repr(float(v)) for v in rec.weights.weights)
            fh.write(
                f"{rec.date},{rec.scheme},{rec.realized_period_return!r},{wealth!r},{vf},{vq},{joined}\n"
            )


def replay_wealth_from_csv(path) -> dict[str, np.ndarray]:
    """Rebuild each scheme's cumulative wealth from a serialized ledger."""
    returns: dict[str, list[float]] = {}
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        idx = {name: i for i, name in enumerate(header)}
        for line in fh:
            parts = line.rstrip("\n").split(",")
            scheme = parts[idx["scheme"]]
            returns.setdefault(scheme, []).append(float(parts[idx["period_return"]]))
    return {
        scheme: np.concatenate([[1.0], np.cumprod(1.0 + np.array(vals))])
        for scheme, vals in returns.items()
    }


def ledger_to_json(ledger: BacktestLedger, path) -> None:
    payload = {
        "schemes": list(ledger.schemes),
        "period_days": ledger.period_days,
        "rf_per_period": ledger.rf_per_period,
        "rounds": [
            {
                "train_start": str(r.train_start),
                "train_end": str(r.train_end),
                "max_label_date": str(r.max_label_date),
                "invest_start": str(r.invest_start),
                "invest_end": str(r.invest_end),
                "view": {"date": str(r.invest_start), "factor": r.view_factor, "q": r.view_q},
            }
            for r in ledger.rounds
        ],
        "records": [
            {
                "date": str(rec.date),
                "scheme": rec.scheme,
                "period_return": rec.realized_period_return,
                "weights": [float(v) for v in rec.weights.weights],
                "view": None
                if rec.view is None
                else {"date": str(rec.date), "factor": rec.view.factor, "q": rec.view.q},
            }
            for rec in ledger.records
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
