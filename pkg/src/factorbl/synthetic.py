"""Seeded synthetic market data for demos, tests, and CLI fixtures.

Returns come from a one-factor market model with per-series drifts, betas,
and idiosyncratic noise, so the generated panel has realistic cross-factor
correlation. Everything is a pure function of (universe, n_days, seed).
"""

from __future__ import annotations

import numpy as np

from .marketdata import (
    DEFAULT_MARKET_CAPS,
    FactorUniverse,
    ReturnPanel,
    default_universe,
)

START_DATE = "2020-04-01"


def trading_dates(n_days: int, start: str = START_DATE) -> np.ndarray:
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    return np.busday_offset(first, np.arange(n_days))


def make_panel(
    universe: FactorUniverse | None = None,
    n_days: int = 800,
    seed: int = 42,
    start: str = START_DATE,
    market_drift: float = 0.0009,
) -> ReturnPanel:
    """Generate an aligned return panel directly (no price detour)."""
    universe = universe or default_universe()
    rng = np.random.default_rng(seed)
    n_series = len(universe.entries)
    market = market_drift + 0.010 * rng.standard_normal(n_days)

    returns = np.empty((n_days, n_series))
    for col, entry in enumerate(universe.entries):
        if entry.role == "RiskFree":
            level = 0.00008 + 0.00004 * np.abs(rng.standard_normal(n_days))
            returns[:, col] = level
        elif entry.role == "Benchmark":
            returns[:, col] = market + 0.001 * rng.standard_normal(n_days)
        else:
            beta = rng.uniform(-0.3, 1.2)
            drift = rng.uniform(-0.0002, 0.0008)
            idio = rng.uniform(0.004, 0.015)
            returns[:, col] = drift + beta * market + idio * rng.standard_normal(n_days)
    np.clip(returns, -0.95, None, out=returns)
    return ReturnPanel(trading_dates(n_days, start), returns, universe)


def write_price_csv(
    path,
    universe: FactorUniverse | None = None,
    n_days: int = 800,
    seed: int = 42,
    start: str = START_DATE,
) -> str:
    """Write an adjusted-close price CSV (plus an annualised-rate column for
    the risk-free ticker) that loads back into roughly the same panel."""
    universe = universe or default_universe()
    panel = make_panel(universe, n_days, seed, start)
    rf_col = universe.column_of(universe.riskfree.variable_name)

    dates = np.concatenate(
        [[np.busday_offset(panel.dates[0], -1)], panel.dates.astype("datetime64[D]")]
    )
    prices = np.empty((n_days + 1, len(universe.entries)))
    for col in range(len(universe.entries)):
        if col == rf_col:
            rates = panel.returns[:, col] * 100.0 * 252.0
            prices[1:, col] = rates
            prices[0, col] = rates[0]
        else:
            prices[0, col] = 100.0
            prices[1:, col] = 100.0 * np.cumprod(1.0 + panel.returns[:, col])

    with open(path, "w", newline="\n") as fh:
        fh.write("date," + ",".join(e.ticker for e in universe.entries) + "\n")
        for i, date in enumerate(dates):
            fh.write(f"{date}," + ",".join(repr(float(v)) for v in prices[i]) + "\n")
    return str(path)


def write_cap_csv(path, universe: FactorUniverse | None = None) -> str:
    """Write the built-in static market-cap table as variable_name,weight rows."""
    universe = universe or default_universe()
    with open(path, "w", newline="\n") as fh:
        fh.write("variable_name,weight\n")
        for name in universe.factor_names:
            fh.write(f"{name},{DEFAULT_MARKET_CAPS.get(name, 0.05)!r}\n")
    return str(path)
