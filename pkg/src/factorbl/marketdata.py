"""Price/return panel loading, alignment, and summary statistics.

The engine works on a panel of daily simple returns for a factor universe:
20 ETF-proxied factors plus one benchmark and one risk-free rate series.
Prices are turned into returns on load; the risk-free series is quoted as
an annualised percent rate and converted to a daily simple rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import BadInput, DegenerateSeries, InsufficientData, UniverseMismatch

TRADING_DAYS_PER_YEAR = 252

ASSET_CLASSES = (
    "EquityUS",
    "EquityChina",
    "BondUS",
    "BondChina",
    "Commodity",
    "RealEstate",
    "Volatility",
    "Rate",
)
ROLES = ("Factor", "Benchmark", "RiskFree")

# ticker, variable_name, asset_class, role
_DEFAULT_UNIVERSE = (
    ("SPY", "sp500", "EquityUS", "Benchmark"),
    ("VUG", "us_growth", "EquityUS", "Factor"),
    ("VTV", "us_value", "EquityUS", "Factor"),
    ("SPHQ", "us_quality", "EquityUS", "Factor"),
    ("SPHD", "us_dividend", "EquityUS", "Factor"),
    ("IYW", "us_tech", "EquityUS", "Factor"),
    ("VB", "us_small", "EquityUS", "Factor"),
    ("MTUM", "us_momentum", "EquityUS", "Factor"),
    ("MCHI", "china_benchmark", "EquityChina", "Factor"),
    ("ECNS", "china_growth", "EquityChina", "Factor"),
    ("FXI", "china_value", "EquityChina", "Factor"),
    ("CQQQ", "china_tech", "EquityChina", "Factor"),
    ("PGJ", "china_quality", "EquityChina", "Factor"),
    ("SCHO", "us_bond_shortterm", "BondUS", "Factor"),
    ("TLT", "us_bond_longterm", "BondUS", "Factor"),
    ("CBON", "china_bond", "BondChina", "Factor"),
    ("IEO", "commodity_oil", "Commodity", "Factor"),
    ("IAU", "commodity_gold", "Commodity", "Factor"),
    ("DBA", "commodity_agriculture", "Commodity", "Factor"),
    ("VNQ", "house_us", "RealEstate", "Factor"),
    ("VIXY", "vix", "Volatility", "Factor"),
    ("^IRX", "tbill", "Rate", "RiskFree"),
)

# Static reference market caps (billion USD fractions); caps cannot be pulled
# as a time series, so they enter the engine as a fixed input.
DEFAULT_MARKET_CAPS = {
    "us_growth": 0.279375,
    "us_value": 0.230441,
    "us_quality": 0.008476,
    "us_dividend": 0.005083,
    "us_tech": 0.019940,
    "us_small": 0.192782,
    "us_momentum": 0.014388,
    "china_benchmark": 0.011964,
    "china_growth": 0.000094,
    "china_value": 0.007976,
    "china_tech": 0.001290,
    "china_quality": 0.000277,
    "us_bond_shortterm": 0.022551,
    "us_bond_longterm": 0.062102,
    "china_bond": 0.000062,
    "commodity_oil": 0.000963,
    "commodity_gold": 0.043132,
    "commodity_agriculture": 0.001313,
    "house_us": 0.097431,
    "vix": 0.000360,
}


@dataclass(frozen=True)
class UniverseEntry:
    factor_id: int | None  # 0..N-1 for Factor entries, None for benchmark/risk-free
    ticker: str
    variable_name: str
    asset_class: str
    role: str


@dataclass(frozen=True)
class FactorUniverse:
    """Ordered list of series making up the panel: N factors + benchmark + risk-free."""

    entries: tuple[UniverseEntry, ...]

    def __post_init__(self):
        roles = [e.role for e in self.entries]
        if roles.count("Benchmark") != 1 or roles.count("RiskFree") != 1:
            raise BadInput("universe needs exactly one Benchmark and one RiskFree entry")
        for e in self.entries:
            if e.role not in ROLES:
                raise BadInput(f"unknown role {e.role!r}")
            if e.asset_class not in ASSET_CLASSES:
                raise BadInput(f"unknown asset class {e.asset_class!r}")
        ids = [e.factor_id for e in self.entries if e.role == "Factor"]
        if sorted(ids) != list(range(len(ids))):
            raise BadInput("factor ids must be unique and contiguous from 0")
        names = [e.variable_name for e in self.entries]
        if len(set(names)) != len(names):
            raise BadInput("duplicate variable names in universe")

    @property
    def n_factors(self) -> int:
        return sum(1 for e in self.entries if e.role == "Factor")

    @property
    def factor_names(self) -> tuple[str, ...]:
        factors = sorted(
            (e for e in self.entries if e.role == "Factor"), key=lambda e: e.factor_id
        )
        return tuple(e.variable_name for e in factors)

    @property
    def benchmark(self) -> UniverseEntry:
        return next(e for e in self.entries if e.role == "Benchmark")

    @property
    def riskfree(self) -> UniverseEntry:
        return next(e for e in self.entries if e.role == "RiskFree")

    def column_of(self, variable_name: str) -> int:
        for i, e in enumerate(self.entries):
            if e.variable_name == variable_name:
                return i
        raise UniverseMismatch(f"unknown series {variable_name!r}")

    def factor_columns(self) -> np.ndarray:
        """Panel column index per factor, ordered by factor_id."""
        cols = {e.factor_id: i for i, e in enumerate(self.entries) if e.role == "Factor"}
        return np.array([cols[k] for k in range(self.n_factors)])


def default_universe() -> FactorUniverse:
    entries = []
    next_id = 0
    for ticker, name, klass, role in _DEFAULT_UNIVERSE:
        fid = None
        if role == "Factor":
            fid = next_id
            next_id += 1
        entries.append(UniverseEntry(fid, ticker, name, klass, role))
    return FactorUniverse(tuple(entries))


def load_universe(path) -> FactorUniverse:
    """Read a universe CSV with columns id,ticker,variable_name,asset_class,role."""
    df = pd.read_csv(path, dtype=str)
    required = {"id", "ticker", "variable_name", "asset_class", "role"}
    if not required.issubset(df.columns):
        raise BadInput(f"universe file needs columns {sorted(required)}")
    entries = []
    next_id = 0
    for _, row in df.iterrows():
        fid = None
        if row["role"] == "Factor":
            fid = next_id
            next_id += 1
        entries.append(
            UniverseEntry(fid, row["ticker"], row["variable_name"], row["asset_class"], row["role"])
        )
    return FactorUniverse(tuple(entries))


def save_universe(universe: FactorUniverse, path) -> None:
    rows = [
        {
            "id": i,
            "ticker": e.ticker,
            "variable_name": e.variable_name,
            "asset_class": e.asset_class,
            "role": e.role,
        }
        for i, e in enumerate(universe.entries)
    ]
    pd.DataFrame(rows).to_csv(path, index=False)


@dataclass(frozen=True)
class ReturnPanel:
    """Aligned daily simple returns, one column per universe entry.

    The risk-free column holds a daily rate, not a price return. All columns
    share the same strictly increasing date support and contain no gaps.
    """

    dates: np.ndarray  # datetime64[D], length T
    returns: np.ndarray  # T x M, column order follows universe.entries
    universe: FactorUniverse

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        returns = np.asarray(self.returns, dtype=float)
        if returns.ndim != 2 or returns.shape != (len(dates), len(self.universe.entries)):
            raise BadInput("returns must be T x M with M = number of universe entries")
        if len(dates) < 2:
            raise InsufficientData("need at least 2 return rows")
        if np.any(np.diff(dates).astype(int) <= 0):
            raise BadInput("dates must be strictly increasing")
        if not np.all(np.isfinite(returns)):
            raise BadInput("panel contains missing or non-finite returns")
        if np.any(returns <= -1.0):
            raise BadInput("simple returns must be greater than -1")
        dates.setflags(write=False)
        returns.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "returns", returns)

    @property
    def n_days(self) -> int:
        return len(self.dates)

    def factor_matrix(self) -> np.ndarray:
        """T x N factor returns ordered by factor_id."""
        return self.returns[:, self.universe.factor_columns()]

    def benchmark_returns(self) -> np.ndarray:
        return self.returns[:, self.universe.column_of(self.universe.benchmark.variable_name)]

    def riskfree_returns(self) -> np.ndarray:
        return self.returns[:, self.universe.column_of(self.universe.riskfree.variable_name)]

    def window_rows(self, window=None) -> tuple[int, int]:
        """Resolve an inclusive (start, end) date pair to a half-open row range."""
        if window is None:
            return 0, self.n_days
        start, end = window
        lo = 0 if start is None else int(np.searchsorted(self.dates, np.datetime64(start, "D")))
        hi = (
            self.n_days
            if end is None
            else int(np.searchsorted(self.dates, np.datetime64(end, "D"), side="right"))
        )
        if hi <= lo:
            raise InsufficientData(f"window {window!r} selects no rows")
        return lo, hi

    def slice_rows(self, lo: int, hi: int) -> "ReturnPanel":
        return ReturnPanel(self.dates[lo:hi], self.returns[lo:hi], self.universe)

    def save_returns(self, path) -> None:
        """Write the return panel as CSV with full float precision (round-trips bit-exactly)."""
        names = [e.variable_name for e in self.universe.entries]
        with open(path, "w", newline="") as fh:
            fh.write("date," + ",".join(names) + "\n")
            for i in range(self.n_days):
                row = ",".join(repr(float(v)) for v in self.returns[i])
                fh.write(f"{self.dates[i]},{row}\n")


def load_returns(path, universe: FactorUniverse | None = None) -> ReturnPanel:
    """Reload a panel written by ReturnPanel.save_returns."""
    universe = universe or default_universe()
    df = pd.read_csv(path, float_precision="round_trip")
    if "date" not in df.columns:
        raise BadInput("returns file needs a 'date' column")
    for e in universe.entries:
        if e.variable_name not in df.columns:
            raise UniverseMismatch(f"returns file is missing column {e.variable_name!r}")
    dates = df["date"].to_numpy(dtype="datetime64[D]")
    values = df[[e.variable_name for e in universe.entries]].to_numpy(dtype=float)
    return ReturnPanel(dates, values, universe)


def load_prices(path, universe: FactorUniverse | None = None) -> ReturnPanel:
    """Load an adjusted-close price CSV and convert it to a return panel.

    Expected header: ``date,<ticker>,...`` with ISO-8601 dates. Rows with a
    missing value in any universe ticker are dropped before differencing
    (inner join; nothing is forward-filled). Price columns become simple
    returns P_t/P_{t-1} - 1; the risk-free ticker is an annualised percent
    rate and is divided by 100 * 252 instead.
    """
    universe = universe or default_universe()
    df = pd.read_csv(path, float_precision="round_trip")
    if "date" not in df.columns:
        raise BadInput("price file needs a 'date' column")
    for e in universe.entries:
        if e.ticker not in df.columns:
            raise UniverseMismatch(f"price file is missing ticker column {e.ticker!r}")

    dates_raw = pd.to_datetime(df["date"], errors="coerce")
    if dates_raw.isna().any():
        raise BadInput("unparseable dates in price file")
    if not dates_raw.is_monotonic_increasing or dates_raw.duplicated().any():
        raise BadInput("price dates must be strictly increasing")

    tickers = [e.ticker for e in universe.entries]
    values = df[tickers].apply(pd.to_numeric, errors="coerce")
    keep = ~values.isna().any(axis=1)
    values = values[keep].to_numpy(dtype=float)
    dates = dates_raw[keep].to_numpy(dtype="datetime64[D]")
    if values.shape[0] < 3:
        raise InsufficientData("need at least 3 complete price rows")

    rf_col = tickers.index(universe.riskfree.ticker)
    out = np.empty((values.shape[0] - 1, values.shape[1]))
    for j in range(values.shape[1]):
        if j == rf_col:
            out[:, j] = values[1:, j] / (100.0 * TRADING_DAYS_PER_YEAR)
        else:
            prices = values[:, j]
            if np.any(prices <= 0):
                raise BadInput(f"non-positive prices in column {tickers[j]!r}")
            out[:, j] = prices[1:] / prices[:-1] - 1.0
    return ReturnPanel(dates[1:], out, universe)


def summary_stats(panel: ReturnPanel) -> pd.DataFrame:
    """Per-series count/mean/std/min/quartiles/max over all rows."""
    names = [e.variable_name for e in panel.universe.entries]
    frame = pd.DataFrame(panel.returns, columns=names)
    return frame.describe().T


def correlation_matrix(panel: ReturnPanel) -> np.ndarray:
    """Correlation of the N factor return series (unit diagonal, symmetric)."""
    factors = panel.factor_matrix()
    stds = factors.std(axis=0, ddof=1)
    if np.any(stds < 1e-14):  # constant up to float rounding
        bad = panel.universe.factor_names[int(np.argmin(stds))]
        raise DegenerateSeries(f"factor {bad!r} has zero variance")
    corr = np.corrcoef(factors, rowvar=False)
    corr = np.clip(corr, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return 0.5 * (corr + corr.T)


@dataclass(frozen=True)
class MarketCapWeights:
    """Static market-cap fractions per factor, normalised to sum to one."""

    weights: np.ndarray  # length N, factor_id order

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0):
            raise BadInput("market-cap weights must be non-negative")
        total = w.sum()
        if total <= 0:
            raise BadInput("market-cap weights must have positive sum")
        w = w / total
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


def load_market_caps(path, universe: FactorUniverse | None = None) -> MarketCapWeights:
    """Read (variable_name, weight) pairs covering every factor; normalise to sum 1."""
    universe = universe or default_universe()
    df = pd.read_csv(path, float_precision="round_trip")
    if not {"variable_name", "weight"}.issubset(df.columns):
        raise BadInput("market-cap file needs columns variable_name,weight")
    caps = dict(zip(df["variable_name"], pd.to_numeric(df["weight"], errors="coerce")))
    weights = np.empty(universe.n_factors)
    for name in universe.factor_names:
        if name not in caps or not np.isfinite(caps[name]):
            raise UniverseMismatch(f"market-cap file is missing factor {name!r}")
    for i, name in enumerate(universe.factor_names):
        if caps[name] < 0:
            raise BadInput(f"negative market cap for {name!r}")
        weights[i] = caps[name]
    return MarketCapWeights(weights)


def default_market_caps(universe: FactorUniverse | None = None) -> MarketCapWeights:
    """The built-in static cap table for the default universe."""
    universe = universe or default_universe()
    try:
        weights = [DEFAULT_MARKET_CAPS[name] for name in universe.factor_names]
    except KeyError as exc:
        raise UniverseMismatch(f"no default cap for factor {exc.args[0]!r}") from exc
    return MarketCapWeights(np.array(weights))
