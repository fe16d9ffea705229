import numpy as np
import pytest

from factorbl.marketdata import FactorUniverse, ReturnPanel, UniverseEntry
from factorbl.synthetic import make_panel, trading_dates


def make_universe(n_factors: int) -> FactorUniverse:
    entries = [UniverseEntry(None, "BENCH", "bench", "EquityUS", "Benchmark")]
    for i in range(n_factors):
        entries.append(UniverseEntry(i, f"T{i}", f"f{i}", "EquityUS", "Factor"))
    entries.append(UniverseEntry(None, "^RF", "rf", "Rate", "RiskFree"))
    return FactorUniverse(tuple(entries))


def panel_from_returns(factor_returns, bench=None, rf=None) -> ReturnPanel:
    """Assemble a panel from a T x N factor matrix plus optional bench/rf columns."""
    factor_returns = np.asarray(factor_returns, dtype=float)
    t, n = factor_returns.shape
    universe = make_universe(n)
    bench = np.full(t, 0.0005) if bench is None else np.asarray(bench, dtype=float)
    rf = np.zeros(t) if rf is None else np.asarray(rf, dtype=float)
    returns = np.column_stack([bench, factor_returns, rf])
    return ReturnPanel(trading_dates(t), returns, universe)


def random_spd(rng, n, jitter=0.1):
    a = rng.standard_normal((n, n))
    sigma = a @ a.T / n
    return sigma + jitter * np.eye(n)


@pytest.fixture(scope="session")
def default_panel():
    return make_panel(n_days=400, seed=0)


@pytest.fixture
def small_panel():
    rng = np.random.default_rng(12)
    rets = 0.001 + 0.01 * rng.standard_normal((120, 4))
    bench = 0.0008 + 0.009 * rng.standard_normal(120)
    rf = np.full(120, 0.0001)
    return panel_from_returns(rets, bench, rf)
