"""Factor-portfolio construction with Black-Litterman updating and rolling backtests."""

from .allocate import (
    SolverReport,
    WeightVector,
    equal_weights,
    gmv_closed_form,
    implied_beta_weights,
    market_cap_weights,
    markowitz_closed_form,
    max_sharpe_closed_form,
    project_capped_simplex,
    solve_constrained,
)
from .backtest import (
    BacktestLedger,
    RebalanceRecord,
    audit_no_lookahead,
    ledger_report,
    ledger_to_csv,
    ledger_to_json,
    replay_wealth_from_csv,
    run_contrarian,
    run_dynamic_bl,
    run_static,
)
from .blacklitterman import (
    BLResult,
    RiskAversion,
    ViewSet,
    ViewSpec,
    absolute_view,
    bl_pipeline,
    build_views,
    default_omega,
    empty_views,
    equilibrium_prior,
    global_view,
    market_risk_aversion,
    posterior_returns,
    posterior_weights,
    reference_views,
    relative_view,
    scenario_aversion,
)
from .covariance import CovEstimate, MomentEstimate, cov_from_matrix, mean_excess, sample_cov, shrunk_cov
from .errors import (
    BadInput,
    DegenerateSeries,
    DegenerateTangency,
    EmptyChart,
    Error,
    InsufficientData,
    IoError,
    MissingInput,
    NonPositiveAversion,
    SingularCovariance,
    UniverseMismatch,
)
from .marketdata import (
    FactorUniverse,
    MarketCapWeights,
    ReturnPanel,
    correlation_matrix,
    default_market_caps,
    default_universe,
    load_market_caps,
    load_prices,
    load_returns,
    load_universe,
    summary_stats,
)
from .report import ChartSpec, emit_bl_table, format_percent, parse_percent, render_chart
from .robustness import (
    VolSweepResult,
    WeightPath,
    default_multipliers,
    shrinkage_impact,
    volatility_sweep,
    weight_paths,
)
from .viewgen import (
    GeneratedView,
    SequenceModel,
    SequenceSample,
    ViewModelConfig,
    build_dataset,
    momentum_oracle_view,
    predict_view,
    train_sequence_model,
    view_to_viewset,
)

__version__ = "0.1.0"
