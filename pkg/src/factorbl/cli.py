"""Command-line surface: stats | allocate | bl | backtest | sweep.

Each subcommand reads a price CSV, runs one pipeline, and writes artifacts
under the output directory: tables/*.csv, charts/*.svg, and run_meta.json.
Outputs are a pure function of (config, seed, data); run_meta.json records
everything needed to reproduce them.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .allocate import (
    equal_weights,
    implied_beta_weights,
    market_cap_weights,
    solve_constrained,
)
from .backtest import (
    audit_no_lookahead,
    ledger_report,
    ledger_to_csv,
    ledger_to_json,
    run_contrarian,
    run_dynamic_bl,
    run_static,
)
from .blacklitterman import (
    absolute_view,
    bl_pipeline,
    build_views,
    empty_views,
    global_view,
    market_risk_aversion,
    reference_views,
    relative_view,
    scenario_aversion,
)
from .covariance import mean_excess, sample_cov, shrunk_cov
from .errors import (
    BadInput,
    DegenerateSeries,
    DegenerateTangency,
    EmptyChart,
    Error,
    InsufficientData,
    IoError,
    NonPositiveAversion,
    SingularCovariance,
    UniverseMismatch,
)
from .marketdata import (
    default_market_caps,
    default_universe,
    load_market_caps,
    load_prices,
    load_universe,
    summary_stats,
    correlation_matrix,
)
from .report import ChartSpec, emit_bl_table, format_percent, render_chart, matrix_to_csv, weights_table_csv
from .robustness import shrinkage_impact, volatility_sweep
from .viewgen import ViewModelConfig

EXIT_INTERNAL = 1
EXIT_USER = 2
EXIT_DATA = 3

_DATA_ERRORS = (
    InsufficientData,
    DegenerateSeries,
    SingularCovariance,
    DegenerateTangency,
    NonPositiveAversion,
)

ALLOCATE_COLUMNS = ("market_cap", "equal", "implied_beta", "gmv", "markowitz", "max_sharpe", "black_litterman")
SCENARIO_ORDER = ("empirical", "kelly", "average", "averse")

_MODEL_KEYS = ("sequence_length", "window", "train_span", "hidden_size", "epochs", "learning_rate")


@dataclass
class RunConfig:
    prices: str | None = None
    caps: str | None = None
    views: str | None = None
    universe: str | None = None
    aversion: str = "empirical"
    estimator: str = "sample"
    seed: int = 42
    out: str = "reports/run"
    model: dict = field(default_factory=dict)  # ViewModelConfig overrides


def _read_config_file(path) -> dict:
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BadInput(f"config line is not key = value: {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def _build_config(args) -> RunConfig:
    cfg = RunConfig()
    file_values = _read_config_file(args.config) if args.config else {}
    key_map = {"lambda": "aversion"}
    for key, value in file_values.items():
        key = key_map.get(key, key)
        if key in _MODEL_KEYS:
            cfg.model[key] = float(value) if key == "learning_rate" else int(value)
        elif key == "seed":
            cfg.seed = int(value)
        elif hasattr(cfg, key):
            setattr(cfg, key, value)
        else:
            raise BadInput(f"unknown config key {key!r}")
    for key in ("prices", "caps", "views", "universe", "estimator", "out"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if getattr(args, "aversion", None) is not None:
        cfg.aversion = args.aversion
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if cfg.estimator not in ("sample", "shrunk"):
        raise BadInput(f"estimator must be sample or shrunk, got {cfg.estimator!r}")
    return cfg


def _require_file(path, what: str) -> Path:
    if path is None:
        raise BadInput(f"no {what} file given (use --{what} or a config file)")
    p = Path(path)
    if not p.exists():
        raise BadInput(f"{what} file not found: {p}")
    return p


def _load_inputs(cfg: RunConfig):
    universe = load_universe(_require_file(cfg.universe, "universe")) if cfg.universe else default_universe()
    panel = load_prices(_require_file(cfg.prices, "prices"), universe)
    if cfg.caps:
        caps = load_market_caps(_require_file(cfg.caps, "caps"), universe)
        caps_source = str(cfg.caps)
    else:
        caps = default_market_caps(universe)
        caps_source = "builtin-default"
    return universe, panel, caps, caps_source


def _load_views(cfg: RunConfig, universe, sigma, tau: float = 1.0):
    """View file (JSON list of specs) if given, else the stock three-view example."""
    if cfg.views:
        raw = json.loads(_require_file(cfg.views, "views").read_text())
        specs = []
        for item in raw:
            kind = item.get("type", "absolute")
            omega = item.get("omega")
            if kind == "absolute":
                specs.append(absolute_view(item["factor"], item["q"], omega))
            elif kind == "relative":
                specs.append(relative_view(item.get("longs", {}), item.get("shorts", {}), item["q"], omega))
            elif kind == "global":
                specs.append(global_view(item.get("longs", {}), item.get("shorts", {}), item["q"], omega))
            else:
                raise BadInput(f"unknown view type {kind!r}")
        return build_views(specs, universe, tau=tau, sigma=sigma), str(cfg.views)
    try:
        return reference_views(universe, tau=tau, sigma=sigma), "builtin-reference"
    except UniverseMismatch:
        return empty_views(universe.n_factors, tau), "none"


def _out_dirs(cfg: RunConfig) -> tuple[Path, Path, Path]:
    root = Path(cfg.out)
    tables = root / "tables"
    charts = root / "charts"
    tables.mkdir(parents=True, exist_ok=True)
    charts.mkdir(parents=True, exist_ok=True)
    return root, tables, charts


def _write_meta(root: Path, cfg: RunConfig, command: str, extra: dict | None = None) -> None:
    meta = {
        "command": command,
        "version": __version__,
        "seed": cfg.seed,
        "estimator": cfg.estimator,
        "lambda": cfg.aversion,
        "prices": str(cfg.prices),
        "caps": str(cfg.caps) if cfg.caps else "builtin-default",
        "views": str(cfg.views) if cfg.views else "builtin-reference",
        "universe": str(cfg.universe) if cfg.universe else "builtin-default",
        "out": str(cfg.out),
        "model": cfg.model,
    }
    if extra:
        meta.update(extra)
    with open(root / "run_meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _estimate(panel, estimator, window=None):
    return sample_cov(panel, window) if estimator == "sample" else shrunk_cov(panel, window)


def cmd_stats(cfg: RunConfig) -> int:
    universe, panel, _, _ = _load_inputs(cfg)
    root, tables, charts = _out_dirs(cfg)

    summary_stats(panel).to_csv(tables / "summary_stats.csv")

    corr = correlation_matrix(panel)
    names = list(universe.factor_names)
    matrix_to_csv(corr, names, tables / "correlation.csv")
    render_chart(
        ChartSpec(
            "heatmap",
            {name: corr[i] for i, name in enumerate(names)},
            str(charts / "correlation.svg"),
            title="Factor correlation",
            x_ticks=tuple(names),
        )
    )
    factors = panel.factor_matrix()
    wealth = np.cumprod(1.0 + factors, axis=0)
    render_chart(
        ChartSpec(
            "line",
            {name: wealth[:, i] for i, name in enumerate(names)},
            str(charts / "cumulative_returns.svg"),
            title="Cumulative return per factor",
            y_label="growth of 1",
        )
    )
    _write_meta(root, cfg, "stats", {"rows": panel.n_days})
    return 0


def cmd_allocate(cfg: RunConfig, schemes=None) -> int:
    universe, panel, caps, caps_source = _load_inputs(cfg)
    root, tables, _ = _out_dirs(cfg)
    requested = tuple(schemes) if schemes else ALLOCATE_COLUMNS
    unknown = [s for s in requested if s not in ALLOCATE_COLUMNS]
    if unknown:
        raise BadInput(f"unknown scheme(s): {', '.join(unknown)}")
    ordered = [s for s in ALLOCATE_COLUMNS if s in requested]

    sigma = _estimate(panel, cfg.estimator)
    moments = mean_excess(panel)
    lam_mkt = market_risk_aversion(panel)
    aversion = scenario_aversion(cfg.aversion, panel)

    columns = {}
    for scheme in ordered:
        if scheme == "market_cap":
            columns[scheme] = market_cap_weights(caps).weights
        elif scheme == "equal":
            columns[scheme] = equal_weights(universe.n_factors).weights
        elif scheme == "implied_beta":
            columns[scheme] = implied_beta_weights(sigma, panel).weights
        elif scheme == "gmv":
            columns[scheme] = solve_constrained("gmv", sigma, moments)[0].weights
        elif scheme == "markowitz":
            columns[scheme] = solve_constrained("markowitz", sigma, moments, aversion=2.0)[0].weights
        elif scheme == "max_sharpe":
            columns[scheme] = solve_constrained("max_sharpe", sigma, moments)[0].weights
        else:
            views, _ = _load_views(cfg, universe, sigma)
            result = bl_pipeline(market_cap_weights(caps), sigma, views, aversion, lam_mkt)
            columns[scheme] = result.posterior_weights.weights
    weights_table_csv(columns, universe.factor_names, tables / "weights_by_scheme.csv")
    _write_meta(root, cfg, "allocate", {"schemes": ordered, "caps_source": caps_source,
                                        "lambda_market": lam_mkt.value})
    return 0


def cmd_bl(cfg: RunConfig) -> int:
    universe, panel, caps, caps_source = _load_inputs(cfg)
    root, tables, _ = _out_dirs(cfg)
    sigma = _estimate(panel, cfg.estimator)
    lam_mkt = market_risk_aversion(panel)
    views, views_source = _load_views(cfg, universe, sigma)
    prior = market_cap_weights(caps)

    results = {}
    for scenario in SCENARIO_ORDER:
        aversion = lam_mkt if scenario == "empirical" else scenario_aversion(scenario)
        results[scenario] = bl_pipeline(prior, sigma, views, aversion, lam_mkt)
        emit_bl_table(results[scenario], prior, universe.factor_names, tables / f"bl_detail_{scenario}.csv")

    with open(tables / "bl_scenarios.csv", "w", newline="\n") as fh:
        fh.write("asset," + ",".join(SCENARIO_ORDER) + "\n")
        for i, name in enumerate(universe.factor_names):
            cells = ",".join(
                f'"{format_percent(results[s].posterior_weights.weights[i])}"' for s in SCENARIO_ORDER
            )
            fh.write(f"{name},{cells}\n")
    _write_meta(
        root,
        cfg,
        "bl",
        {
            "caps_source": caps_source,
            "views_source": views_source,
            "lambda_market": lam_mkt.value,
            "scenario_lambdas": {
                s: (lam_mkt.value if s == "empirical" else scenario_aversion(s).value)
                for s in SCENARIO_ORDER
            },
        },
    )
    return 0


def cmd_backtest(cfg: RunConfig, mode: str) -> int:
    universe, panel, caps, caps_source = _load_inputs(cfg)
    root, tables, charts = _out_dirs(cfg)

    extra: dict = {"mode": mode, "caps_source": caps_source}
    if mode == "static":
        sigma = _estimate(panel, cfg.estimator)
        views, views_source = _load_views(cfg, universe, sigma)
        aversion = scenario_aversion(cfg.aversion, panel)
        ledger = run_static(panel, views=views, aversion=aversion, caps=caps, estimator=cfg.estimator)
        extra["views_source"] = views_source
    elif mode == "dynamic":
        config = ViewModelConfig(seed=cfg.seed, **cfg.model)
        # "empirical" here means the per-round market-calibrated lambda
        aversion = None if cfg.aversion == "empirical" else scenario_aversion(cfg.aversion, panel)
        ledger = run_dynamic_bl(panel, config, aversion, estimator=cfg.estimator)
        audit = audit_no_lookahead(ledger)
        if not audit["ok"]:
            raise Error(f"look-ahead audit failed: {audit['violations']}")
        extra["lookahead_audit"] = audit
    elif mode == "contrarian":
        ledger = run_contrarian(panel)
    else:
        raise BadInput(f"unknown backtest mode {mode!r}")

    ledger_to_csv(ledger, tables / "ledger.csv")
    ledger_to_json(ledger, root / "ledger.json")
    render_chart(
        ChartSpec(
            "line",
            {scheme: ledger.cumulative_wealth[scheme] for scheme in ledger.schemes},
            str(charts / "cumulative_returns.svg"),
            title=f"{mode} backtest cumulative wealth",
            y_label="growth of 1",
        )
    )
    extra["report"] = ledger_report(ledger)
    _write_meta(root, cfg, "backtest", extra)
    return 0


def cmd_sweep(cfg: RunConfig) -> int:
    universe, panel, caps, caps_source = _load_inputs(cfg)
    root, tables, charts = _out_dirs(cfg)
    aversion = scenario_aversion(cfg.aversion, panel)
    names = list(universe.factor_names)

    extra: dict = {"caps_source": caps_source, "shrinkage_impact": shrinkage_impact(panel)}
    for estimator in ("sample", "shrunk"):
        sigma = _estimate(panel, estimator)
        moments = mean_excess(panel)
        views, views_source = _load_views(cfg, universe, sigma)

        def prior_fn(est):
            return solve_constrained("markowitz", est, moments, aversion=2.0)[0]

        sweep = volatility_sweep(prior_fn, sigma, views, aversion)
        for label, grid in (("prior", sweep.prior_weights), ("posterior", sweep.posterior_weights)):
            with open(tables / f"sweep_{label}_{estimator}.csv", "w", newline="\n") as fh:
                fh.write("multiplier," + ",".join(names) + "\n")
                for m, row in zip(sweep.multipliers, grid):
                    fh.write(repr(float(m)) + "," + ",".join(repr(float(v)) for v in row) + "\n")
        render_chart(
            ChartSpec(
                "stacked_area",
                {name: sweep.prior_weights[:, i] for i, name in enumerate(names)},
                str(charts / f"sweep_prior_{estimator}.svg"),
                title=f"Prior weights vs volatility multiplier ({estimator})",
                x_label="multiplier index",
            )
        )
        render_chart(
            ChartSpec(
                "line",
                {name: sweep.posterior_weights[:, i] for i, name in enumerate(names)},
                str(charts / f"sweep_posterior_{estimator}.svg"),
                title=f"Posterior weights vs volatility multiplier ({estimator})",
                x_label="multiplier index",
            )
        )
        extra["views_source"] = views_source
    _write_meta(root, cfg, "sweep", extra)
    return 0


def _make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="factorbl",
        description="Factor-portfolio construction, Black-Litterman updating, and backtests.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file; flags win")
    common.add_argument("--prices", help="price CSV: date,<ticker>,...")
    common.add_argument("--caps", help="market-cap CSV: variable_name,weight")
    common.add_argument("--views", help="JSON list of view specs")
    common.add_argument("--universe", help="universe CSV: id,ticker,variable_name,asset_class,role")
    common.add_argument(
        "--lambda",
        dest="aversion",
        help="risk aversion: kelly | average | averse | empirical | positive float",
    )
    common.add_argument("--estimator", choices=("sample", "shrunk"), help="covariance estimator")
    common.add_argument("--seed", type=int, help="seed for the view model (default 42)")
    common.add_argument("--out", help="output directory for tables/charts/run_meta.json")

    sub.add_parser("stats", parents=[common], help="summary stats, correlation, cumulative returns")
    p_alloc = sub.add_parser("allocate", parents=[common], help="weights per allocation scheme")
    p_alloc.add_argument("--schemes", help="comma-separated subset (default: all)")
    sub.add_parser("bl", parents=[common], help="static Black-Litterman under the four aversion scenarios")
    p_back = sub.add_parser("backtest", parents=[common], help="run a backtest and persist its ledger")
    p_back.add_argument("--mode", choices=("static", "dynamic", "contrarian"), default="static")
    sub.add_parser("sweep", parents=[common], help="volatility-multiplier sweep of prior and posterior")
    return parser


def main(argv=None) -> int:
    args = _make_parser().parse_args(argv)
    try:
        cfg = _build_config(args)
        if args.command == "stats":
            return cmd_stats(cfg)
        if args.command == "allocate":
            schemes = args.schemes.split(",") if args.schemes else None
            return cmd_allocate(cfg, schemes)
        if args.command == "bl":
            return cmd_bl(cfg)
        if args.command == "backtest":
            return cmd_backtest(cfg, args.mode)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        raise BadInput(f"unknown command {args.command!r}")
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (BadInput, IoError, EmptyChart, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Error as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
