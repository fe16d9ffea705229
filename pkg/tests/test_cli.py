import json
from pathlib import Path

import numpy as np
import pytest

from factorbl.cli import main
from factorbl.synthetic import write_cap_csv, write_price_csv


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    write_price_csv(root / "prices.csv", n_days=160, seed=4)
    write_cap_csv(root / "caps.csv")
    return root


def run_cli(*args):
    return main([str(a) for a in args])


def artifact_bytes(out_dir):
    return {
        str(p.relative_to(out_dir)): p.read_bytes()
        for p in sorted(Path(out_dir).rglob("*"))
        if p.is_file()
    }


def test_help_lists_flags(capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli("stats", "--help")
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for flag in ("--config", "--prices", "--caps", "--views", "--universe",
                 "--lambda", "--estimator", "--seed", "--out"):
        assert flag in text


def test_stats_writes_three_artifacts(data_dir, tmp_path):
    out = tmp_path / "out"
    assert run_cli("stats", "--prices", data_dir / "prices.csv", "--out", out) == 0
    assert (out / "tables" / "summary_stats.csv").exists()
    assert (out / "charts" / "correlation.svg").exists()
    assert (out / "charts" / "cumulative_returns.svg").exists()
    assert json.loads((out / "run_meta.json").read_text())["command"] == "stats"


def test_stats_missing_prices_exit_2(tmp_path, capsys):
    code = run_cli("stats", "--prices", tmp_path / "nope.csv", "--out", tmp_path / "o")
    assert code == 2
    assert "nope.csv" in capsys.readouterr().err


def test_stats_deterministic_rerun(data_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_cli("stats", "--prices", data_dir / "prices.csv", "--out", a)
    run_cli("stats", "--prices", data_dir / "prices.csv", "--out", b)
    bytes_a = artifact_bytes(a)
    bytes_b = artifact_bytes(b)
    assert set(bytes_a) == set(bytes_b)
    for key in bytes_a:
        if key == "run_meta.json":
            continue  # paths differ by design
        assert bytes_a[key] == bytes_b[key], key


def test_allocate_column_order_and_defaults(data_dir, tmp_path):
    out = tmp_path / "out"
    assert run_cli(
        "allocate", "--prices", data_dir / "prices.csv", "--caps", data_dir / "caps.csv",
        "--out", out,
    ) == 0
    header = (out / "tables" / "weights_by_scheme.csv").read_text().splitlines()[0]
    assert header == "asset,market_cap,equal,implied_beta,gmv,markowitz,max_sharpe,black_litterman"
    rows = (out / "tables" / "weights_by_scheme.csv").read_text().splitlines()[1:]
    assert len(rows) == 20
    equal_col = [float(r.split(",")[2]) for r in rows]
    assert np.allclose(equal_col, 0.05)


def test_allocate_scheme_subset_and_unknown(data_dir, tmp_path, capsys):
    out = tmp_path / "sub"
    assert run_cli(
        "allocate", "--prices", data_dir / "prices.csv", "--out", out, "--schemes", "equal,gmv"
    ) == 0
    header = (out / "tables" / "weights_by_scheme.csv").read_text().splitlines()[0]
    assert header == "asset,equal,gmv"
    assert run_cli(
        "allocate", "--prices", data_dir / "prices.csv", "--out", tmp_path / "bad",
        "--schemes", "equal,nonsense",
    ) == 2


def test_bl_scenario_table(data_dir, tmp_path):
    out = tmp_path / "bl"
    assert run_cli(
        "bl", "--prices", data_dir / "prices.csv", "--caps", data_dir / "caps.csv", "--out", out
    ) == 0
    table = (out / "tables" / "bl_scenarios.csv").read_text().splitlines()
    assert table[0] == "asset,empirical,kelly,average,averse"
    assert len(table) == 21
    for scenario in ("empirical", "kelly", "average", "averse"):
        assert (out / "tables" / f"bl_detail_{scenario}.csv").exists()
    meta = json.loads((out / "run_meta.json").read_text())
    assert meta["scenario_lambdas"]["kelly"] == 0.005


def test_backtest_static_and_contrarian(data_dir, tmp_path):
    for mode in ("static", "contrarian"):
        out = tmp_path / mode
        assert run_cli(
            "backtest", "--mode", mode, "--prices", data_dir / "prices.csv",
            "--caps", data_dir / "caps.csv", "--out", out,
        ) == 0
        assert (out / "tables" / "ledger.csv").exists()
        assert (out / "ledger.json").exists()
        assert (out / "charts" / "cumulative_returns.svg").exists()
        meta = json.loads((out / "run_meta.json").read_text())
        assert meta["mode"] == mode and "report" in meta


def write_config(path, data_dir, extra=""):
    # 30-day estimation windows need the shrunk estimator to stay invertible
    # against the 20-factor universe
    path.write_text(
        f"prices = {data_dir / 'prices.csv'}\n"
        f"caps = {data_dir / 'caps.csv'}\n"
        "estimator = shrunk\n"
        "sequence_length = 30\n"
        "window = 5\n"
        "train_span = 120\n"
        "hidden_size = 6\n"
        "epochs = 10\n"
        "learning_rate = 0.1\n" + extra
    )
    return path


def test_backtest_dynamic_with_config(data_dir, tmp_path):
    cfg = write_config(tmp_path / "run.cfg", data_dir)
    out = tmp_path / "dyn"
    assert run_cli("backtest", "--mode", "dynamic", "--config", cfg, "--out", out, "--seed", 7) == 0
    meta = json.loads((out / "run_meta.json").read_text())
    assert meta["seed"] == 7
    assert meta["estimator"] == "shrunk"
    assert meta["lookahead_audit"]["ok"] is True
    ledger = json.loads((out / "ledger.json").read_text())
    assert len(ledger["rounds"]) == (160 - 155) // 5 + 1


def test_backtest_dynamic_seed_reproducible(data_dir, tmp_path):
    cfg = write_config(tmp_path / "run.cfg", data_dir)
    a, b = tmp_path / "a", tmp_path / "b"
    run_cli("backtest", "--mode", "dynamic", "--config", cfg, "--out", a, "--seed", 11)
    run_cli("backtest", "--mode", "dynamic", "--config", cfg, "--out", b, "--seed", 11)
    assert (a / "tables" / "ledger.csv").read_bytes() == (b / "tables" / "ledger.csv").read_bytes()
    assert (a / "charts" / "cumulative_returns.svg").read_bytes() == (
        b / "charts" / "cumulative_returns.svg"
    ).read_bytes()


def test_sweep_artifacts(data_dir, tmp_path):
    out = tmp_path / "sweep"
    assert run_cli(
        "sweep", "--prices", data_dir / "prices.csv", "--caps", data_dir / "caps.csv",
        "--lambda", "average", "--out", out,
    ) == 0
    for est in ("sample", "shrunk"):
        for kind in ("prior", "posterior"):
            table = out / "tables" / f"sweep_{kind}_{est}.csv"
            assert table.exists()
            lines = table.read_text().splitlines()
            assert len(lines) == 22  # header + 21 multipliers
            assert (out / "charts" / f"sweep_{kind}_{est}.svg").exists()
    meta = json.loads((out / "run_meta.json").read_text())
    assert "shrinkage_impact" in meta


def test_data_error_exit_3(tmp_path, capsys):
    short = tmp_path / "short.csv"
    short.write_text("date,SPY,^IRX\n2021-01-04,100,5\n2021-01-05,101,5\n")
    # default universe needs 22 columns -> UniverseMismatch (exit 2)
    assert run_cli("stats", "--prices", short, "--out", tmp_path / "o1") == 2

    uni = tmp_path / "uni.csv"
    uni.write_text(
        "id,ticker,variable_name,asset_class,role\n"
        "0,SPY,sp500,EquityUS,Benchmark\n"
        "1,AAA,f0,EquityUS,Factor\n"
        "2,^IRX,tbill,Rate,RiskFree\n"
    )
    tiny = tmp_path / "tiny.csv"
    tiny.write_text("date,SPY,AAA,^IRX\n2021-01-04,100,100,5\n2021-01-05,101,101,5\n")
    code = run_cli("stats", "--prices", tiny, "--universe", uni, "--out", tmp_path / "o2")
    assert code == 3  # fewer than 3 usable price rows is a data problem


def test_bad_config_key(data_dir, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("bogus_key = 1\n")
    assert run_cli("stats", "--config", cfg, "--prices", data_dir / "prices.csv",
                   "--out", tmp_path / "o") == 2
