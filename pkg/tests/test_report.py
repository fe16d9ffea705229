import re

import numpy as np
import pytest

from factorbl.allocate import WeightVector
from factorbl.blacklitterman import BLResult, RiskAversion
from factorbl.errors import BadInput, EmptyChart, IoError
from factorbl.report import (
    ChartSpec,
    emit_bl_table,
    format_percent,
    matrix_to_csv,
    parse_percent,
    read_bl_table,
    render_chart,
    weights_table_csv,
)


def test_empty_chart_rejected(tmp_path):
    with pytest.raises(EmptyChart):
        render_chart(ChartSpec("line", {}, str(tmp_path / "x.svg")))
    with pytest.raises(EmptyChart):
        render_chart(ChartSpec("line", {"a": np.array([])}, str(tmp_path / "x.svg")))


def test_unknown_kind_and_ragged_series(tmp_path):
    with pytest.raises(BadInput):
        ChartSpec("pie", {"a": [1.0]}, str(tmp_path / "x.svg"))
    with pytest.raises(BadInput):
        ChartSpec("line", {"a": [1.0, 2.0], "b": [1.0]}, str(tmp_path / "x.svg"))


def test_identical_specs_identical_bytes(tmp_path):
    series = {"a": np.linspace(0, 1, 30), "b": np.sin(np.linspace(0, 3, 30))}
    p1 = render_chart(ChartSpec("line", series, str(tmp_path / "c1.svg"), title="t"))
    p2 = render_chart(ChartSpec("line", series, str(tmp_path / "c2.svg"), title="t"))
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_all_kinds_render(tmp_path):
    rng = np.random.default_rng(70)
    render_chart(ChartSpec("line", {"a": rng.standard_normal(10)}, str(tmp_path / "l.svg")))
    render_chart(
        ChartSpec("stacked_area", {"a": np.full(5, 0.4), "b": np.full(5, 0.6)}, str(tmp_path / "s.svg"))
    )
    corr = np.corrcoef(rng.standard_normal((4, 50)))
    render_chart(
        ChartSpec("heatmap", {f"s{i}": corr[i] for i in range(4)}, str(tmp_path / "h.svg"))
    )
    render_chart(
        ChartSpec("grouped_bar", {"x": rng.standard_normal(6), "y": rng.standard_normal(6)}, str(tmp_path / "g.svg"))
    )
    for name in ("l", "s", "h", "g"):
        content = (tmp_path / f"{name}.svg").read_text()
        assert content.startswith("<svg") and content.rstrip().endswith("</svg>")


def test_unwritable_path(tmp_path):
    with pytest.raises(IoError):
        render_chart(ChartSpec("line", {"a": [1.0, 2.0]}, str(tmp_path / "no" / "dir" / "x.svg")))


def test_stacked_area_unit_sum_top_envelope(tmp_path):
    weights = {f"w{i}": np.full(12, 0.25) for i in range(4)}  # columns sum to 1
    path = render_chart(ChartSpec("stacked_area", weights, str(tmp_path / "st.svg")))
    content = open(path).read()
    polygons = re.findall(r'<polygon points="([^"]+)"', content)
    assert len(polygons) == 4
    top = polygons[-1].split()
    upper = top[: len(top) // 2]  # first half traces the upper edge left to right
    upper_y = {pt.split(",")[1] for pt in upper}
    assert len(upper_y) == 1  # constant line
    # the constant equals the y pixel of value 1.0, i.e. the top margin
    assert float(next(iter(upper_y))) == pytest.approx(40.0, abs=1e-9)


def make_result(n=4, with_views=True):
    rng = np.random.default_rng(71)
    pi = 0.01 * rng.standard_normal(n)
    mu = pi + (0.005 * rng.standard_normal(n) if with_views else 0.0)
    prior = WeightVector(rng.dirichlet(np.ones(n)), "market_cap", True)
    post = WeightVector(prior.weights + (0.01 if with_views else 0.0) * rng.standard_normal(n),
                        "black_litterman", False, 1.0)
    return BLResult(pi, mu, post, RiskAversion(1.0, "Custom"), prior), prior


def test_bl_table_layout_and_roundtrip(tmp_path):
    result, prior = make_result()
    names = [f"f{i}" for i in range(4)]
    path = emit_bl_table(result, prior, names, tmp_path / "bl.csv")
    lines = open(path).read().splitlines()
    assert lines[0] == "asset,bl_return,pi,return_difference,bl_weights,prior_weights,weights_difference"
    assert len(lines) == 5
    parsed = read_bl_table(path)
    for i, name in enumerate(names):
        # lossless at the serialized precision (2 decimals of a percent)
        assert parsed[name]["pi"] == pytest.approx(result.prior_pi[i], abs=5.0001e-5)
        assert parsed[name]["bl_weights"] == pytest.approx(
            result.posterior_weights.weights[i], abs=5.0001e-5
        )


def test_bl_table_no_views_zero_differences(tmp_path):
    rng = np.random.default_rng(72)
    pi = 0.01 * rng.standard_normal(4)
    prior = WeightVector(rng.dirichlet(np.ones(4)), "market_cap", True)
    result = BLResult(pi, pi.copy(), WeightVector(prior.weights.copy(), "black_litterman", False, 1.0),
                      RiskAversion(1.0, "Custom"), prior)
    path = emit_bl_table(result, prior, [f"f{i}" for i in range(4)], tmp_path / "bl.csv")
    for line in open(path).read().splitlines()[1:]:
        cells = [c.strip('"') for c in line.split(",")[1:]]
        assert cells[2] == "0.00%"
        assert cells[5] == "0.00%"


def test_bl_table_twenty_rows(tmp_path):
    rng = np.random.default_rng(73)
    n = 20
    pi = 0.01 * rng.standard_normal(n)
    prior = WeightVector(rng.dirichlet(np.ones(n)), "market_cap", True)
    result = BLResult(pi, pi + 0.001, WeightVector(prior.weights + 0.001, "black_litterman", False, 1.0),
                      RiskAversion(1.0, "Custom"), prior)
    path = emit_bl_table(result, prior, [f"f{i}" for i in range(n)], tmp_path / "bl.csv")
    assert len(open(path).read().splitlines()) == n + 1


def test_percent_formatting():
    assert format_percent(171.0741) == "17,107.41%"
    assert format_percent(0.0540) == "5.40%"
    assert format_percent(-0.0038) == "-0.38%"
    assert parse_percent("17,107.41%") == pytest.approx(171.0741)
    assert parse_percent("-0.38%") == pytest.approx(-0.0038)


def test_matrix_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(74)
    m = rng.standard_normal((3, 3))
    names = ["a", "b", "c"]
    path = matrix_to_csv(m, names, tmp_path / "m.csv")
    lines = open(path).read().splitlines()
    assert lines[0] == ",a,b,c"
    parsed = np.array([[float(v) for v in line.split(",")[1:]] for line in lines[1:]])
    assert np.array_equal(parsed, m)
    with pytest.raises(BadInput):
        matrix_to_csv(m, ["a", "b"], tmp_path / "m2.csv")


def test_weights_table(tmp_path):
    cols = {"equal": np.full(3, 1 / 3), "gmv": np.array([0.5, 0.25, 0.25])}
    path = weights_table_csv(cols, ["x", "y", "z"], tmp_path / "w.csv")
    lines = open(path).read().splitlines()
    assert lines[0] == "asset,equal,gmv"
    assert float(lines[1].split(",")[2]) == 0.5
