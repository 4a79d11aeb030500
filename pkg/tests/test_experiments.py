import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dispersal.experiments import (
    CSV_HEADER,
    McConfig,
    McResultRow,
    RateParams,
    aggregate,
    fit_slope,
    rate_boundaries,
    rate_branches,
    rate_fn,
    read_rows_csv,
    rows_to_csv,
    rows_to_svg,
    run_mc,
    select,
    worker_count,
    write_rows_csv,
)
from dispersal.model import ModelParams, make_beta23_model
from dispersal.simulation import SeedSpec, draw_cox_primitives


def _row(n=100, sigma=0.1, rmse=1.0, est="f1"):
    return McResultRow(est, n, 1.0, 1.0, sigma, math.log(sigma) / math.log(n), 0.0, 1.0, 1.0, 10,
                       1.5, 0.0, rmse ** 2, rmse, "", 0)


def test_rate_examples():
    assert rate_fn(RateParams(1.0, 10**6, 1e-7)) == pytest.approx(1e-2, rel=1e-12)
    for n in (10, 1000, 10**5):
        assert rate_fn(RateParams(1.0, n, 1.0)) == pytest.approx(n ** (-1 / 5), rel=1e-12)


@settings(max_examples=60)
@given(st.floats(0.2, 6.0), st.integers(2, 10**8))
def test_rate_continuity(s, n):
    bounds = rate_boundaries(s, n)
    assert bounds[0] < bounds[1] < bounds[2] <= 1.0
    for i, b in enumerate(bounds):
        br = rate_branches(s, n, b)
        assert br[i] == pytest.approx(br[i + 1], rel=1e-12)


def test_rate_is_continuous_function():
    s, n = 2.0, 1000
    for b in rate_boundaries(s, n):
        below = rate_fn(RateParams(s, n, b * (1 - 1e-13)))
        above = rate_fn(RateParams(s, n, b * (1 + 1e-13)))
        assert below == pytest.approx(above, rel=1e-10)


def test_rate_params_validation():
    with pytest.raises(ValueError):
        RateParams(0.0, 10, 0.5)
    with pytest.raises(ValueError):
        RateParams(1.0, 10, 1.5)


@settings(max_examples=50)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=30), st.floats(-10, 10))
def test_aggregate_identity(vals, truth):
    mean, var, rmse = aggregate(np.array(vals), truth)
    bias = mean - truth
    assert rmse ** 2 == pytest.approx(bias ** 2 + var, rel=1e-10, abs=1e-10)


def test_config_validation():
    p = ModelParams(100)
    with pytest.raises(ValueError):
        McConfig(p, taus=[-1.0], replicates=1)
    with pytest.raises(ValueError):
        McConfig(p, taus=[-1.0], sigmas=[0.1])
    with pytest.raises(ValueError):
        McConfig(p, taus=[])
    with pytest.raises(ValueError):
        McConfig(p, taus=[-1.0], estimators=("f3",))
    cfg = McConfig(p, taus=[-1.0, 0.0])
    assert cfg.grid() == [(-1.0, pytest.approx(0.01)), (0.0, 1.0)]


def test_run_mc_rows_and_flags():
    cfg = McConfig(ModelParams(200), estimators=("f1", "f2", "dec", "int"), taus=[-1.5, -0.2],
                   replicates=2, master_seed=5, threads=1)
    rows = run_mc(cfg)
    assert len(rows) == 8
    for r in rows:
        if math.isfinite(r.rmse):
            assert r.rmse ** 2 == pytest.approx(r.bias ** 2 + r.variance, rel=1e-10)
    f2_large = [r for r in rows if r.estimator == "f2" and r.tau == -0.2][0]
    assert "sigma_ge_1/8" in f2_large.flag and math.isnan(f2_large.mean)
    assert all(math.isnan(r.h2) for r in select(rows, "dec"))
    assert all(math.isnan(r.h1) for r in select(rows, "int"))


def test_run_mc_thread_determinism():
    base = dict(params=ModelParams(300), estimators=("f1", "f2"), taus=[-1.4, -0.6, 0.0],
                replicates=6, master_seed=11)
    outs = {t: rows_to_csv(run_mc(McConfig(**base, threads=t))) for t in (1, 3)}
    assert outs[1] == outs[3]


def test_common_random_numbers():
    p = ModelParams(500)
    prims = draw_cox_primitives(p, make_beta23_model(), SeedSpec(3, 7))
    a, b = prims.realize(10 ** -1.2), prims.realize(10 ** -1.0)
    assert a.n_parents == b.n_parents
    np.testing.assert_array_equal(a.parents, b.parents)
    np.testing.assert_array_equal(np.bincount(a.parentage, minlength=a.n_parents),
                                  np.bincount(b.parentage, minlength=b.n_parents))


def test_worker_count(monkeypatch):
    monkeypatch.setenv("DISPERSAL_THREADS", "3")
    assert worker_count() == 3
    assert worker_count(5) == 5
    monkeypatch.delenv("DISPERSAL_THREADS")
    assert 1 <= worker_count() <= 8


def test_fit_slope_examples():
    ns = [100, 200, 400, 800]
    assert fit_slope([_row(n=n, rmse=float(n)) for n in ns]) == pytest.approx(1.0, rel=1e-12)
    assert fit_slope([_row(n=n, rmse=0.3) for n in ns]) == pytest.approx(0.0, abs=1e-12)
    sig = [0.01, 0.1, 0.5]
    assert fit_slope([_row(sigma=s, rmse=s ** 0.5) for s in sig], x="log_sigma") == pytest.approx(0.5)


def test_fit_slope_errors():
    with pytest.raises(ValueError):
        fit_slope([_row(), _row()])
    with pytest.raises(ValueError, match="degenerate"):
        fit_slope([_row(n=100, rmse=r) for r in (1.0, 2.0, 3.0)])
    with pytest.raises(ValueError):
        fit_slope([_row(n=n, rmse=0.0) for n in (10, 20, 30)])
    with pytest.raises(ValueError):
        fit_slope([_row(n=n) for n in (10, 20, 30)], x="tau")


def test_csv_round_trip(tmp_path):
    rows = [_row(), _row(sigma=0.01, rmse=2.0, est="f2")]
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == CSV_HEADER
    path = tmp_path / "out.csv"
    write_rows_csv(rows, path)
    back = read_rows_csv(path)
    assert back == rows


def test_svg_has_polylines():
    rows = [_row(n=1000, sigma=1000 ** t, rmse=0.5 + t, est=e) for t in (-1.0, -0.5, 0.0) for e in ("f1", "f2")]
    svg = rows_to_svg(rows, 2.0)
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert svg.count("<polyline") == 3
