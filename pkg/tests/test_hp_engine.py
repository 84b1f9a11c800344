import io
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hpfts.demog_data import AgeGrid, PopulationPanel, synth_pair
from hpfts.errors import ValidationError, YearOutOfRange
from hpfts.hp_engine import (
    ProjectionConfig,
    aggregate_results,
    fit_ratio_model,
    project,
    project_one_step,
    pyramid_export,
    quantile_labels,
    roll_forward,
    simulate_paths,
    write_path_quantiles_csv,
    write_projection_csv,
    write_totals_csv,
)

FAST = ProjectionConfig(horizon=5, B=50)


def stationary_pair(n=15, max_age=60):
    x = np.arange(max_age + 1, dtype=float)
    f = 1000.0 * np.exp(-0.01 * x)
    m = 1.057 * f  # matches the default birth sex ratio
    F = np.tile(f, (n, 1))
    M = np.tile(m, (n, 1))
    grid = AgeGrid(max_age)
    yrs = range(2000, 2000 + n)
    return PopulationPanel("ST", "Female", yrs, F, grid), PopulationPanel("ST", "Male", yrs, M, grid)


def test_roll_forward_toy():
    nxt = roll_forward(np.array([10.0, 20.0, 30.0]), np.array([0.5, 0.6]))
    np.testing.assert_array_equal(nxt, [0.0, 5.0, 30.0])
    batch = roll_forward(np.array([[10.0, 20.0, 30.0]] * 2), np.array([[0.5, 0.6]] * 2))
    np.testing.assert_array_equal(batch[1], [0.0, 5.0, 30.0])


def test_config_guards():
    for bad in (dict(horizon=0), dict(B=0), dict(alpha=0.0), dict(mode="joint"), dict(refit="never"),
                dict(path_mode="x"), dict(workers=0)):
        with pytest.raises(ValidationError):
            ProjectionConfig(**bad)
    assert quantile_labels(0.05) == ("q2.5", "q50", "q97.5")


def test_stationary_projection_repeats_last_year():
    f, m = stationary_pair()
    res = project(f, m, FAST)
    np.testing.assert_allclose(res.female, np.tile(f.counts[-1], (5, 1)), rtol=1e-12)
    np.testing.assert_allclose(res.male, np.tile(m.counts[-1], (5, 1)), rtol=1e-12)
    rows = pyramid_export(res, 2017)
    assert [r[1] for r in rows] == pytest.approx(list(f.counts[-1]), rel=1e-12)


def test_geometric_one_step(geometric_pair):
    f, m = geometric_pair
    nf, nm = project_one_step(f, m, ProjectionConfig(horizon=1))
    np.testing.assert_allclose(nf[1:-1], 1.02 * f.counts[-1, :-2], rtol=1e-8)
    np.testing.assert_allclose(nm[1:-1], 1.02 * m.counts[-1, :-2], rtol=1e-8)
    res = project(f, m, ProjectionConfig(horizon=1))
    np.testing.assert_array_equal(res.female[0], nf)
    np.testing.assert_array_equal(res.male[0], nm)


def test_cohort_conservation(noisy_pair):
    f, m = noisy_pair
    cfg = ProjectionConfig(horizon=1)
    model = fit_ratio_model(f, m, cfg)
    cf, cm, cwr = model.point(1)
    nf, nm = project_one_step(f, m, cfg, model=model)
    np.testing.assert_allclose(nf[1:-1] / f.counts[-1, :-2], np.exp(cf[:-1]), rtol=1e-12)
    np.testing.assert_allclose(nf[-1] / (f.counts[-1, -2] + f.counts[-1, -1]), np.exp(cf[-1]), rtol=1e-12)
    women = nf[15:50].sum()
    assert nf[0] + nm[0] == pytest.approx(women * np.exp(cwr), rel=1e-12)
    assert nm[0] / (nf[0] + nm[0]) == pytest.approx(1.057 / 2.057, rel=1e-12)


@settings(max_examples=3)
@given(st.floats(0.01, 100.0))
def test_scale_equivariance(c):
    f, m = synth_pair(1.01, n=20, sigma=0.01, seed=4, max_age=60)
    cfg = ProjectionConfig(horizon=3)
    a = project(f, m, cfg)
    b = project(f.scaled(c), m.scaled(c), cfg)
    np.testing.assert_allclose(b.female, c * a.female, rtol=1e-9)
    np.testing.assert_allclose(b.male, c * a.male, rtol=1e-9)


def test_positivity_and_linear_floor(noisy_pair):
    f, m = noisy_pair
    res = project(f, m, FAST)
    assert np.all(res.female > 0) and np.all(res.male > 0)
    lin = project(f, m, replace(FAST, log_transform=False))
    assert np.all(lin.female >= 0) and np.all(lin.male >= 0)


def test_once_and_multivariate_modes(geometric_pair):
    f, m = geometric_pair
    H = 5
    expect_f = f.counts[-1, : -1 - H] * 1.02**H
    for cfg in (replace(FAST, refit="once"), replace(FAST, mode="multivariate")):
        res = project(f, m, cfg)
        np.testing.assert_allclose(res.female[H - 1, H:-1], expect_f, rtol=1e-6)


def test_short_history_rejected():
    f, m = synth_pair(1.0, n=9)
    with pytest.raises(ValidationError):
        project(f, m, FAST)


def test_paths_equal_point_without_noise(geometric_pair):
    f, m = geometric_pair
    cfg = replace(FAST, B=1)
    res = simulate_paths(f, m, cfg)
    assert res.paths.shape == (1, 2, 5, 101)
    np.testing.assert_allclose(res.paths[0, 0], res.female, rtol=1e-9)
    np.testing.assert_allclose(res.paths[0, 1], res.male, rtol=1e-9)


def test_paths_deterministic_and_worker_free(noisy_pair):
    f, m = noisy_pair
    a = simulate_paths(f, m, replace(FAST, B=40))
    b = simulate_paths(f, m, replace(FAST, B=40, workers=3))
    assert a.paths.tobytes() == b.paths.tobytes()
    c = simulate_paths(f, m, replace(FAST, B=40, seed=1), point=a)
    assert c.paths.tobytes() != a.paths.tobytes()


def test_intervals_cover_point(noisy_pair):
    f, m = noisy_pair
    res = simulate_paths(f, m, ProjectionConfig(horizon=10, B=1000))
    lo, _, hi = res.intervals()
    point = np.stack([res.female, res.male])
    inside = (lo <= point) & (point <= hi)
    assert inside.mean() >= 0.9


def test_recursive_paths_run(noisy_pair):
    f, m = noisy_pair
    res = simulate_paths(f, m, replace(FAST, horizon=2, B=2, path_mode="recursive"))
    assert res.paths.shape == (2, 2, 2, 101)
    assert np.all(res.paths >= 0)


def test_pyramid_and_totals_consistent(noisy_pair):
    f, m = noisy_pair
    res = simulate_paths(f, m, replace(FAST, B=20))
    rows = pyramid_export(res, int(res.years[2]))
    assert rows[-1][0] == "100+"
    buf = io.StringIO()
    write_totals_csv([res], buf)
    line = buf.getvalue().splitlines()[3].split(",")
    assert float(line[3]) == pytest.approx(sum(r[1] for r in rows), rel=1e-12)
    assert float(line[4]) == pytest.approx(sum(r[2] for r in rows), rel=1e-12)
    with pytest.raises(YearOutOfRange):
        pyramid_export(res, int(res.years[-1]) + 1)
    with pytest.raises(ValidationError):
        pyramid_export(res, int(res.years[0]), ages=[-1])


def test_aggregate_results_sums(noisy_pair):
    f, m = noisy_pair
    a = simulate_paths(f, m, replace(FAST, B=10))
    b = simulate_paths(f.with_region("B").scaled(2.0), m.with_region("B").scaled(2.0), replace(FAST, B=10))
    agg = aggregate_results([b, a])
    assert agg.region == "AUS"
    np.testing.assert_allclose(agg.female, a.female + b.female, rtol=1e-15)
    np.testing.assert_allclose(agg.paths, a.paths + b.paths, rtol=1e-15)


def test_csv_headers(noisy_pair):
    f, m = noisy_pair
    res = simulate_paths(f, m, replace(FAST, B=10, horizon=2))
    for writer, head in ((write_projection_csv, "region,sex,year,age,count"),
                         (write_totals_csv, "region,year,kind,female,male,total,total_q2.5,total_q97.5")):
        buf = io.StringIO()
        writer([res], buf)
        assert buf.getvalue().splitlines()[0] == head
    buf = io.StringIO()
    write_path_quantiles_csv(res, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "year,age,sex,q2.5,q50,q97.5"
    assert len(lines) == 1 + 2 * 101 * 2
    lo, mid, hi = map(float, lines[1].split(",")[3:])
    assert lo <= mid <= hi
