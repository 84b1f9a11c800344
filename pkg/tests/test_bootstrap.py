import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hpfts.errors import ValidationError
from hpfts.fts import FunctionalSeries, decompose, fit_score_model, fit_score_models, forecast_curve, point_curve


def rank2_series(seed, n=50, p=30, phi=0.6):
    rng = np.random.default_rng(seed)
    grid = np.linspace(0, 1, p)
    f1 = np.sqrt(2) * np.sin(np.pi * grid)
    f2 = np.sqrt(2) * np.cos(np.pi * grid)
    b = np.zeros((n, 2))
    for t in range(1, n):
        b[t] = phi * b[t - 1] + rng.normal(size=2) * [1.0, 0.5]
    X = 1.0 + b[:, :1] * f1 + b[:, 1:] * f2 + rng.normal(0, 0.1, (n, p))
    return FunctionalSeries(grid, X)


@pytest.fixture(scope="module")
def fitted():
    s = rank2_series(0)
    m = decompose(s, 2)
    return m, fit_score_models(m, (1, 1, 1))


def test_zero_noise_collapses_band():
    grid = np.arange(6.0)
    base = np.sin(grid)
    t = np.arange(20.0)[:, None]
    X = base + 0.1 * t * np.cos(grid)  # exactly rank one, linear scores
    m = decompose(FunctionalSeries(grid, X), 1)
    sms = [fit_score_model(m.scores[:, 0], order=(0, 1, 0))]
    fc = forecast_curve(m, sms, 3, B=200, pools=[np.zeros(10)])
    np.testing.assert_allclose(m.residuals, 0, atol=1e-12)
    np.testing.assert_allclose(fc.samples, np.broadcast_to(fc.point, fc.samples.shape), atol=1e-12)
    np.testing.assert_allclose(fc.upper - fc.lower, 0, atol=1e-12)


def test_point_curve_formula(fitted):
    m, sms = fitted
    fc = forecast_curve(m, sms, 2, B=100)
    beta = np.array([sm.forecast(2)[-1] for sm in sms])
    np.testing.assert_array_equal(fc.point, m.mean + beta @ m.eigenfunctions)
    np.testing.assert_array_equal(fc.point, point_curve(m, sms, 2))


@given(st.integers(0, 2**31 - 1), st.integers(1, 5))
def test_band_ordered_and_deterministic(seed, h):
    s = rank2_series(seed % 1000, n=30, p=10)
    m = decompose(s, 2)
    sms = [fit_score_model(m.scores[:, k], order=(1, 0, 0)) for k in range(2)]
    a = forecast_curve(m, sms, h, B=100, seed=seed)
    b = forecast_curve(m, sms, h, B=100, seed=seed)
    assert np.all(a.lower <= a.upper)
    assert a.samples.tobytes() == b.samples.tobytes()


def test_bootstrap_mean_near_point(fitted):
    m, sms = fitted
    rng = np.random.default_rng(1)
    pools = [rng.normal(0, 1, 400) for _ in range(2)]
    pools = [p - p.mean() for p in pools]
    B = 4000
    fc = forecast_curve(m, sms, 1, B=B, seed=11, pools=pools)
    sd = fc.samples.std(axis=0)
    assert np.all(np.abs(fc.samples.mean(axis=0) - fc.point) <= 3 * sd / np.sqrt(B))


def test_guards(fitted):
    m, sms = fitted
    with pytest.raises(ValidationError):
        forecast_curve(m, sms, 1, B=99)
    with pytest.raises(ValidationError):
        forecast_curve(m, sms, 1, alpha=1.0)
    with pytest.raises(ValidationError):
        forecast_curve(m, sms[:1], 1)
