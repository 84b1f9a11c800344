import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hpfts.demog_data import AgeGrid, AnnualSeries, MortalityPanel, synth_mortality
from hpfts.errors import InvalidRate, RatesMissing, SeriesTooShort, ValidationError
from hpfts.welfare import (
    PvInputs,
    floor_zero_rates,
    forecast_pension_rates,
    life_table,
    lifetime_pension_annuity,
    lifetime_pension_pv,
    mortality_forecast,
    welfare_table,
    write_pv_csv,
    write_rate_forecast_csv,
)
from oracles import constant_m_e0, summed_e0


def test_constant_hazard_e0():
    t = life_table(np.full(101, 0.05))
    assert t.e[0] == pytest.approx(constant_m_e0(0.05), abs=1e-6)
    assert t.e[0] == pytest.approx(summed_e0([0.05] * 101), abs=1e-9)
    assert 19.9 < t.e[0] < 20.1
    assert t.l[0] == 100_000.0


@given(st.lists(st.floats(1e-5, 2.0), min_size=2, max_size=101))
def test_recursion_and_invariants(m):
    t = life_table(m)
    for x in range(len(m) - 1):
        assert t.e[x] == pytest.approx((t.L[x] + t.l[x + 1] * t.e[x + 1]) / t.l[x], rel=1e-9)
    assert np.all((0 <= t.q) & (t.q <= 1))
    assert np.all(np.diff(t.l) <= 0)
    assert np.all(t.e >= 0)
    assert t.e[0] == pytest.approx(summed_e0(m), rel=1e-9)


def test_edge_tables():
    m = np.full(101, 0.3)
    m[0] = np.inf
    assert life_table(m).e[0] == 0.5
    m = np.zeros(101)
    m[-1] = 0.25
    t = life_table(m)
    assert np.all(t.l == 100_000.0)
    assert t.e[0] == pytest.approx(104.0, rel=1e-12)
    for bad in ([0.1, 0.0], [0.1, -0.1, 0.2], [0.1, np.nan, 0.2], [0.1]):
        with pytest.raises(InvalidRate):
            life_table(bad)


def test_expectancy_interpolation_and_survival():
    t = life_table(np.full(101, 0.05))
    assert t.expectancy_at(67 * 12) == t.e[67]
    assert t.expectancy_at(67 * 12 + 6) == pytest.approx(0.5 * (t.e[67] + t.e[68]), rel=1e-15)
    s = t.survival(98, 5)
    np.testing.assert_allclose(s, np.exp(-0.05 * np.arange(1, 6)), rtol=1e-12)


def test_zero_rate_flooring():
    r = floor_zero_rates(np.array([[0.0, 0.02, 0.04], [0.01, 0.0, 0.03]]))
    np.testing.assert_array_equal(r, [[0.01, 0.02, 0.04], [0.01, 0.005, 0.03]])
    with pytest.raises(InvalidRate):
        floor_zero_rates(np.zeros((1, 3)))


def test_mortality_forecast_constant_and_decline():
    flat = synth_mortality(n=20, decline=0.0)
    fc = mortality_forecast(flat, 5)
    np.testing.assert_allclose(fc.rates, np.tile(flat.rates[-1], (5, 1)), rtol=1e-10)
    dec = synth_mortality(n=30, decline=0.02)
    fc = mortality_forecast(dec, 10)
    want = dec.rates[-1] * 0.98 ** np.arange(1, 11)[:, None]
    np.testing.assert_allclose(fc.rates, want, rtol=1e-4)
    assert np.all(fc.rates > 0)
    assert fc.years[0] == dec.last_year + 1
    with pytest.raises(ValidationError):
        mortality_forecast(synth_mortality(n=9), 3)


def test_mortality_forecast_positive_with_noise():
    p = synth_mortality(n=25, sigma=0.1, seed=2)
    assert np.all(mortality_forecast(p, 20).rates > 0)


def series(values, start=2000, label="single"):
    values = np.asarray(values, dtype=float)
    return AnnualSeries(label, np.arange(start, start + values.size), values)


def test_rate_forecasts():
    fc = forecast_pension_rates(series([20_000.0] * 15), 6)
    np.testing.assert_allclose(fc.point, 20_000.0, rtol=1e-12)
    line = 18_000.0 + 400.0 * np.arange(20)
    fc = forecast_pension_rates(series(line), 5)
    np.testing.assert_allclose(fc.point, 18_000.0 + 400.0 * np.arange(20, 25), rtol=1e-9)
    drop = series(1000.0 - 90.0 * np.arange(12))
    fc = forecast_pension_rates(drop, 30)
    assert np.all(fc.point >= 0) and fc.point[-1] == 0.0
    noisy = series(20_000 + 300 * np.arange(25) + np.random.default_rng(0).normal(0, 200, 25))
    fc = forecast_pension_rates(noisy, 25, B=200)
    ok = ~np.isnan(fc.lower)
    assert ok[0] and not ok[-1]
    assert np.all(fc.lower[ok] <= fc.upper[ok])
    assert fc.value(2001) == noisy.values[1]
    assert fc.value(2025) == fc.point[0]
    with pytest.raises(RatesMissing):
        fc.value(2100)
    with pytest.raises(SeriesTooShort):
        forecast_pension_rates(series([1.0] * 5), 3)


def test_pv_identities():
    inp = PvInputs(2023, base_year=2023)
    assert lifetime_pension_pv(inp, 18.0, lambda y: 25_000.0, r=0.0) == 25_000.0 * 18
    assert lifetime_pension_pv(inp, 7.25, lambda y: 4.0, r=0.0) == 29.0
    three = 20_000 / 1.02 + 20_000 / 1.02**2 + 20_000 / 1.02**3
    assert lifetime_pension_pv(inp, 3.0, {2023: 20_000, 2024: 20_000, 2025: 20_000}, r=0.02) == pytest.approx(three, rel=1e-12)
    assert lifetime_pension_pv(inp, 0.0, {}, r=0.02) == 0.0
    with pytest.raises(RatesMissing):
        lifetime_pension_pv(inp, 3.0, {2023: 1.0}, r=0.0)
    with pytest.raises(ValidationError):
        lifetime_pension_pv(inp, -1.0, {}, r=0.0)
    with pytest.raises(ValidationError):
        PvInputs(2023, household="family")


@given(st.floats(0.0, 0.1), st.floats(0.5, 40.0), st.integers(2023, 2050))
def test_pv_monotone(r, e, entry):
    inp = PvInputs(entry, base_year=2023)
    rate = lambda y: 20_000.0 + 100.0 * (y - 2023)  # noqa: E731
    pv = lifetime_pension_pv(inp, e, rate, r=r)
    assert lifetime_pension_pv(inp, e, rate, r=r + 0.01) < pv
    assert lifetime_pension_pv(inp, e + 0.25, rate, r=r) > pv


def test_annuity_mode():
    t = life_table(np.full(101, 0.05))
    inp = PvInputs(2023, base_year=2023)
    got = lifetime_pension_annuity(inp, t, 67 * 12, lambda y: 1.0, r=0.0, max_years=60)
    # flat hazard: survival to the k-th birthday is exp(-0.05 k)
    assert got == pytest.approx(sum(math.exp(-0.05 * k) for k in range(1, 61)), rel=1e-12)


def flat_mortality(region, sex, n=15, start=2008):
    m = np.full((n, 101), 0.05)
    return MortalityPanel(region, sex, np.arange(start, start + n), m, AgeGrid())


def test_welfare_table_constant_inputs():
    rates = {"single": series([20_000.0] * 15, 2008), "couple_each": series([15_000.0] * 15, 2008, "couple_each")}
    mort = {r: (flat_mortality(r, "Female"), flat_mortality(r, "Male")) for r in ("ACT", "NSW")}
    table = welfare_table(mort, rates, entry_years=(2023, 2027, 2032), real_rate=0.0, base_year=2023)
    e67 = life_table(np.full(101, 0.05)).e[67]
    assert len(table.rows) == 2 * 2 * 3 * 2
    for row in table.rows:
        c = 20_000.0 if row.household == "single" else 15_000.0
        assert row.pv_aud == pytest.approx(c * e67, rel=1e-9)
    assert table.get("ACT", "single", "Male", 2032) == table.get("NSW", "single", "Male", 2032)
    later = welfare_table(mort, rates, entry_years=(2023,), pension_ages={2023: 70 * 12})
    assert later.get("ACT", "single", "Female", 2023) == pytest.approx(20_000.0 * life_table(np.full(101, 0.05)).e[70], rel=1e-9)
    ann = welfare_table(mort, rates, entry_years=(2023,), method="annuity")
    assert ann.get("ACT", "single", "Female", 2023) > 0
    with pytest.raises(KeyError):
        table.get("VIC", "single", "Male", 2032)
    with pytest.raises(ValidationError):
        welfare_table(mort, rates, method="tontine")


def test_pv_and_rate_csv():
    rates = {"single": series([20_000.0] * 12, 2010), "couple_each": series([15_000.0] * 12, 2010, "couple_each")}
    mort = {"ACT": (flat_mortality("ACT", "Female", 12, 2010), flat_mortality("ACT", "Male", 12, 2010))}
    table = welfare_table(mort, rates, entry_years=(2022,))
    buf = io.StringIO()
    write_pv_csv(table, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "region,household,sex,entry_year,pv_aud"
    assert lines[1].startswith("ACT,single,Female,2022,")
    fc = forecast_pension_rates(rates["single"], 3)
    buf = io.StringIO()
    write_rate_forecast_csv([fc], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "series,year,kind,value,lower,upper"
    assert lines[1] == "single,2010,observed,20000.0,,"
    assert lines[13].startswith("single,2022,forecast,20000.0,")
