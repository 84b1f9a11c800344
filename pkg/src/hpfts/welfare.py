"""Life expectancy, pension-rate forecasts and lifetime age-pension values."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, TextIO

import numpy as np

from .demog_data import AnnualSeries, MortalityPanel, Sex
from .errors import InvalidRate, RatesMissing, ValidationError
from .fts import FunctionalSeries, decompose, fit_score_model
from .fts.arima import MIN_POOL, error_pools
from .pension import STATUTORY_MONTHS

DEFAULT_ENTRY_YEARS = (2022, 2027, 2032, 2037, 2042, 2047, 2051)
HOUSEHOLDS = ("single", "couple_each")
RADIX = 100_000.0


# --------------------------------------------------------------------------
# mortality


def floor_zero_rates(rates: np.ndarray) -> np.ndarray:
    """Replace zero rates by half the smallest positive rate of the same year."""
    rates = np.array(rates, dtype=float)
    for t in range(rates.shape[0]):
        row = rates[t]
        pos = row[row > 0]
        if pos.size == 0:
            raise InvalidRate(f"year index {t} has no positive mortality rate")
        row[row <= 0] = 0.5 * pos.min()
    return rates


@dataclass(frozen=True)
class MortalityForecast:
    region: str
    sex: Sex
    years: np.ndarray
    rates: np.ndarray  # (h, p)

    def at(self, year: int) -> np.ndarray:
        return self.rates[year - int(self.years[0])]


def mortality_forecast(panel: MortalityPanel, h: int, K: int = 6, max_orders=(3, 2, 3)) -> MortalityForecast:
    """Forecast log death rates by FPCA with ARIMA score forecasts."""
    if panel.years.size < 10:
        raise ValidationError("need at least 10 years of mortality rates")
    if h < 1:
        raise ValidationError("horizon must be >= 1")
    logm = np.log(floor_zero_rates(panel.rates))
    series = FunctionalSeries(panel.age_grid.ages.astype(float), logm)
    fp = decompose(series, min(K, series.n - 1))
    beta = np.column_stack([fit_score_model(fp.scores[:, k], max_orders).forecast(h) for k in range(fp.K)])
    rates = np.exp(fp.reconstruct(beta))
    years = np.arange(panel.last_year + 1, panel.last_year + h + 1)
    return MortalityForecast(panel.region, panel.sex, years, rates)


@dataclass(frozen=True)
class LifeTable:
    m: np.ndarray
    q: np.ndarray
    l: np.ndarray  # noqa: E741
    L: np.ndarray
    e: np.ndarray

    def expectancy_at(self, months: int) -> float:
        """Remaining expectancy at a pension age in months, linear between ages."""
        a, frac = divmod(int(months), 12)
        if a >= self.e.size - 1:
            return float(self.e[-1])
        w = frac / 12.0
        return float((1 - w) * self.e[a] + w * self.e[a + 1])

    def survival(self, from_age: int, years: int) -> np.ndarray:
        """Probability of surviving from ``from_age`` to each of the next ``years`` birthdays."""
        out = np.empty(years)
        last = self.l.size - 1
        l0 = self.l[from_age]
        for j in range(years):
            x = from_age + j + 1
            if x <= last:
                lx = self.l[x]
            else:
                lx = self.l[last] * math.exp(-self.m[last] * (x - last))
            out[j] = lx / l0 if l0 > 0 else 0.0
        return out


def life_table(m) -> LifeTable:
    """Period life table; closed ages use ``q = 1 - exp(-m)`` and mid-year deaths."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 1 or m.size < 2:
        raise InvalidRate("need a rate curve over at least two ages")
    if np.any(np.isnan(m)) or np.any(m < 0):
        raise InvalidRate("rates must be non-negative numbers")
    if not m[-1] > 0:
        raise InvalidRate("open age group needs a positive rate")
    q = -np.expm1(-m[:-1])
    l = np.empty(m.size)  # noqa: E741
    l[0] = RADIX
    for x in range(m.size - 1):
        l[x + 1] = l[x] * (1.0 - q[x])
    L = np.empty(m.size)
    L[:-1] = l[:-1] - 0.5 * l[:-1] * q
    L[-1] = l[-1] / m[-1] if np.isfinite(m[-1]) else 0.0
    T = np.cumsum(L[::-1])[::-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        e = np.where(l > 0, T / np.where(l > 0, l, 1.0), 0.0)
    return LifeTable(m, np.append(q, 1.0), l, L, e)


# --------------------------------------------------------------------------
# pension rates


@dataclass(frozen=True)
class RateForecast:
    label: str
    years: np.ndarray
    point: np.ndarray
    lower: np.ndarray  # NaN beyond the horizon the error pools support
    upper: np.ndarray
    history: AnnualSeries

    def value(self, year: int) -> float:
        h = self.history
        if h.years[0] <= year <= h.years[-1]:
            return h.value(year)
        i = year - int(self.years[0])
        if 0 <= i < self.years.size:
            return float(self.point[i])
        raise RatesMissing(f"no {self.label} rate for {year}")


def forecast_pension_rates(
    series: AnnualSeries, h: int, B: int = 1000, alpha: float = 0.05, seed: int = 0, max_orders=(3, 2, 3)
) -> RateForecast:
    """ARIMA point forecasts with bootstrap bands, floored at zero."""
    model = fit_score_model(series.values, max_orders)
    point = np.maximum(model.forecast(h), 0.0)
    lower = np.full(h, np.nan)
    upper = np.full(h, np.nan)
    hmax = min(h, model.n - MIN_POOL)
    if hmax >= 1:
        rng = np.random.default_rng(seed)
        raw = model.forecast(h)
        for j, pool in enumerate(error_pools(model, hmax)):
            draws = raw[j] + pool[rng.integers(0, pool.size, B)]
            lo, hi = np.quantile(draws, [alpha / 2, 1 - alpha / 2])
            lower[j], upper[j] = max(lo, 0.0), max(hi, 0.0)
    years = np.arange(int(series.years[-1]) + 1, int(series.years[-1]) + h + 1)
    return RateForecast(series.label, years, point, lower, upper, series)


# --------------------------------------------------------------------------
# present values


@dataclass(frozen=True)
class PvInputs:
    entry_year: int
    household: str = "single"
    region: str = ""
    sex: Sex = Sex.FEMALE
    base_year: int = 2023
    real_rate: float = 0.0

    def __post_init__(self):
        if self.household not in HOUSEHOLDS:
            raise ValidationError(f"household must be one of {HOUSEHOLDS}")


def _rate_lookup(rates) -> Callable[[int], float]:
    if callable(rates) and not isinstance(rates, Mapping):
        return rates
    if isinstance(rates, (AnnualSeries, RateForecast)):
        return rates.value

    def get(year):
        try:
            return float(rates[year])
        except KeyError:
            raise RatesMissing(f"no pension rate for {year}") from None

    return get


def lifetime_pension_pv(inputs: PvInputs, e_at_entry: float, rates, r: float | None = None) -> float:
    """Discounted payments over a retirement of ``e_at_entry`` years.

    One payment of the year's rate at the end of each retirement year, the
    last one scaled by the fractional part of the expectancy.
    """
    if e_at_entry < 0:
        raise ValidationError("life expectancy must be non-negative")
    r = inputs.real_rate if r is None else r
    rate = _rate_lookup(rates)
    n_full = math.floor(e_at_entry)
    frac = e_at_entry - n_full
    J = n_full + (1 if frac > 0 else 0)
    pv = 0.0
    for j in range(J):
        year = inputs.entry_year + j
        share = 1.0 if j < n_full else frac
        pv += share * rate(year) * (1.0 + r) ** -(year + 1 - inputs.base_year)
    return pv


def lifetime_pension_annuity(inputs: PvInputs, table: LifeTable, pension_months: int, rates,
                             r: float | None = None, max_years: int = 60) -> float:
    """Survival-weighted alternative: each year's payment times survival to its end."""
    r = inputs.real_rate if r is None else r
    rate = _rate_lookup(rates)
    surv = table.survival(int(pension_months) // 12, max_years)
    pv = 0.0
    for j in range(max_years):
        if surv[j] < 1e-9:
            break
        year = inputs.entry_year + j
        pv += surv[j] * rate(year) * (1.0 + r) ** -(year + 1 - inputs.base_year)
    return pv


@dataclass(frozen=True)
class PvRow:
    region: str
    household: str
    sex: Sex
    entry_year: int
    pv_aud: float


@dataclass(frozen=True)
class PvTable:
    rows: tuple[PvRow, ...]

    def get(self, region, household, sex, entry_year) -> float:
        for row in self.rows:
            if (row.region, row.household, row.sex, row.entry_year) == (region, household, Sex(sex), entry_year):
                return row.pv_aud
        raise KeyError((region, household, sex, entry_year))


def _pension_months_for(pension_ages, year) -> int:
    if pension_ages is None:
        return STATUTORY_MONTHS
    if isinstance(pension_ages, Mapping):
        return int(pension_ages.get(year, STATUTORY_MONTHS))
    if callable(pension_ages):
        return int(pension_ages(year))
    return int(pension_ages)


def welfare_table(
    mortality: Mapping[str, tuple[MortalityPanel, MortalityPanel]],
    rates: Mapping[str, AnnualSeries | RateForecast],
    entry_years: Sequence[int] = DEFAULT_ENTRY_YEARS,
    households: Sequence[str] = HOUSEHOLDS,
    pension_ages=None,
    real_rate: float = 0.0,
    base_year: int = 2023,
    K: int = 6,
    method: str = "expectancy",
    seed: int = 0,
) -> PvTable:
    """Present values for every region, household, sex and entry year.

    ``pension_ages`` is a {year: months} mapping, a callable, a constant, or
    None for the statutory 67. ``rates`` maps household to an observed series
    (forecast here) or an existing :class:`RateForecast`.
    """
    if method not in ("expectancy", "annuity"):
        raise ValidationError("method must be 'expectancy' or 'annuity'")
    last_entry = max(entry_years)
    rate_fc = {}
    for hh in households:
        src = rates[hh]
        if isinstance(src, AnnualSeries):
            horizon = max(last_entry + 80 - int(src.years[-1]), 1)
            src = forecast_pension_rates(src, horizon, seed=seed)
        rate_fc[hh] = src
    rows = []
    for region in sorted(mortality):
        for panel in mortality[region]:
            need = last_entry - panel.last_year
            fc = mortality_forecast(panel, need, K) if need > 0 else None
            for year in entry_years:
                m = panel.at(year) if year <= panel.last_year else fc.at(year)
                if year < int(panel.years[0]):
                    raise ValidationError(f"entry year {year} precedes mortality data")
                table = life_table(m)
                months = _pension_months_for(pension_ages, year)
                for hh in households:
                    inp = PvInputs(year, hh, region, panel.sex, base_year, real_rate)
                    if method == "expectancy":
                        pv = lifetime_pension_pv(inp, table.expectancy_at(months), rate_fc[hh])
                    else:
                        pv = lifetime_pension_annuity(inp, table, months, rate_fc[hh])
                    rows.append(PvRow(region, hh, panel.sex, year, pv))
    return PvTable(tuple(rows))


def write_pv_csv(table: PvTable, stream: TextIO):
    stream.write("region,household,sex,entry_year,pv_aud\n")
    for r in table.rows:
        stream.write(f"{r.region},{r.household},{r.sex.value},{r.entry_year},{float(r.pv_aud)!r}\n")


def write_rate_forecast_csv(forecasts: Sequence[RateForecast], stream: TextIO):
    stream.write("series,year,kind,value,lower,upper\n")
    for fc in forecasts:
        for y, v in zip(fc.history.years, fc.history.values):
            stream.write(f"{fc.label},{y},observed,{float(v)!r},,\n")
        for y, v, lo, hi in zip(fc.years, fc.point, fc.lower, fc.upper):
            lo_s = "" if np.isnan(lo) else repr(float(lo))
            hi_s = "" if np.isnan(hi) else repr(float(hi))
            stream.write(f"{fc.label},{y},forecast,{float(v)!r},{lo_s},{hi_s}\n")
