"""Population and mortality panels in the HMD/AHMD tabular layout.

Panels are immutable: every transformation returns a new panel. Counts are
floats throughout, since HMD estimates are fractional and projections produce
fractional persons.
"""

from __future__ import annotations

import csv
import io
import math
import re
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import (
    GapInYears,
    MalformedRow,
    MissingAge,
    NegativeCount,
    ShapeMismatch,
    ValidationError,
)

NATIONAL_CODE = "AUS"


class Sex(str, Enum):
    FEMALE = "Female"
    MALE = "Male"

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str):
            for member in cls:
                if member.value.lower() == value.strip().lower():
                    return member
        return None


@dataclass(frozen=True)
class AgeGrid:
    max_age: int = 100
    open_ended: bool = True

    def __post_init__(self):
        if self.max_age < 1:
            raise ValidationError("age grid needs at least two bins")
        if not self.open_ended:
            raise ValidationError("the last age bin must be open-ended")

    @property
    def size(self) -> int:
        return self.max_age + 1

    @property
    def ages(self) -> np.ndarray:
        return np.arange(self.max_age + 1)

    def label(self, x: int) -> str:
        return f"{x}+" if x == self.max_age else str(x)

    @property
    def labels(self) -> list[str]:
        return [self.label(x) for x in range(self.size)]


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def _check_years(years: np.ndarray):
    if years.ndim != 1 or years.size == 0:
        raise ValidationError("years must be a non-empty 1-d sequence")
    steps = np.diff(years)
    if np.any(steps != 1):
        bad = int(np.flatnonzero(steps != 1)[0])
        raise GapInYears(int(years[bad]) + 1)


@dataclass(frozen=True)
class PopulationPanel:
    """Annual counts ``counts[t, x]`` for one region and sex."""

    region: str
    sex: Sex
    years: np.ndarray
    counts: np.ndarray
    age_grid: AgeGrid = field(default_factory=AgeGrid)

    def __post_init__(self):
        object.__setattr__(self, "sex", Sex(self.sex))
        object.__setattr__(self, "years", _frozen(self.years, int))
        object.__setattr__(self, "counts", _frozen(self.counts))
        _check_years(self.years)
        if self.counts.shape != (self.years.size, self.age_grid.size):
            raise ShapeMismatch(
                f"counts shape {self.counts.shape} != "
                f"({self.years.size}, {self.age_grid.size})"
            )
        if not np.all(np.isfinite(self.counts)):
            raise MalformedRow("non-finite count")
        if np.any(self.counts < 0):
            t, x = np.argwhere(self.counts < 0)[0]
            raise NegativeCount(f"negative count at year {self.years[t]}, age {x}")

    @property
    def n_years(self) -> int:
        return int(self.years.size)

    @property
    def first_year(self) -> int:
        return int(self.years[0])

    @property
    def last_year(self) -> int:
        return int(self.years[-1])

    def at(self, year: int) -> np.ndarray:
        return self.counts[year - self.first_year]

    def totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def append(self, vector) -> "PopulationPanel":
        vector = np.asarray(vector, dtype=float).reshape(1, -1)
        return PopulationPanel(
            self.region,
            self.sex,
            np.append(self.years, self.last_year + 1),
            np.vstack([self.counts, vector]),
            self.age_grid,
        )

    def restrict(self, first: int, last: int) -> "PopulationPanel":
        i, j = first - self.first_year, last - self.first_year + 1
        if i < 0 or j > self.n_years or i >= j:
            raise ShapeMismatch(f"cannot restrict {self.first_year}-{self.last_year} to {first}-{last}")
        return PopulationPanel(self.region, self.sex, self.years[i:j], self.counts[i:j], self.age_grid)

    def scaled(self, c: float) -> "PopulationPanel":
        return PopulationPanel(self.region, self.sex, self.years, self.counts * c, self.age_grid)

    def with_region(self, region: str) -> "PopulationPanel":
        return PopulationPanel(region, self.sex, self.years, self.counts, self.age_grid)


@dataclass(frozen=True)
class MortalityPanel:
    """Central death rates ``rates[t, x]`` (deaths per person-year)."""

    region: str
    sex: Sex
    years: np.ndarray
    rates: np.ndarray
    age_grid: AgeGrid = field(default_factory=AgeGrid)

    def __post_init__(self):
        object.__setattr__(self, "sex", Sex(self.sex))
        object.__setattr__(self, "years", _frozen(self.years, int))
        object.__setattr__(self, "rates", _frozen(self.rates))
        _check_years(self.years)
        if self.rates.shape != (self.years.size, self.age_grid.size):
            raise ShapeMismatch(f"rates shape {self.rates.shape} inconsistent with years/ages")
        if not np.all(np.isfinite(self.rates)):
            raise MalformedRow("non-finite mortality rate")
        if np.any(self.rates < 0):
            t, x = np.argwhere(self.rates < 0)[0]
            raise NegativeCount(f"negative rate at year {self.years[t]}, age {x}")

    @property
    def last_year(self) -> int:
        return int(self.years[-1])

    def at(self, year: int) -> np.ndarray:
        return self.rates[year - int(self.years[0])]


@dataclass(frozen=True)
class AnnualSeries:
    label: str
    years: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "years", _frozen(self.years, int))
        object.__setattr__(self, "values", _frozen(self.values))
        if self.years.shape != self.values.shape:
            raise ShapeMismatch("years and values differ in length")
        _check_years(self.years)

    def value(self, year: int) -> float:
        return float(self.values[year - int(self.years[0])])


# --------------------------------------------------------------------------
# parsing

_SPLIT = re.compile(r"[,\s]+")
_AGE_TOKEN = re.compile(r"^(\d+)(\+?)$")


def _as_text(source) -> str:
    if isinstance(source, str):
        return source
    return source.read()


def _read_table(text: str, value_cols: Sequence[str] = ("Female", "Male")):
    """Return ``{year: {age: (values..., is_open)}}`` and the total column.

    Leading lines before the ``Year Age ...`` header (HMD title lines) and
    ``#`` comments are skipped.
    """
    header = None
    rows: dict[int, dict[int, tuple]] = {}
    totals: dict[tuple[int, int], float] = {}
    open_age: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = [t for t in _SPLIT.split(line) if t]
        if header is None:
            if tokens[:2] == ["Year", "Age"]:
                header = tokens
                missing = [c for c in value_cols if c not in header]
                if missing:
                    raise MalformedRow(f"header lacks columns {missing}")
                idx = [header.index(c) for c in value_cols]
                tot_idx = header.index("Total") if "Total" in header else None
            continue
        if len(tokens) != len(header):
            raise MalformedRow(f"line {lineno}: expected {len(header)} fields, got {len(tokens)}")
        ytok, atok = tokens[0], tokens[1]
        if ytok.endswith("-"):
            # HMD territorial-adjustment rows; the "+" variant is kept
            continue
        try:
            year = int(ytok.rstrip("+"))
        except ValueError:
            raise MalformedRow(f"line {lineno}: bad year {ytok!r}") from None
        m = _AGE_TOKEN.match(atok)
        if not m:
            raise MalformedRow(f"line {lineno}: bad age {atok!r}")
        age, is_open = int(m.group(1)), bool(m.group(2))
        vals = []
        for i in idx:
            tok = tokens[i]
            try:
                v = float("nan") if tok == "." else float(tok)
            except ValueError:
                raise MalformedRow(f"line {lineno}: non-numeric value {tok!r}") from None
            vals.append(v)
        if tot_idx is not None and tokens[tot_idx] != ".":
            try:
                totals[(year, age)] = float(tokens[tot_idx])
            except ValueError:
                raise MalformedRow(f"line {lineno}: non-numeric total") from None
        per_year = rows.setdefault(year, {})
        if age in per_year:
            raise MalformedRow(f"line {lineno}: duplicate age {atok} in {year}")
        per_year[age] = tuple(vals)
        if is_open:
            open_age[year] = age
    if header is None:
        raise MalformedRow("no 'Year Age ...' header row found")
    if not rows:
        raise MalformedRow("no data rows")
    return rows, totals, open_age


def _layout(rows, open_age):
    years = sorted(rows)
    full = range(years[0], years[-1] + 1)
    for y in full:
        if y not in rows:
            raise GapInYears(y)
    top = max(max(r) for r in rows.values())
    for y in years:
        have = set(rows[y])
        if have != set(range(top + 1)):
            missing = sorted(set(range(top + 1)) - have)
            raise MissingAge(f"year {y}: missing ages {missing[:5]}")
        if y in open_age and open_age[y] != top:
            raise MalformedRow(f"year {y}: open age group {open_age[y]}+ is not the last")
    return np.array(years), top


def parse_population_file(source: str | TextIO, region: str, cutoff: int = 100):
    """Parse a ``Year Age Female Male Total`` table into (female, male) panels.

    Ages at or above ``cutoff`` are summed into the open bin; a table whose
    top age is below ``cutoff`` keeps its own top age as the open bin.
    """
    rows, totals, open_age = _read_table(_as_text(source))
    years, top = _layout(rows, open_age)
    max_age = min(cutoff, top)
    grid = AgeGrid(max_age)
    out = np.zeros((2, years.size, top + 1))
    for i, y in enumerate(years):
        for a, (f, m) in rows[y].items():
            if math.isnan(f) or math.isnan(m):
                raise MalformedRow(f"missing count at year {y}, age {a}")
            if f < 0 or m < 0:
                raise NegativeCount(f"negative count at year {y}, age {a}")
            out[0, i, a], out[1, i, a] = f, m
            t = totals.get((y, a))
            if t is not None and abs(t - (f + m)) > 0.5:
                warnings.warn(f"Total column disagrees at year {y}, age {a}: {t} vs {f + m}")
    grouped = group_open_age(out, max_age)
    return (
        PopulationPanel(region, Sex.FEMALE, years, grouped[0], grid),
        PopulationPanel(region, Sex.MALE, years, grouped[1], grid),
    )


def group_open_age(values: np.ndarray, max_age: int) -> np.ndarray:
    """Sum the trailing age columns ``>= max_age`` into one open bin."""
    values = np.asarray(values, dtype=float)
    head = values[..., :max_age]
    tail = values[..., max_age:]
    # left-to-right sum over ages, canonical order
    acc = tail[..., 0].copy()
    for j in range(1, tail.shape[-1]):
        acc = acc + tail[..., j]
    return np.concatenate([head, acc[..., None]], axis=-1)


def parse_mortality_file(
    source: str | TextIO,
    region: str,
    cutoff: int = 100,
    exposures: str | TextIO | None = None,
):
    """Parse an HMD ``Mx`` table into (female, male) mortality panels.

    The open bin rate is the exposure-weighted mean of the tail rates when an
    exposures table (same layout) is supplied, else their plain mean. Missing
    rates (``.``) are read as zero.
    """
    rows, _, open_age = _read_table(_as_text(source))
    years, top = _layout(rows, open_age)
    max_age = min(cutoff, top)
    rates = np.zeros((2, years.size, top + 1))
    for i, y in enumerate(years):
        for a, vals in rows[y].items():
            rates[:, i, a] = [0.0 if math.isnan(v) else v for v in vals]
    if np.any(rates < 0):
        raise NegativeCount("negative mortality rate")
    if exposures is not None:
        erows, _, eopen = _read_table(_as_text(exposures))
        eyears, etop = _layout(erows, eopen)
        if not np.array_equal(eyears, years) or etop != top:
            raise ShapeMismatch("exposures table does not match mortality table")
        w = np.zeros_like(rates)
        for i, y in enumerate(years):
            for a, vals in erows[y].items():
                w[:, i, a] = [0.0 if math.isnan(v) else v for v in vals]
    else:
        w = np.ones_like(rates)
    tail_r, tail_w = rates[..., max_age:], w[..., max_age:]
    denom = tail_w.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        open_rate = np.where(denom > 0, (tail_r * tail_w).sum(axis=-1) / np.where(denom > 0, denom, 1), 0.0)
    out = np.concatenate([rates[..., :max_age], open_rate[..., None]], axis=-1)
    grid = AgeGrid(max_age)
    return (
        MortalityPanel(region, Sex.FEMALE, years, out[0], grid),
        MortalityPanel(region, Sex.MALE, years, out[1], grid),
    )


def read_annual_series(source: str | TextIO) -> dict[str, AnnualSeries]:
    """Read ``year,<label>,...`` CSV into one series per label column."""
    reader = csv.reader(io.StringIO(_as_text(source)))
    rows = [r for r in reader if r and not r[0].startswith("#")]
    header, body = rows[0], rows[1:]
    if header[0] != "year":
        raise MalformedRow("annual series CSV must start with a 'year' column")
    try:
        years = np.array([int(r[0]) for r in body])
        vals = np.array([[float(v) for v in r[1:]] for r in body])
    except ValueError as exc:
        raise MalformedRow(str(exc)) from None
    return {lab: AnnualSeries(lab, years, vals[:, j]) for j, lab in enumerate(header[1:])}


def annualize_half_yearly(years, half_rates, payments_per_half: int = 13) -> np.ndarray:
    """Annual payments from two half-year rates per year.

    ``half_rates`` has shape (n_years, 2); rates are per payment period
    (fortnightly by default, 13 payments per half year).
    """
    half_rates = np.asarray(half_rates, dtype=float)
    if half_rates.shape != (len(years), 2):
        raise ShapeMismatch("half_rates must have shape (n_years, 2)")
    return payments_per_half * half_rates.sum(axis=1)


# --------------------------------------------------------------------------
# CSV round trip


def write_population_csv(panels: Iterable[PopulationPanel], stream: TextIO, value_name: str = "count"):
    stream.write(f"region,sex,year,age,{value_name}\n")
    for p in panels:
        labels = p.age_grid.labels
        sex = p.sex.value
        for i, y in enumerate(p.years):
            row = p.counts[i]
            for x, lab in enumerate(labels):
                stream.write(f"{p.region},{sex},{y},{lab},{float(row[x])!r}\n")


def read_population_csv(source: str | TextIO) -> list[PopulationPanel]:
    reader = csv.DictReader(io.StringIO(_as_text(source)))
    cells: dict[tuple[str, str], dict[int, dict[int, float]]] = {}
    top: dict[tuple[str, str], int] = {}
    for r in reader:
        key = (r["region"], r["sex"])
        m = _AGE_TOKEN.match(r["age"])
        if not m:
            raise MalformedRow(f"bad age {r['age']!r}")
        age = int(m.group(1))
        try:
            cells.setdefault(key, {}).setdefault(int(r["year"]), {})[age] = float(r["count"])
        except ValueError:
            raise MalformedRow(f"non-numeric count {r['count']!r}") from None
        if m.group(2):
            top[key] = age
    panels = []
    for key in sorted(cells):
        by_year = cells[key]
        years = sorted(by_year)
        max_age = top.get(key, max(max(v) for v in by_year.values()))
        for y in range(years[0], years[-1] + 1):
            if y not in by_year:
                raise GapInYears(y)
            if set(by_year[y]) != set(range(max_age + 1)):
                raise MissingAge(f"{key} year {y}")
        counts = [[by_year[y][x] for x in range(max_age + 1)] for y in years]
        panels.append(PopulationPanel(key[0], key[1], years, counts, AgeGrid(max_age)))
    return panels


def write_hmd_table(female, male, stream: TextIO, title: str = ""):
    """Write paired panels (population or mortality) as a ``Year Age Female Male Total`` table."""
    if not np.array_equal(female.years, male.years) or female.age_grid != male.age_grid:
        raise ShapeMismatch("female and male panels differ in years or ages")
    fv = female.counts if isinstance(female, PopulationPanel) else female.rates
    mv = male.counts if isinstance(male, PopulationPanel) else male.rates
    if title:
        stream.write(title + "\n\n")
    stream.write("Year Age Female Male Total\n")
    labels = female.age_grid.labels
    for i, y in enumerate(female.years):
        for x, lab in enumerate(labels):
            f, m = float(fv[i, x]), float(mv[i, x])
            stream.write(f"{y} {lab} {f!r} {m!r} {f + m!r}\n")


# --------------------------------------------------------------------------
# grouping


def aggregate_regions(panels: Sequence[PopulationPanel], region: str = NATIONAL_CODE) -> PopulationPanel:
    """Elementwise sum of regional panels, added in ascending region order."""
    if not panels:
        raise ShapeMismatch("no panels to aggregate")
    ref = panels[0]
    for p in panels[1:]:
        if p.sex != ref.sex:
            raise ShapeMismatch("panels differ in sex")
        if p.age_grid != ref.age_grid:
            raise ShapeMismatch("panels differ in age grid")
        if not np.array_equal(p.years, ref.years):
            raise ShapeMismatch("panels differ in years")
    ordered = sorted(panels, key=lambda p: (p.region, p.counts.tobytes()))
    acc = np.zeros_like(ref.counts)
    for p in ordered:
        acc = acc + p.counts
    return PopulationPanel(region, ref.sex, ref.years, acc, ref.age_grid)


def intersect_years(panels: Sequence[PopulationPanel]) -> list[PopulationPanel]:
    first = max(p.first_year for p in panels)
    last = min(p.last_year for p in panels)
    if first > last:
        raise ShapeMismatch("panels share no common years")
    return [p.restrict(first, last) for p in panels]


# --------------------------------------------------------------------------
# synthetic fixtures


def default_base_curve(max_age: int = 100, size: float = 100_000.0) -> np.ndarray:
    """A smooth, strictly positive age profile, declining at old ages."""
    x = np.arange(max_age + 1, dtype=float)
    curve = size * (1.0 + 0.15 * np.sin(x / 9.0)) * np.exp(-((np.maximum(x - 55, 0) / 25.0) ** 2))
    curve[-1] = curve[-2] * 0.5
    return curve


def _ratio_vector(r, max_age):
    r = np.broadcast_to(np.asarray(r, dtype=float), (max_age,)).copy()
    if np.any(r <= 0):
        raise ValidationError("growth ratios must be positive")
    return r


def _roll(prev: np.ndarray, ccr: np.ndarray) -> np.ndarray:
    nxt = np.empty_like(prev)
    nxt[1:-1] = ccr[:-1] * prev[:-2]
    nxt[-1] = ccr[-1] * (prev[-2] + prev[-1])
    return nxt


def synth_population(
    r=1.0,
    base=None,
    n: int = 51,
    sigma: float = 0.0,
    seed: int = 0,
    cwr: float | None = None,
    start_year: int = 1971,
    region: str = "SYN",
    sex: Sex | str = Sex.FEMALE,
    max_age: int = 100,
) -> PopulationPanel:
    """Generate a panel where each cohort grows by ``r`` per year.

    ``r`` is a scalar or a per-target-age vector (ages 1..max_age). With
    ``sigma == 0``, ``P[t, x+1] == r * P[t-1, x]`` holds exactly and infants
    are ``cwr`` times the panel's own ages 15-49. Noise is multiplicative,
    ``exp(sigma * N(0, 1))`` per cell.
    """
    if n < 3:
        raise ValidationError("need n >= 3 years")
    if max_age < 50:
        raise ValidationError("max_age must be at least 50 so ages 15-49 exist")
    base = default_base_curve(max_age) if base is None else np.asarray(base, dtype=float)
    ratios = _ratio_vector(r, max_age)
    lo, hi = 15, min(49, max_age)
    if cwr is None:
        cwr = base[0] / base[lo : hi + 1].sum()
    rng = np.random.default_rng(seed)
    counts = np.empty((n, max_age + 1))
    counts[0] = base
    counts[0, 0] = cwr * base[lo : hi + 1].sum()
    for t in range(1, n):
        eps = rng.standard_normal(max_age + 1) if sigma > 0 else np.zeros(max_age + 1)
        nxt = _roll(counts[t - 1], ratios * np.exp(sigma * eps[1:]))
        nxt[0] = cwr * np.exp(sigma * eps[0]) * nxt[lo : hi + 1].sum()
        counts[t] = nxt
    years = np.arange(start_year, start_year + n)
    return PopulationPanel(region, sex, years, counts, AgeGrid(max_age))


def synth_pair(
    r_female=1.0,
    r_male=None,
    base_female=None,
    base_male=None,
    n: int = 51,
    sigma: float = 0.0,
    seed: int = 0,
    cwr: float | None = None,
    birth_sex_ratio: float = 1.057,
    start_year: int = 1971,
    region: str = "SYN",
    max_age: int = 100,
) -> tuple[PopulationPanel, PopulationPanel]:
    """Female and male panels sharing one infant equation.

    Infants are ``cwr`` times women aged 15-49 of the same year, split by the
    birth sex ratio, so the child/woman ratio of the output equals ``cwr``
    whenever ``sigma == 0``.
    """
    if n < 3:
        raise ValidationError("need n >= 3 years")
    if max_age < 50:
        raise ValidationError("max_age must be at least 50 so ages 15-49 exist")
    bf = default_base_curve(max_age) if base_female is None else np.asarray(base_female, dtype=float)
    bm = bf * 1.02 if base_male is None else np.asarray(base_male, dtype=float)
    rf = _ratio_vector(r_female, max_age)
    rm = rf if r_male is None else _ratio_vector(r_male, max_age)
    lo, hi = 15, min(49, max_age)
    if cwr is None:
        cwr = (bf[0] + bm[0]) / bf[lo : hi + 1].sum()
    male_share = birth_sex_ratio / (1.0 + birth_sex_ratio)
    rng = np.random.default_rng(seed)
    f = np.empty((n, max_age + 1))
    m = np.empty((n, max_age + 1))
    f[0], m[0] = bf, bm
    total0 = cwr * bf[lo : hi + 1].sum()
    m[0, 0], f[0, 0] = total0 * male_share, total0 * (1.0 / (1.0 + birth_sex_ratio))
    p = max_age + 1
    for t in range(1, n):
        if sigma > 0:
            ef, em, e0 = rng.standard_normal(p), rng.standard_normal(p), rng.standard_normal()
        else:
            ef, em, e0 = np.zeros(p), np.zeros(p), 0.0
        f[t] = _roll(f[t - 1], rf * np.exp(sigma * ef[1:]))
        m[t] = _roll(m[t - 1], rm * np.exp(sigma * em[1:]))
        total = cwr * np.exp(sigma * e0) * f[t, lo : hi + 1].sum()
        m[t, 0] = total * male_share
        f[t, 0] = total * (1.0 / (1.0 + birth_sex_ratio))
    years = np.arange(start_year, start_year + n)
    grid = AgeGrid(max_age)
    return (
        PopulationPanel(region, Sex.FEMALE, years, f, grid),
        PopulationPanel(region, Sex.MALE, years, m, grid),
    )


def synth_mortality(
    n: int = 51,
    decline: float = 0.02,
    sigma: float = 0.0,
    seed: int = 0,
    start_year: int = 1971,
    region: str = "SYN",
    sex: Sex | str = Sex.FEMALE,
    max_age: int = 100,
    level: float = 1.0,
) -> MortalityPanel:
    """Gompertz-Makeham rates declining by ``decline`` per year at every age."""
    x = np.arange(max_age + 1, dtype=float)
    base = level * (0.0005 + 0.00003 * np.exp(0.095 * x))
    base[0] = level * 0.004
    rng = np.random.default_rng(seed)
    t = np.arange(n)[:, None]
    noise = np.exp(sigma * rng.standard_normal((n, max_age + 1))) if sigma > 0 else 1.0
    rates = base[None, :] * (1.0 - decline) ** t * noise
    years = np.arange(start_year, start_year + n)
    return MortalityPanel(region, sex, years, rates, AgeGrid(max_age))
