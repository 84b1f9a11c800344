"""Old-age dependency ratio and the minimal sustainable pension-age scheme."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from .errors import Unsatisfiable, ValidationError, ZeroDenominator
from .hp_engine import ProjectionResult

DEFAULT_OADR_TARGET = 23.0
MIN_MONTHS = 180
MAX_MONTHS = 1200
STATUTORY_MONTHS = 67 * 12


@dataclass(frozen=True, order=True)
class PensionAge:
    months: int

    def __post_init__(self):
        if not MIN_MONTHS <= self.months <= MAX_MONTHS:
            raise ValidationError(f"pension age {self.months} months outside [{MIN_MONTHS}, {MAX_MONTHS}]")

    @classmethod
    def from_years(cls, years: int, months: int = 0) -> "PensionAge":
        return cls(12 * years + months)

    @property
    def years(self) -> float:
        return self.months / 12.0


@dataclass(frozen=True)
class PensionAgeScheme:
    years: np.ndarray
    months: np.ndarray
    oadr: np.ndarray  # OADR achieved at the scheme age, per year
    variant: str = "point"

    def __post_init__(self):
        if np.any(np.diff(self.months) < 0):
            raise ValidationError("pension-age scheme must be non-decreasing")

    @property
    def ages(self) -> list[PensionAge]:
        return [PensionAge(int(m)) for m in self.months]


def _months(a) -> int:
    return a.months if isinstance(a, PensionAge) else int(a)


def oadr_split(pop, months: int, lower_age: int = 15):
    """(numerator, denominator) persons around a pension age in months.

    The single-year bin containing the pension age is split uniformly: the
    fraction ``(months % 12) / 12`` counts as below the pension age.
    Accepts populations with leading batch dimensions.
    """
    pop = np.asarray(pop, dtype=float)
    b, f = divmod(int(months), 12)
    f = f / 12.0
    p = pop.shape[-1]
    if not lower_age <= b < p:
        raise ValidationError(f"pension age bin {b} outside {lower_age}..{p - 1}")
    below = pop[..., lower_age:b].sum(axis=-1)
    boundary = pop[..., b]
    above = pop[..., b + 1 :].sum(axis=-1)
    return (1.0 - f) * boundary + above, below + f * boundary


def oadr(pop, pension_age, lower_age: int = 15) -> float | np.ndarray:
    """Persons over the pension age per person aged 15 to it, in percent."""
    num, den = oadr_split(pop, _months(pension_age), lower_age)
    if np.any(np.asarray(den) <= 0):
        raise ZeroDenominator(None, None, "no persons between age 15 and the pension age")
    return 100.0 * num / den


def _check_start(start, max_months: int, lower_age: int) -> int:
    if lower_age == 15 and max_months <= MAX_MONTHS:
        start = PensionAge(_months(start)).months
    else:
        start = _months(start)
    if not 12 * lower_age <= start <= max_months:
        raise ValidationError(f"start age {start} months outside [{12 * lower_age}, {max_months}]")
    return start


def _solve(oadr_fn, H: int, target: float, start: int, increment: int, max_months: int):
    """Greedy month search: carry the age forward, raise until OADR <= target."""
    a = start
    months, achieved = [], []
    for h in range(H):
        o = oadr_fn(h, a)
        while o > target:
            if a + increment > max_months:
                raise Unsatisfiable(f"OADR {o:.3f}% exceeds {target}% at the maximum age in horizon step {h + 1}")
            a += increment
            o = oadr_fn(h, a)
        months.append(a)
        achieved.append(o)
    return np.array(months), np.array(achieved)


def solve_scheme(
    projection: ProjectionResult,
    O_star: float = DEFAULT_OADR_TARGET,
    start=STATUTORY_MONTHS,
    increment: int = 1,
    max_months: int = MAX_MONTHS,
    use_paths: bool = True,
    lower_age: int = 15,
) -> PensionAgeScheme:
    """Minimal non-decreasing pension ages meeting ``OADR <= O_star`` each year.

    With simulated paths the OADR is their across-path mean at each candidate
    age; otherwise the point projection is used.
    """
    start = _check_start(start, max_months, lower_age)
    if increment < 1:
        raise ValidationError("increment must be at least one month")
    if use_paths and projection.paths is not None:
        pops = projection.path_both_sexes()  # (B, H, p)

        def fn(h, a):
            return float(np.mean(oadr(pops[:, h], a, lower_age)))
    else:
        pops = projection.both_sexes()

        def fn(h, a):
            return float(oadr(pops[h], a, lower_age))

    months, achieved = _solve(fn, projection.horizon, O_star, start, increment, max_months)
    return PensionAgeScheme(projection.years.copy(), months, achieved, "point")


def scheme_bounds(
    projection: ProjectionResult,
    O_star: float = DEFAULT_OADR_TARGET,
    start=STATUTORY_MONTHS,
    increment: int = 1,
    max_months: int = MAX_MONTHS,
    quantiles: tuple[float, float] = (0.025, 0.975),
    min_paths: int = 100,
    lower_age: int = 15,
) -> tuple[PensionAgeScheme, PensionAgeScheme]:
    """Lower and upper plausible schemes from per-year OADR quantiles over paths."""
    if projection.paths is None or projection.paths.shape[0] < min_paths:
        raise ValidationError(f"need at least {min_paths} simulated paths")
    start = _check_start(start, max_months, lower_age)
    pops = projection.path_both_sexes()
    out = []
    for q, name in zip(quantiles, ("lower_bound", "upper_bound")):
        def fn(h, a, q=q):
            return float(np.quantile(oadr(pops[:, h], a, lower_age), q))

        months, achieved = _solve(fn, projection.horizon, O_star, start, increment, max_months)
        out.append(PensionAgeScheme(projection.years.copy(), months, achieved, name))
    return out[0], out[1]


def write_scheme_csv(schemes: Sequence[PensionAgeScheme], stream: TextIO):
    stream.write("year,pension_age_months,pension_age_years,oadr_at_age,variant\n")
    for s in schemes:
        for y, m, o in zip(s.years, s.months, s.oadr):
            stream.write(f"{y},{int(m)},{int(m) / 12.0!r},{float(o)!r},{s.variant}\n")
