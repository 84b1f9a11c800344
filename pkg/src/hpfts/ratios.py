"""Cohort change ratios, child/woman ratios and the infant split."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

from .demog_data import AgeGrid, PopulationPanel, Sex
from .errors import ShapeMismatch, ValidationError, ZeroDenominator

CHILDBEARING = (15, 49)


@dataclass(frozen=True)
class CcrCurves:
    """``values[t, j]`` is the ratio into target age ``j + 1``.

    ``years`` holds the arrival year ``t`` of each ratio (second observed year
    onward); the last column is the open bin.
    """

    sex: Sex
    years: np.ndarray
    values: np.ndarray
    age_grid: AgeGrid

    @property
    def target_ages(self) -> np.ndarray:
        return np.arange(1, self.age_grid.size)


@dataclass(frozen=True)
class CwrSeries:
    years: np.ndarray
    values: np.ndarray
    childbearing_lo: int = CHILDBEARING[0]
    childbearing_hi: int = CHILDBEARING[1]


@dataclass(frozen=True)
class BirthSexRatio:
    male_per_female: float = 1.057

    def __post_init__(self):
        if not self.male_per_female > 0:
            raise ValidationError("birth sex ratio must be positive")

    @property
    def male_share(self) -> float:
        m = self.male_per_female
        return m / (1.0 + m)

    @property
    def female_share(self) -> float:
        return 1.0 / (1.0 + self.male_per_female)


def cohort_denominators(prev: np.ndarray) -> np.ndarray:
    """Population at t-1 feeding each target age 1..max at t (open bin pooled)."""
    prev = np.asarray(prev, dtype=float)
    den = prev[..., :-1].copy()
    den[..., -1] = prev[..., -2] + prev[..., -1]
    return den


def compute_ccr(panel: PopulationPanel) -> CcrCurves:
    c = panel.counts
    if c.shape[0] < 2:
        raise ValidationError("need at least two years to form cohort change ratios")
    den = cohort_denominators(c[:-1])
    num = c[1:, 1:]
    bad = np.argwhere(den <= 0)
    if bad.size:
        t, j = bad[0]
        raise ZeroDenominator(int(panel.years[t]), int(j))
    return CcrCurves(panel.sex, panel.years[1:].copy(), num / den, panel.age_grid)


def women_childbearing(female_counts: np.ndarray, lo: int = CHILDBEARING[0], hi: int = CHILDBEARING[1]):
    return np.asarray(female_counts, dtype=float)[..., lo : hi + 1].sum(axis=-1)


def compute_cwr(female: PopulationPanel, male: PopulationPanel) -> CwrSeries:
    if not np.array_equal(female.years, male.years) or female.age_grid != male.age_grid:
        raise ShapeMismatch("female and male panels are not aligned")
    women = women_childbearing(female.counts)
    if np.any(women <= 0):
        t = int(np.flatnonzero(women <= 0)[0])
        raise ZeroDenominator(int(female.years[t]), None, f"no women aged 15-49 in {female.years[t]}")
    infants = female.counts[:, 0] + male.counts[:, 0]
    return CwrSeries(female.years.copy(), infants / women)


def infant_forecast(women_15_49: float, cwr: float, bsr: BirthSexRatio = BirthSexRatio()):
    """Return (female, male) infants; the two parts add back to the total."""
    if women_15_49 < 0 or cwr < 0:
        raise ValidationError("infant equation inputs must be non-negative")
    total = women_15_49 * cwr
    male = total * bsr.male_share
    # female as the complement keeps female + male == total
    female = total - male
    return female, male


def write_ccr_csv(region: str, curves: Iterable[CcrCurves], stream: TextIO):
    stream.write("region,sex,year,age,ccr\n")
    for c in curves:
        labels = c.age_grid.labels[1:]
        for i, y in enumerate(c.years):
            for j, lab in enumerate(labels):
                stream.write(f"{region},{c.sex.value},{y},{lab},{float(c.values[i, j])!r}\n")
