import io
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hpfts.demog_data import (
    AgeGrid,
    MortalityPanel,
    PopulationPanel,
    Sex,
    aggregate_regions,
    annualize_half_yearly,
    group_open_age,
    intersect_years,
    parse_mortality_file,
    parse_population_file,
    read_annual_series,
    read_population_csv,
    synth_mortality,
    synth_pair,
    synth_population,
    write_hmd_table,
    write_population_csv,
)
from hpfts.errors import GapInYears, MalformedRow, MissingAge, NegativeCount, ShapeMismatch, ValidationError

TOY = """\
Toy region, Population size

Year Age Female Male Total
2000 0 10 11 21
2000 1 12 13 25
2000 2+ 5 4 9
2001 0 9 10 19
2001 1 10 12 22
2001 2+ 7 6 13
"""


def hmd_text(years, top=110, seed=0, drop_year=None):
    rng = np.random.default_rng(seed)
    lines = ["Year Age Female Male Total"]
    cells = {}
    for y in years:
        if y == drop_year:
            continue
        for a in range(top + 1):
            f, m = rng.uniform(0, 1000, 2).round(2)
            cells[(y, a)] = (f, m)
            lab = f"{a}+" if a == top else str(a)
            lines.append(f"{y} {lab} {f} {m} {f + m:.2f}")
    return "\n".join(lines) + "\n", cells


def test_toy_table_passes_through():
    f, m = parse_population_file(TOY, "TOY")
    assert f.counts.shape == (2, 3) and m.counts.shape == (2, 3)
    assert f.age_grid.max_age == 2 and f.age_grid.label(2) == "2+"
    assert f.counts[1].tolist() == [9, 10, 7]
    assert m.counts[0].tolist() == [11, 13, 4]
    assert f.sex is Sex.FEMALE and m.sex is Sex.MALE


def test_cutoff_sums_tail_rows():
    text, cells = hmd_text(range(1990, 1993))
    f, m = parse_population_file(text, "X", cutoff=100)
    assert f.age_grid.size == 101
    for i, y in enumerate(range(1990, 1993)):
        tail_f = sum(cells[(y, a)][0] for a in range(100, 111))
        tail_m = sum(cells[(y, a)][1] for a in range(100, 111))
        assert f.counts[i, 100] == pytest.approx(tail_f, rel=1e-12)
        assert m.counts[i, 100] == pytest.approx(tail_m, rel=1e-12)
        assert f.counts[i, 57] == cells[(y, 57)][0]


def test_missing_year_is_named():
    text, _ = hmd_text(range(1990, 2001), top=5, drop_year=1995)
    with pytest.raises(GapInYears) as exc:
        parse_population_file(text, "X")
    assert exc.value.year == 1995
    assert "1995" in str(exc.value)


@pytest.mark.parametrize(
    "bad, error",
    [
        ("2000 1 abc 13 25", MalformedRow),
        ("2000 1 -12 13 1", NegativeCount),
    ],
)
def test_row_errors(bad, error):
    text = TOY.replace("2000 1 12 13 25", bad)
    with pytest.raises(error):
        parse_population_file(text, "TOY")


def test_missing_age():
    text = TOY.replace("2001 1 10 12 22\n", "")
    with pytest.raises(MissingAge):
        parse_population_file(text, "TOY")


def test_total_mismatch_warns_only():
    text = TOY.replace("2000 0 10 11 21", "2000 0 10 11 25")
    with pytest.warns(UserWarning):
        f, _ = parse_population_file(text, "TOY")
    assert f.counts[0, 0] == 10


def test_comma_delimited_and_comments():
    text = "# comment\nYear,Age,Female,Male,Total\n2000,0,1,2,3\n2000,1+,4,5,9\n"
    f, m = parse_population_file(text, "C")
    assert f.counts.tolist() == [[1, 4]]


def test_territorial_minus_rows_skipped():
    text = TOY + "2001- 0 1 1 2\n"
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        # the "-" row is dropped silently; duplicate years would otherwise fail
        f, _ = parse_population_file(text.replace("2001- 0 1 1 2", "2001- 0 1 1 2"), "T")
    assert f.n_years == 2


def test_panel_invariants():
    with pytest.raises(NegativeCount):
        PopulationPanel("R", "Female", [2000], [[1.0, -1.0]], AgeGrid(1))
    with pytest.raises(ShapeMismatch):
        PopulationPanel("R", "Female", [2000], [[1.0, 1.0, 1.0]], AgeGrid(1))
    with pytest.raises(GapInYears):
        PopulationPanel("R", "Female", [2000, 2002], [[1.0, 1.0]] * 2, AgeGrid(1))
    with pytest.raises(ValidationError):
        AgeGrid(max_age=0)
    assert Sex("male") is Sex.MALE


def test_aggregate_examples():
    p = synth_population(1.0, n=4)
    agg = aggregate_regions([p, p.with_region("B")])
    np.testing.assert_array_equal(agg.counts, 2 * p.counts)
    assert agg.region == "AUS"
    ones = [PopulationPanel(r, "Female", [2000, 2001], np.ones((2, 3)), AgeGrid(2)) for r in "ABCDEFGH"]
    assert np.all(aggregate_regions(ones).counts == 8)
    with pytest.raises(ShapeMismatch):
        aggregate_regions([p, p.restrict(1972, 1974)])


@given(st.permutations(list(range(5))), st.integers(0, 2**31 - 1))
def test_aggregate_is_order_free(perm, seed):
    rng = np.random.default_rng(seed)
    panels = [PopulationPanel(f"R{i}", "Male", [2000, 2001], rng.uniform(0, 1e6, (2, 4)), AgeGrid(3))
              for i in range(5)]
    a = aggregate_regions(panels)
    b = aggregate_regions([panels[i] for i in perm])
    # associativity: aggregate of partial aggregates, regrouped in canonical order
    assert a.counts.tobytes() == b.counts.tobytes()


@given(arrays(np.float64, (3, 12), elements=st.floats(0, 1e7)), st.integers(1, 11))
def test_grouping_preserves_totals(values, max_age):
    grouped = group_open_age(values, max_age)
    assert grouped.shape == (3, max_age + 1)
    np.testing.assert_array_equal(grouped[:, :max_age], values[:, :max_age])
    np.testing.assert_allclose(grouped.sum(axis=1), values.sum(axis=1), rtol=1e-12)


@given(st.integers(0, 2**31 - 1), st.integers(1, 8), st.integers(1, 5))
def test_csv_round_trip_is_bit_exact(seed, max_age, n):
    rng = np.random.default_rng(seed)
    panels = [PopulationPanel("R", s, range(1990, 1990 + n), rng.uniform(0, 1e6, (n, max_age + 1)) / 7,
                              AgeGrid(max_age)) for s in ("Female", "Male")]
    buf = io.StringIO()
    write_population_csv(panels, buf)
    back = read_population_csv(buf.getvalue())
    assert len(back) == 2
    for a, b in zip(panels, back):
        assert a.counts.tobytes() == b.counts.tobytes()
        assert a.sex == b.sex and np.array_equal(a.years, b.years)
    assert "100+" not in buf.getvalue() or max_age == 100


def test_hmd_writer_round_trip():
    f, m = synth_pair(1.01, n=5, sigma=0.02, seed=1)
    buf = io.StringIO()
    write_hmd_table(f, m, buf, "title line")
    f2, m2 = parse_population_file(buf.getvalue(), "SYN")
    assert f2.counts.tobytes() == f.counts.tobytes()
    assert m2.counts.tobytes() == m.counts.tobytes()


def test_synth_examples():
    p = synth_population(1.0, n=6)
    # unit ratios: each cohort keeps its size as it ages
    np.testing.assert_array_equal(p.counts[1:, 1:-1], p.counts[:-1, :-2])
    g = synth_population(1.02, n=6)
    ratio = g.counts[1:, 1:-1] / g.counts[:-1, :-2]
    np.testing.assert_allclose(ratio, 1.02, rtol=1e-14)
    a = synth_population(1.01, sigma=0.05, seed=9)
    b = synth_population(1.01, sigma=0.05, seed=9)
    assert a.counts.tobytes() == b.counts.tobytes()
    with pytest.raises(ValidationError):
        synth_population(1.0, n=2)
    with pytest.raises(ValidationError):
        synth_population(-1.0)
    with pytest.raises(ValidationError):
        synth_pair(1.0, max_age=20)


def test_intersect_years():
    p = synth_population(1.0, n=10)
    q = synth_population(1.0, n=20, start_year=1975, region="B")
    a, b = intersect_years([p, q])
    assert a.first_year == 1975 and b.last_year == 1980


def test_mortality_open_bin_is_mean_or_exposure_weighted():
    lines, elines = ["Year Age Female Male Total"], ["Year Age Female Male Total"]
    for a in range(4):
        lab = f"{a}+" if a == 3 else str(a)
        lines.append(f"2000 {lab} {0.1 * (a + 1)} {0.2 * (a + 1)} .")
        elines.append(f"2000 {lab} {a + 1} 1 .")
    f, m = parse_mortality_file("\n".join(lines), "X", cutoff=2)
    assert f.rates[0, 2] == pytest.approx(0.35)
    f, _ = parse_mortality_file("\n".join(lines), "X", cutoff=2, exposures="\n".join(elines))
    assert f.rates[0, 2] == pytest.approx((0.3 * 3 + 0.4 * 4) / 7)
    with pytest.raises(NegativeCount):
        MortalityPanel("X", "Female", [2000], [[0.1, -0.1]], AgeGrid(1))


def test_mortality_dot_is_zero():
    text = "Year Age Female Male Total\n2000 0 . 0.1 .\n2000 1+ 0.2 0.2 .\n"
    f, _ = parse_mortality_file(text, "X")
    assert f.rates[0, 0] == 0.0


def test_annual_series_and_half_yearly():
    s = read_annual_series("year,single,couple_each\n2000,10,7.5\n2001,11,8\n")
    assert s["single"].value(2001) == 11 and s["couple_each"].values.tolist() == [7.5, 8]
    with pytest.raises(GapInYears):
        read_annual_series("year,a\n2000,1\n2002,2\n")
    np.testing.assert_array_equal(annualize_half_yearly([2000], [[100, 102]]), [2626])


def test_synth_mortality_declines():
    p = synth_mortality(n=5, decline=0.02)
    np.testing.assert_allclose(p.rates[1:] / p.rates[:-1], 0.98, rtol=1e-13)
