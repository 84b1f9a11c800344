"""Command-line pipeline: ingest, synth, project, pension-age, welfare.

Exit codes: 0 success, 1 internal error, 2 validation error, 3 unsatisfiable
pension threshold.
"""

from __future__ import annotations

import argparse
import logging
import sys
import zlib
from pathlib import Path

import numpy as np

from . import svg
from .config import RunConfig, format_config, load_config
from .demog_data import (
    NATIONAL_CODE,
    AnnualSeries,
    Sex,
    aggregate_regions,
    intersect_years,
    parse_mortality_file,
    parse_population_file,
    read_annual_series,
    read_population_csv,
    synth_mortality,
    synth_pair,
    write_hmd_table,
    write_population_csv,
)
from .errors import HpftsError, Unsatisfiable, ValidationError
from .hp_engine import (
    ProjectionResult,
    aggregate_results,
    project,
    pyramid_export,
    simulate_paths,
    write_path_quantiles_csv,
    write_projection_csv,
    write_totals_csv,
)
from .pension import (
    PensionAgeScheme,
    scheme_bounds,
    solve_scheme,
    write_scheme_csv,
)
from .ratios import compute_ccr, write_ccr_csv
from .welfare import HOUSEHOLDS, forecast_pension_rates, welfare_table, write_pv_csv, write_rate_forecast_csv

log = logging.getLogger("hpfts")

EXIT_OK, EXIT_INTERNAL, EXIT_VALIDATION, EXIT_UNSATISFIABLE = 0, 1, 2, 3
AU_REGIONS = ("NSW", "VIC", "QLD", "SA", "WA", "TAS", "NT", "ACT")
NATIONAL_MODEL = NATIONAL_CODE + "_national"


# --------------------------------------------------------------------------
# loading


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    return cfg.updated(
        seed=args.seed, out_dir=args.out, mode=args.mode, horizon_years=args.horizon,
        n_paths=args.paths, alpha=args.alpha, oadr_target_percent=args.oadr_target, workers=args.workers,
    )


def _region_paths(tokens) -> dict[str, Path]:
    """``REGION=PATH`` tokens, or bare paths named ``REGION_*``."""
    out = {}
    for tok in tokens:
        if "=" in tok:
            reg, path = tok.split("=", 1)
        else:
            path = tok
            reg = Path(tok).name.split("_")[0].split(".")[0]
        if reg in out:
            raise ValidationError(f"region {reg} given twice")
        out[reg] = Path(path)
    return out


def load_populations(cfg: RunConfig) -> dict:
    """region -> (female, male) panels restricted to their common years."""
    if cfg.bundle_dir:
        panels = read_population_csv(Path(cfg.bundle_dir, "population.csv").read_text())
        pairs: dict = {}
        for p in panels:
            pairs.setdefault(p.region, {})[p.sex] = p
        try:
            regions = {r: (d[Sex.FEMALE], d[Sex.MALE]) for r, d in pairs.items()}
        except KeyError:
            raise ValidationError("bundle lacks a sex for some region") from None
    elif cfg.population_files:
        regions = {r: parse_population_file(Path(p).read_text(), r) for r, p in cfg.population_files.items()}
    else:
        raise ValidationError("config names no population data (population_file.<REGION> or bundle_dir)")
    names = sorted(regions)
    flat = intersect_years([p for r in names for p in regions[r]])
    return {r: (flat[2 * i], flat[2 * i + 1]) for i, r in enumerate(names)}


def load_mortality(cfg: RunConfig) -> dict:
    if not cfg.mortality_files:
        raise ValidationError("config names no mortality data (mortality_file.<REGION>)")
    return {r: parse_mortality_file(Path(p).read_text(), r) for r, p in sorted(cfg.mortality_files.items())}


def load_rates(cfg: RunConfig) -> dict[str, AnnualSeries]:
    if not cfg.pension_rates_file:
        raise ValidationError("config names no pension_rates_file")
    series = read_annual_series(Path(cfg.pension_rates_file).read_text())
    missing = [h for h in HOUSEHOLDS if h not in series]
    if missing:
        raise ValidationError(f"pension rate file lacks columns {missing}")
    return series


def _write(path: Path, writer, *a, **kw):
    with open(path, "w", newline="") as fh:
        writer(*a, fh, **kw)


# --------------------------------------------------------------------------
# synth


def synth_dataset(out: Path, regions=AU_REGIONS, n: int = 53, sigma: float = 0.005, seed: int = 0,
                  start_year: int = 1971) -> Path:
    """Write an AHMD-style synthetic dataset plus a run config; returns the config path."""
    out.mkdir(parents=True, exist_ok=True)
    x = np.arange(101.0)
    m = np.minimum(0.0003 + 0.000025 * np.exp(0.1 * x), 0.6)
    m[0] = 0.004
    cfg_lines = []
    for i, reg in enumerate(regions):
        rng = np.random.default_rng([seed, zlib.crc32(reg.encode())])
        g = 0.02 + rng.uniform(-0.003, 0.003)
        cwr = 0.055 + rng.uniform(-0.003, 0.003)
        mig = 1 + (0.006 + rng.uniform(-0.002, 0.002)) * np.exp(-(((x[1:] - 27) / 8) ** 2))
        r = np.exp(-m[:-1]) * mig
        size = 1000.0 * rng.uniform(0.5, 8.0)
        base = size * np.exp(-np.cumsum(np.r_[0.0, m[:-1]])) * np.exp(-g * x)
        f, ml = synth_pair(r, r * np.exp(-0.3 * m[:-1]), base, base * 1.03, n=n, sigma=sigma,
                           seed=seed * 1000 + i, cwr=cwr, start_year=start_year, region=reg)
        pop_path = out / f"{reg}_population.txt"
        with open(pop_path, "w") as fh:
            write_hmd_table(f, ml, fh, f"{reg}, Population size (synthetic)")
        mf = synth_mortality(n, 0.015, sigma, seed * 1000 + i, start_year, reg, Sex.FEMALE, level=0.9 + 0.1 * i / len(regions))
        mm = synth_mortality(n, 0.015, sigma, seed * 1000 + i + 500, start_year, reg, Sex.MALE, level=1.4)
        mort_path = out / f"{reg}_mortality.txt"
        with open(mort_path, "w") as fh:
            write_hmd_table(mf, mm, fh, f"{reg}, Death rates (synthetic)")
        cfg_lines += [f"population_file.{reg} = {pop_path.name}", f"mortality_file.{reg} = {mort_path.name}"]
    rng = np.random.default_rng(seed)
    years = np.arange(start_year, start_year + n)
    single = 12000.0 + 180.0 * np.arange(n) + np.cumsum(rng.normal(0, 60, n))
    couple = 0.754 * single + rng.normal(0, 20, n)
    with open(out / "pension_rates.csv", "w") as fh:
        fh.write("year,single,couple_each\n")
        for y, s, c in zip(years, single, couple):
            fh.write(f"{y},{s:.2f},{c:.2f}\n")
    cfg_lines += ["pension_rates_file = pension_rates.csv", f"base_year = {start_year + n - 1}", "out_dir = out"]
    cfg_path = out / "run.cfg"
    cfg_path.write_text("# synthetic dataset\n" + "\n".join(cfg_lines) + "\n")
    return cfg_path


def cmd_synth(args) -> int:
    regions = tuple(args.regions.split(",")) if args.regions else AU_REGIONS
    seed = 0 if args.seed is None else args.seed
    path = synth_dataset(Path(args.out or "synth"), regions, args.years, args.sigma, seed)
    print(f"wrote synthetic dataset for {len(regions)} regions; config {path}")
    return EXIT_OK


# --------------------------------------------------------------------------
# ingest


def cmd_ingest(args) -> int:
    files = _region_paths(args.files)
    regions = {}
    for reg, path in sorted(files.items()):
        regions[reg] = parse_population_file(path.read_text(), reg, args.cutoff)
    out = Path(args.out or "bundle")
    out.mkdir(parents=True, exist_ok=True)
    names = sorted(regions)
    flat = intersect_years([p for r in names for p in regions[r]])
    pairs = {r: (flat[2 * i], flat[2 * i + 1]) for i, r in enumerate(names)}
    with open(out / "population.csv", "w", newline="") as fh:
        write_population_csv([p for r in names for p in pairs[r]], fh)
    rows = [(r, *pairs[r]) for r in names]
    if len(names) > 1:
        rows.append((NATIONAL_CODE, aggregate_regions([pairs[r][0] for r in names]),
                     aggregate_regions([pairs[r][1] for r in names])))
    lines = ["region,first_year,last_year,n_ages,total_female_last,total_male_last,total_last"]
    for reg, f, m in rows:
        tf, tm = float(f.totals()[-1]), float(m.totals()[-1])
        lines.append(f"{reg},{f.first_year},{f.last_year},{f.age_grid.size},{tf!r},{tm!r},{tf + tm!r}")
    (out / "summary.csv").write_text("\n".join(lines) + "\n")
    for reg, f, m in rows:
        print(f"{reg:>6}  {f.first_year}-{f.last_year}  ages 0-{f.age_grid.label(f.age_grid.max_age)}  "
              f"total {float(f.totals()[-1] + m.totals()[-1]):,.0f}")
    return EXIT_OK


# --------------------------------------------------------------------------
# project


def run_projections(cfg: RunConfig, pops: dict, with_paths: bool = True) -> dict[str, ProjectionResult]:
    pcfg = cfg.projection()
    out = {}
    for reg in sorted(pops):
        f, m = pops[reg]
        log.info("projecting %s", reg)
        out[reg] = simulate_paths(f, m, pcfg) if with_paths else project(f, m, pcfg)
    return out


def _national_history(pops: dict):
    names = sorted(pops)
    if len(names) == 1:
        return pops[names[0]]
    return (aggregate_regions([pops[r][0] for r in names]), aggregate_regions([pops[r][1] for r in names]))


def _aggregate(results: dict) -> ProjectionResult:
    if len(results) == 1:
        return next(iter(results.values()))
    return aggregate_results(list(results.values()), NATIONAL_CODE)


def _fan_chart(result: ProjectionResult, hist_f, hist_m) -> svg.Chart:
    ch = svg.Chart(f"{result.region} total population", "year", "persons")
    obs = hist_f.totals() + hist_m.totals()
    fc = result.both_sexes().sum(axis=1)
    if result.paths is not None:
        tot = result.paths.sum(axis=(1, 3))
        lo, hi = np.quantile(tot, [result.alpha / 2, 1 - result.alpha / 2], axis=0)
        ch.band("interval", result.years, lo, hi)
    ch.line("observed", hist_f.years, obs, "#000000")
    ch.line("forecast", result.years, fc, svg.RAMP[9])
    return ch


def _pyramid_chart(result: ProjectionResult, year: int) -> svg.Chart:
    rows = pyramid_export(result, year)
    ages = np.arange(len(rows))
    ch = svg.Chart(f"{result.region} population by age, {year}", "persons (female left, male right)", "age")
    ch.line("female", [-r[1] for r in rows], ages, svg.RAMP[0])
    ch.line("male", [r[2] for r in rows], ages, svg.RAMP[9])
    return ch


def cmd_project(args) -> int:
    cfg = _config(args)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pops = load_populations(cfg)
    results = run_projections(cfg, pops)
    hist_f, hist_m = _national_history(pops)
    agg = _aggregate(results)
    ordered = [results[r] for r in sorted(results)]
    if len(results) > 1:
        national = project(hist_f.with_region(NATIONAL_MODEL), hist_m.with_region(NATIONAL_MODEL), cfg.projection())
        ordered += [agg, national]
    else:
        national = None
    history = {r: pops[r] for r in pops}
    history[agg.region] = (hist_f, hist_m)
    _write(out / "projection.csv", write_projection_csv, ordered)
    _write(out / "totals.csv", write_totals_csv, ordered, history=history)
    _write(out / f"path_quantiles_{agg.region}.csv", write_path_quantiles_csv, agg)
    with open(out / "ccr.csv", "w", newline="") as fh:
        write_ccr_csv(agg.region, [compute_ccr(hist_f), compute_ccr(hist_m)], fh)

    _fan_chart(agg, hist_f, hist_m).save(out / "totals_fan")
    for year in (int(agg.years[0]), int(agg.years[-1])):
        _pyramid_chart(agg, year).save(out / f"pyramid_{year}")
    ages = agg.age_grid.ages
    for sex, hist in ((Sex.FEMALE, hist_f), (Sex.MALE, hist_m)):
        tag = sex.value.lower()
        svg.rainbow(f"{agg.region} {tag} population forecasts", ages, agg.point(sex),
                    [str(y) for y in agg.years]).save(out / f"population_rainbow_{tag}")
        ccr = compute_ccr(hist)
        svg.rainbow(f"{agg.region} {tag} cohort change ratios", ccr.target_ages, ccr.values,
                    [str(y) for y in ccr.years]).save(out / f"ccr_rainbow_{tag}")
    if national is not None:
        a_tot = agg.both_sexes().sum(axis=1)
        n_tot = national.both_sexes().sum(axis=1)
        lines = ["year,aggregated_total,national_total,difference"]
        for y, a, n in zip(agg.years, a_tot, n_tot):
            lines.append(f"{y},{float(a)!r},{float(n)!r},{float(a - n)!r}")
        (out / "national_vs_aggregated.csv").write_text("\n".join(lines) + "\n")
        ch = svg.Chart("Aggregated regional vs national forecasts", "year", "persons")
        ch.line("aggregated", agg.years, a_tot, svg.RAMP[9])
        ch.line("national", national.years, n_tot, svg.RAMP[0], dashed=True)
        ch.save(out / "national_vs_aggregated_chart")
    (out / "run.cfg").write_text(format_config(cfg))
    print(f"projected {len(results)} regions for {cfg.horizon_years} years; outputs in {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# pension-age


def _scheme_chart(schemes: list[PensionAgeScheme]) -> svg.Chart:
    ch = svg.Chart("Minimum pension age meeting the OADR threshold", "year", "pension age (years)")
    by = {s.variant: s for s in schemes}
    if "lower_bound" in by and "upper_bound" in by:
        lo, hi = by["lower_bound"], by["upper_bound"]
        ch.band("bounds", lo.years, lo.months / 12.0, hi.months / 12.0)
    p = by["point"]
    ch.line("point", p.years, p.months / 12.0, svg.RAMP[9])
    return ch


def cmd_pension(args) -> int:
    cfg = _config(args)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pops = load_populations(cfg)
    agg = _aggregate(run_projections(cfg, pops))
    kw = dict(O_star=cfg.oadr_target_percent, start=cfg.start_pension_age_months,
              max_months=cfg.max_pension_age_months)
    schemes = [solve_scheme(agg, **kw)]
    if agg.paths is not None and agg.paths.shape[0] >= 100:
        schemes += list(scheme_bounds(agg, **kw))
    else:
        log.warning("fewer than 100 paths; writing the point scheme only")
    _write(out / "scheme.csv", write_scheme_csv, schemes)
    _scheme_chart(schemes).save(out / "scheme_chart")
    p = schemes[0]
    print(f"pension age {p.months[0] / 12:.2f} in {p.years[0]} rising to {p.months[-1] / 12:.2f} in {p.years[-1]}")
    return EXIT_OK


# --------------------------------------------------------------------------
# welfare


def _read_scheme(path: Path) -> dict[int, int]:
    ages = {}
    for line in path.read_text().splitlines()[1:]:
        y, months, _, _, variant = line.split(",")
        if variant == "point":
            ages[int(y)] = int(months)
    if not ages:
        raise ValidationError(f"{path} has no point scheme rows")
    return ages


def cmd_welfare(args) -> int:
    cfg = _config(args)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mortality = load_mortality(cfg)
    series = load_rates(cfg)
    pension_ages = cfg.start_pension_age_months
    if args.scheme:
        scheme = _read_scheme(Path(args.scheme))
        first, last = min(scheme), max(scheme)

        def pension_ages(year):
            return scheme[min(max(year, first), last)] if year >= first else cfg.start_pension_age_months

    horizon = max(max(cfg.entry_years) + 80 - int(s.years[-1]) for s in series.values())
    fcs = {h: forecast_pension_rates(series[h], max(horizon, 1), cfg.n_paths, cfg.alpha, cfg.seed)
           for h in HOUSEHOLDS}
    table = welfare_table(mortality, fcs, cfg.entry_years, HOUSEHOLDS, pension_ages, cfg.real_rate_fraction,
                          cfg.base_year, cfg.n_components, cfg.pv_method, cfg.seed)
    _write(out / "pv_table.csv", write_pv_csv, table)
    _write(out / "rate_forecast.csv", write_rate_forecast_csv, [fcs[h] for h in HOUSEHOLDS])
    ch = svg.Chart("Age pension rates", "year", "AUD per year")
    shown = 30
    for i, h in enumerate(HOUSEHOLDS):
        fc = fcs[h]
        color = svg.RAMP[9 if i == 0 else 1]
        ch.band(f"{h} interval", fc.years[:shown], fc.lower[:shown], fc.upper[:shown])
        ch.line(f"{h} observed", fc.history.years, fc.history.values, color)
        ch.line(f"{h} forecast", fc.years[:shown], fc.point[:shown], color, dashed=True)
    ch.save(out / "rate_forecast_chart")
    print(f"wrote {len(table.rows)} present values to {out / 'pv_table.csv'}")
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hpfts", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def shared(p):
        p.add_argument("--config")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--mode", choices=("univariate", "multivariate"))
        p.add_argument("--horizon", type=int)
        p.add_argument("--paths", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--oadr-target", type=float, dest="oadr_target")
        p.add_argument("--workers", type=int)
        return p

    p = shared(sub.add_parser("ingest", help="validate population files into a bundle"))
    p.add_argument("files", nargs="+", help="REGION=PATH or PATH named REGION_*")
    p.add_argument("--cutoff", type=int, default=100)
    p.set_defaults(func=cmd_ingest)

    p = shared(sub.add_parser("synth", help="write a synthetic dataset"))
    p.add_argument("--regions")
    p.add_argument("--years", type=int, default=53)
    p.add_argument("--sigma", type=float, default=0.005)
    p.set_defaults(func=cmd_synth)

    p = shared(sub.add_parser("project", help="project populations"))
    p.set_defaults(func=cmd_project)

    p = shared(sub.add_parser("pension-age", help="solve the minimum pension-age scheme"))
    p.set_defaults(func=cmd_pension)

    p = shared(sub.add_parser("welfare", help="lifetime pension present values"))
    p.add_argument("--scheme", help="scheme.csv from pension-age; default keeps the start age")
    p.set_defaults(func=cmd_welfare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except Unsatisfiable as exc:
        print(f"unsatisfiable: {exc}", file=sys.stderr)
        return EXIT_UNSATISFIABLE
    except (ValidationError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except HpftsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception:  # noqa: BLE001
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
