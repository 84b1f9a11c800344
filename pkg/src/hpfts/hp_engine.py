"""Hamilton-Perry projection driven by functional time series forecasts.

Each step forecasts next year's cohort change ratio curves (FPCA + ARIMA
scores) and the child/woman ratio (ARIMA), rolls the population forward, and
appends the result to the history before the next step.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence, TextIO

import numpy as np

from .demog_data import AgeGrid, PopulationPanel, Sex, aggregate_regions
from .errors import ShapeMismatch, ValidationError, YearOutOfRange
from .fts import FunctionalSeries, decompose, fit_score_model, refit, stack_mfts, unstack
from .fts.arima import ScoreModel, error_pools
from .ratios import BirthSexRatio, CHILDBEARING, compute_ccr, compute_cwr, infant_forecast

MODES = ("univariate", "multivariate")


@dataclass(frozen=True)
class ProjectionConfig:
    horizon: int = 30
    K: int = 6
    B: int = 1000
    alpha: float = 0.05
    seed: int = 0
    log_transform: bool = True
    mode: str = "univariate"
    # "each_step" refits on the augmented history every year; "once" fits a
    # single model and uses its multi-step score forecasts
    refit: str = "each_step"
    reselect_orders: bool = False
    # "direct": paths drawn from the h-step bootstrap of one fit;
    # "recursive": each path refits on its own augmented history
    path_mode: str = "direct"
    birth_sex_ratio: float = 1.057
    max_orders: tuple = (3, 2, 3)
    workers: int = 1

    def __post_init__(self):
        if self.horizon < 1:
            raise ValidationError("horizon must be >= 1")
        if self.B < 1:
            raise ValidationError("need at least one path")
        if not 0 < self.alpha < 1:
            raise ValidationError("alpha must lie in (0, 1)")
        if self.K < 1:
            raise ValidationError("K must be >= 1")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        if self.refit not in ("each_step", "once"):
            raise ValidationError("refit must be 'each_step' or 'once'")
        if self.path_mode not in ("direct", "recursive"):
            raise ValidationError("path_mode must be 'direct' or 'recursive'")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")


def quantile_labels(alpha: float) -> tuple[str, str, str]:
    return (f"q{100 * alpha / 2:g}", "q50", f"q{100 * (1 - alpha / 2):g}")


@dataclass(frozen=True)
class ProjectionResult:
    region: str
    years: np.ndarray  # T+1..T+H
    female: np.ndarray  # (H, p)
    male: np.ndarray  # (H, p)
    age_grid: AgeGrid
    base_female: np.ndarray  # last observed year
    base_male: np.ndarray
    paths: np.ndarray | None = None  # (B, 2, H, p)
    alpha: float = 0.05

    @property
    def horizon(self) -> int:
        return self.years.size

    def point(self, sex: Sex | str) -> np.ndarray:
        return self.female if Sex(sex) is Sex.FEMALE else self.male

    def panel(self, sex: Sex | str) -> PopulationPanel:
        return PopulationPanel(self.region, sex, self.years, self.point(sex), self.age_grid)

    def both_sexes(self) -> np.ndarray:
        """(H, p) point population with sexes summed."""
        return self.female + self.male

    def path_both_sexes(self) -> np.ndarray:
        """(B, H, p) simulated population with sexes summed."""
        if self.paths is None:
            raise ValidationError("projection carries no simulated paths")
        return self.paths[:, 0] + self.paths[:, 1]

    def year_index(self, year: int) -> int:
        i = int(year) - int(self.years[0])
        if not 0 <= i < self.horizon:
            raise YearOutOfRange(f"{year} outside {self.years[0]}-{self.years[-1]}")
        return i

    def intervals(self, alpha: float | None = None):
        """Pointwise (lower, median, upper) of the paths, each (2, H, p)."""
        if self.paths is None:
            raise ValidationError("projection carries no simulated paths")
        a = self.alpha if alpha is None else alpha
        return np.quantile(self.paths, [a / 2, 0.5, 1 - a / 2], axis=0)


# --------------------------------------------------------------------------
# ratio models


def _fwd(x, log):
    return np.log(x) if log else np.asarray(x, dtype=float)


def _inv(x, log):
    return np.exp(x) if log else np.maximum(x, 0.0)


@dataclass
class _Block:
    fpca: object
    scores: list[ScoreModel]
    labels: tuple  # sexes covered, in stacking order


@dataclass
class RatioModel:
    """Fitted CCR and CWR forecasters for one history."""

    blocks: list[_Block]
    cwr: ScoreModel
    log: bool
    p_ccr: int
    mode: str

    def point(self, h: int):
        """Point CCR curves (female, male) and CWR at horizon h (transformed scale)."""
        curves = {}
        for blk in self.blocks:
            beta = np.array([sm.forecast(h)[-1] for sm in blk.scores])
            c = blk.fpca.reconstruct(beta)
            for lab, part in zip(blk.labels, unstack(c, blk.fpca.blocks) if blk.fpca.blocks else [c]):
                curves[lab] = part
        return curves[Sex.FEMALE], curves[Sex.MALE], self.cwr.forecast(h)[-1]

    def pools(self, H: int):
        """Per-block score pools ``[blk][k][h-1]`` and the CWR pool ``[h-1]``."""
        blk_pools = [[error_pools(sm, H) for sm in blk.scores] for blk in self.blocks]
        return blk_pools, error_pools(self.cwr, H)


def _ccr_series(female: PopulationPanel, male: PopulationPanel, log: bool):
    cf = _fwd(compute_ccr(female).values, log)
    cm = _fwd(compute_ccr(male).values, log)
    grid = np.arange(1, female.age_grid.size, dtype=float)
    return FunctionalSeries(grid, cf), FunctionalSeries(grid, cm)


def _fit_scores(fpca, cfg, template: _Block | None):
    out = []
    for k in range(fpca.K):
        y = fpca.scores[:, k]
        if template is not None and not cfg.reselect_orders:
            out.append(refit(template.scores[k], y))
        else:
            out.append(fit_score_model(y, cfg.max_orders))
    return out


def fit_ratio_model(
    female: PopulationPanel,
    male: PopulationPanel,
    cfg: ProjectionConfig,
    template: RatioModel | None = None,
) -> RatioModel:
    """Fit CCR curve and CWR forecasters; ``template`` fixes ARIMA orders."""
    if not np.array_equal(female.years, male.years) or female.age_grid != male.age_grid:
        raise ShapeMismatch("female and male panels are not aligned")
    sf, sm = _ccr_series(female, male, cfg.log_transform)
    K = min(cfg.K, sf.n - 1)
    blocks = []
    if cfg.mode == "univariate":
        for i, (lab, s) in enumerate(((Sex.FEMALE, sf), (Sex.MALE, sm))):
            fp = decompose(s, K)
            tb = template.blocks[i] if template is not None else None
            blocks.append(_Block(fp, _fit_scores(fp, cfg, tb), (lab,)))
    else:
        fp = decompose(stack_mfts(sf, sm), K)
        tb = template.blocks[0] if template is not None else None
        blocks.append(_Block(fp, _fit_scores(fp, cfg, tb), (Sex.FEMALE, Sex.MALE)))
    cwr_y = _fwd(compute_cwr(female, male).values, cfg.log_transform)
    if template is not None and not cfg.reselect_orders:
        cwr = refit(template.cwr, cwr_y)
    else:
        cwr = fit_score_model(cwr_y, cfg.max_orders)
    return RatioModel(blocks, cwr, cfg.log_transform, sf.p, cfg.mode)


# --------------------------------------------------------------------------
# roll forward


def roll_forward(current: np.ndarray, ccr: np.ndarray) -> np.ndarray:
    """Advance every cohort one year; the infant cell (index 0) is left at 0.

    ``ccr[j]`` applies to target age ``j + 1``; the open bin pools the last
    two ages. Works on stacked leading dimensions.
    """
    current = np.asarray(current, dtype=float)
    ccr = np.asarray(ccr, dtype=float)
    nxt = np.zeros_like(current)
    nxt[..., 1:-1] = ccr[..., :-1] * current[..., :-2]
    nxt[..., -1] = ccr[..., -1] * (current[..., -2] + current[..., -1])
    return nxt


def _step(cur_f, cur_m, ccr_f, ccr_m, cwr, bsr: BirthSexRatio):
    nf = roll_forward(cur_f, ccr_f)
    nm = roll_forward(cur_m, ccr_m)
    lo, hi = CHILDBEARING
    women = nf[..., lo : hi + 1].sum(axis=-1)
    total = women * cwr
    male_inf = total * bsr.male_share
    nf[..., 0] = total - male_inf
    nm[..., 0] = male_inf
    return np.maximum(nf, 0.0), np.maximum(nm, 0.0)


def project_one_step(female: PopulationPanel, male: PopulationPanel, config: ProjectionConfig = ProjectionConfig(),
                     model: RatioModel | None = None):
    """Next-year (female, male) age vectors from the full history."""
    model = fit_ratio_model(female, male, config) if model is None else model
    ccr_f, ccr_m, cwr = model.point(1)
    log = config.log_transform
    bsr = BirthSexRatio(config.birth_sex_ratio)
    if not log:
        cwr = max(cwr, 0.0)
    nf = roll_forward(female.counts[-1], _inv(ccr_f, log))
    nm = roll_forward(male.counts[-1], _inv(ccr_m, log))
    lo, hi = CHILDBEARING
    f0, m0 = infant_forecast(float(nf[lo : hi + 1].sum()), float(_inv(cwr, log)), bsr)
    nf[0], nm[0] = f0, m0
    return np.maximum(nf, 0.0), np.maximum(nm, 0.0)


def _check_history(female, male, n_min=10):
    if female.n_years < n_min:
        raise ValidationError(f"need at least {n_min} years of history, got {female.n_years}")
    if not np.array_equal(female.years, male.years):
        raise ShapeMismatch("female and male panels cover different years")


def project(female: PopulationPanel, male: PopulationPanel, config: ProjectionConfig = ProjectionConfig()) -> ProjectionResult:
    """Point projection for ``config.horizon`` years."""
    _check_history(female, male)
    H = config.horizon
    f_hist, m_hist = female, male
    out_f, out_m = [], []
    first = fit_ratio_model(female, male, config)
    if config.refit == "once":
        log = config.log_transform
        bsr = BirthSexRatio(config.birth_sex_ratio)
        cur_f, cur_m = female.counts[-1], male.counts[-1]
        for h in range(1, H + 1):
            cf, cm, cwr = first.point(h)
            cur_f, cur_m = _step(cur_f, cur_m, _inv(cf, log), _inv(cm, log), _inv(cwr, log), bsr)
            out_f.append(cur_f)
            out_m.append(cur_m)
    else:
        model = first
        for h in range(1, H + 1):
            if h > 1:
                model = fit_ratio_model(f_hist, m_hist, config, template=first)
            nf, nm = project_one_step(f_hist, m_hist, config, model=model)
            out_f.append(nf)
            out_m.append(nm)
            f_hist, m_hist = f_hist.append(nf), m_hist.append(nm)
    years = np.arange(female.last_year + 1, female.last_year + H + 1)
    return ProjectionResult(
        female.region, years, np.array(out_f), np.array(out_m), female.age_grid,
        female.counts[-1].copy(), male.counts[-1].copy(), alpha=config.alpha,
    )


# --------------------------------------------------------------------------
# simulated paths


def region_key(region: str) -> int:
    return zlib.crc32(region.encode("utf-8"))


def _path_rng(seed: int, region: str, b: int) -> np.random.Generator:
    return np.random.default_rng([seed, region_key(region), b])


def _draw_uniforms(cfg, region, ncols, paths: Sequence[int]) -> np.ndarray:
    return np.stack([_path_rng(cfg.seed, region, b).random((cfg.horizon, ncols)) for b in paths])


def _direct_chunk(model: RatioModel, pools, cfg, region, base_f, base_m, paths):
    """Paths ``paths`` on the fitted model's h-step bootstrap, vectorised over paths."""
    blk_pools, cwr_pool = pools
    H, log = cfg.horizon, model.log
    bsr = BirthSexRatio(cfg.birth_sex_ratio)
    ncols = sum(blk.fpca.K + 1 for blk in model.blocks) + 1
    U = _draw_uniforms(cfg, region, ncols, paths)  # (b, H, ncols)
    nb = len(paths)
    cur_f = np.broadcast_to(base_f, (nb, base_f.size)).copy()
    cur_m = np.broadcast_to(base_m, (nb, base_m.size)).copy()
    out = np.empty((nb, 2, H, base_f.size))
    fc = [[sm.forecast(H) for sm in blk.scores] for blk in model.blocks]
    fc_cwr = model.cwr.forecast(H)
    for h in range(1, H + 1):
        curves = {}
        col = 0
        for bi, blk in enumerate(model.blocks):
            fp = blk.fpca
            beta = np.empty((nb, fp.K))
            for k in range(len(blk.scores)):
                pool = blk_pools[bi][k][h - 1]
                idx = np.minimum((U[:, h - 1, col] * pool.size).astype(int), pool.size - 1)
                beta[:, k] = fc[bi][k][h - 1] + pool[idx]
                col += 1
            nres = fp.residuals.shape[0]
            ridx = np.minimum((U[:, h - 1, col] * nres).astype(int), nres - 1)
            col += 1
            c = fp.reconstruct(beta) + fp.residuals[ridx]
            parts = unstack(c, fp.blocks) if fp.blocks else [c]
            for lab, part in zip(blk.labels, parts):
                curves[lab] = part
        pool = cwr_pool[h - 1]
        idx = np.minimum((U[:, h - 1, col] * pool.size).astype(int), pool.size - 1)
        cwr = fc_cwr[h - 1] + pool[idx]
        cur_f, cur_m = _step(
            cur_f, cur_m, _inv(curves[Sex.FEMALE], log), _inv(curves[Sex.MALE], log),
            _inv(cwr, log), bsr,
        )
        out[:, 0, h - 1] = cur_f
        out[:, 1, h - 1] = cur_m
    return out


def _recursive_path(first: RatioModel, cfg, female, male, b):
    """One path evolving on its own augmented history, refitting each step."""
    rng = _path_rng(cfg.seed, female.region, b)
    log = first.log
    bsr = BirthSexRatio(cfg.birth_sex_ratio)
    f_hist, m_hist = female, male
    out = np.empty((2, cfg.horizon, female.age_grid.size))
    model = first
    for h in range(cfg.horizon):
        if h:
            model = fit_ratio_model(f_hist, m_hist, cfg, template=first)
        blk_pools, cwr_pool = model.pools(1)
        curves = {}
        for bi, blk in enumerate(model.blocks):
            fp = blk.fpca
            beta = np.array([
                sm.forecast(1)[-1] + blk_pools[bi][k][0][rng.integers(blk_pools[bi][k][0].size)]
                for k, sm in enumerate(blk.scores)
            ])
            c = fp.reconstruct(beta) + fp.residuals[rng.integers(fp.residuals.shape[0])]
            for lab, part in zip(blk.labels, unstack(c, fp.blocks) if fp.blocks else [c]):
                curves[lab] = part
        cwr = model.cwr.forecast(1)[-1] + cwr_pool[0][rng.integers(cwr_pool[0].size)]
        nf, nm = _step(f_hist.counts[-1], m_hist.counts[-1], _inv(curves[Sex.FEMALE], log),
                       _inv(curves[Sex.MALE], log), float(_inv(cwr, log)), bsr)
        out[0, h], out[1, h] = nf, nm
        f_hist, m_hist = f_hist.append(nf), m_hist.append(nm)
    return out


def _chunks(n, k):
    bounds = np.linspace(0, n, k + 1).astype(int)
    return [list(range(bounds[i], bounds[i + 1])) for i in range(k) if bounds[i] < bounds[i + 1]]


def simulate_paths(
    female: PopulationPanel,
    male: PopulationPanel,
    config: ProjectionConfig = ProjectionConfig(),
    point: ProjectionResult | None = None,
) -> ProjectionResult:
    """Point projection plus ``config.B`` bootstrap population paths.

    Path ``b`` draws from its own random substream keyed by (seed, region, b),
    so the result does not depend on ``config.workers``.
    """
    _check_history(female, male)
    point = project(female, male, config) if point is None else point
    first = fit_ratio_model(female, male, config)
    B = config.B
    if config.path_mode == "direct":
        pools = first.pools(config.horizon)
        chunks = _chunks(B, min(config.workers, B))

        def run(ch):
            return _direct_chunk(first, pools, config, female.region, female.counts[-1], male.counts[-1], ch)
    else:
        chunks = [[b] for b in range(B)]

        def run(ch):
            return _recursive_path(first, config, female, male, ch[0])[None]

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as ex:
            parts = list(ex.map(run, chunks))
    else:
        parts = [run(ch) for ch in chunks]
    paths = np.concatenate(parts, axis=0)
    return replace(point, paths=paths)


def aggregate_results(results: Sequence[ProjectionResult], region: str = "AUS") -> ProjectionResult:
    """Sum regional projections (and their paths, index by index)."""
    ordered = sorted(results, key=lambda r: r.region)
    ref = ordered[0]
    for r in ordered[1:]:
        if not np.array_equal(r.years, ref.years) or r.age_grid != ref.age_grid:
            raise ShapeMismatch("projections differ in years or ages")
    acc = {k: np.zeros_like(getattr(ref, k)) for k in ("female", "male", "base_female", "base_male")}
    have_paths = all(r.paths is not None for r in ordered)
    paths = np.zeros_like(ref.paths) if have_paths else None
    for r in ordered:
        for k in acc:
            acc[k] = acc[k] + getattr(r, k)
        if have_paths:
            if r.paths.shape != ref.paths.shape:
                raise ShapeMismatch("regional path arrays differ in shape")
            paths = paths + r.paths
    return ProjectionResult(region, ref.years, acc["female"], acc["male"], ref.age_grid,
                            acc["base_female"], acc["base_male"], paths, ref.alpha)


# --------------------------------------------------------------------------
# exports


def pyramid_export(result: ProjectionResult, year: int, ages: Sequence[int] | None = None):
    """Rows ``(age_label, female, male)`` for one projected year."""
    i = result.year_index(year)
    grid = result.age_grid
    if ages is None:
        ages = range(grid.size)
    rows = []
    for x in ages:
        if x < 0 or x >= grid.size:
            raise ValidationError(f"age {x} outside 0..{grid.max_age}")
        rows.append((grid.label(x), float(result.female[i, x]), float(result.male[i, x])))
    return rows


def write_projection_csv(results: Sequence[ProjectionResult], stream: TextIO):
    stream.write("region,sex,year,age,count\n")
    for r in results:
        labels = r.age_grid.labels
        for sex in (Sex.FEMALE, Sex.MALE):
            arr = r.point(sex)
            for i, y in enumerate(r.years):
                for x, lab in enumerate(labels):
                    stream.write(f"{r.region},{sex.value},{y},{lab},{float(arr[i, x])!r}\n")


def write_totals_csv(results: Sequence[ProjectionResult], stream: TextIO, history: dict | None = None):
    """Totals per region and year; interval columns when paths exist.

    ``history`` maps region to (female, male) observed panels to prepend.
    """
    alpha = results[0].alpha if results else 0.05
    lo_lab, _, hi_lab = quantile_labels(alpha)
    stream.write(f"region,year,kind,female,male,total,total_{lo_lab},total_{hi_lab}\n")
    for r in results:
        if history and r.region in history:
            hf, hm = history[r.region]
            for y, f, m in zip(hf.years, hf.totals().tolist(), hm.totals().tolist()):
                stream.write(f"{r.region},{y},observed,{f!r},{m!r},{f + m!r},,\n")
        tf, tm = r.female.sum(axis=1), r.male.sum(axis=1)
        if r.paths is not None:
            tot = r.paths.sum(axis=(1, 3))  # (B, H)
            lo, hi = np.quantile(tot, [alpha / 2, 1 - alpha / 2], axis=0)
        for i, y in enumerate(r.years):
            extra = f"{float(lo[i])!r},{float(hi[i])!r}" if r.paths is not None else ","
            stream.write(f"{r.region},{y},forecast,{float(tf[i])!r},{float(tm[i])!r},{float(tf[i] + tm[i])!r},{extra}\n")


def write_path_quantiles_csv(result: ProjectionResult, stream: TextIO):
    labels = quantile_labels(result.alpha)
    stream.write("year,age,sex," + ",".join(labels) + "\n")
    q = result.intervals()
    ages = result.age_grid.labels
    for i, y in enumerate(result.years):
        for x, lab in enumerate(ages):
            for s, sex in enumerate((Sex.FEMALE, Sex.MALE)):
                vals = ",".join(repr(float(q[j, s, i, x])) for j in range(3))
                stream.write(f"{y},{lab},{sex.value},{vals}\n")
