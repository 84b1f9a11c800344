"""Flat ``key = value`` run configuration with units in the key names."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .hp_engine import MODES, ProjectionConfig
from .pension import DEFAULT_OADR_TARGET, MAX_MONTHS, MIN_MONTHS, STATUTORY_MONTHS
from .welfare import DEFAULT_ENTRY_YEARS


@dataclass(frozen=True)
class RunConfig:
    population_files: dict = field(default_factory=dict)
    mortality_files: dict = field(default_factory=dict)
    bundle_dir: str | None = None
    pension_rates_file: str | None = None
    horizon_years: int = 30
    n_components: int = 6
    n_paths: int = 1000
    alpha: float = 0.05
    oadr_target_percent: float = DEFAULT_OADR_TARGET
    start_pension_age_months: int = STATUTORY_MONTHS
    max_pension_age_months: int = MAX_MONTHS
    birth_sex_ratio: float = 1.057
    # placeholder; real runs supply the 1971-2023 average real interest rate
    real_rate_fraction: float = 0.02
    base_year: int = 2023
    entry_years: tuple = DEFAULT_ENTRY_YEARS
    pv_method: str = "expectancy"
    seed: int = 0
    mode: str = "univariate"
    log_transform: bool = True
    refit: str = "each_step"
    path_mode: str = "direct"
    workers: int = 1
    out_dir: str = "out"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if not MIN_MONTHS <= self.start_pension_age_months <= MAX_MONTHS:
            raise ConfigError("start_pension_age_months out of range")
        if not self.start_pension_age_months <= self.max_pension_age_months <= MAX_MONTHS:
            raise ConfigError("max_pension_age_months out of range")
        if self.oadr_target_percent < 0:
            raise ConfigError("oadr_target_percent must be non-negative")
        if self.pv_method not in ("expectancy", "annuity"):
            raise ConfigError("pv_method must be 'expectancy' or 'annuity'")
        if not self.birth_sex_ratio > 0:
            raise ConfigError("birth_sex_ratio must be positive")
        try:
            self.projection()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def projection(self) -> ProjectionConfig:
        return ProjectionConfig(
            horizon=self.horizon_years, K=self.n_components, B=self.n_paths, alpha=self.alpha,
            seed=self.seed, log_transform=self.log_transform, mode=self.mode, refit=self.refit,
            path_mode=self.path_mode, birth_sex_ratio=self.birth_sex_ratio, workers=self.workers,
        )

    def updated(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


def _bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


_CASTS = {
    "bundle_dir": str,
    "pension_rates_file": str,
    "horizon_years": int,
    "n_components": int,
    "n_paths": int,
    "alpha": float,
    "oadr_target_percent": float,
    "start_pension_age_months": int,
    "max_pension_age_months": int,
    "birth_sex_ratio": float,
    "real_rate_fraction": float,
    "base_year": int,
    "entry_years": lambda v: tuple(int(x) for x in v.split(",") if x.strip()),
    "pv_method": str,
    "seed": int,
    "mode": str,
    "log_transform": _bool,
    "refit": str,
    "path_mode": str,
    "workers": int,
    "out_dir": str,
}


def parse_config(text: str, base_dir: str | Path = ".") -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment; unknown keys fail.

    Relative file paths resolve against ``base_dir``.
    """
    base = Path(base_dir)
    kw: dict = {}
    pop, mort = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("population_file."):
            pop[key.split(".", 1)[1]] = str(base / value)
        elif key.startswith("mortality_file."):
            mort[key.split(".", 1)[1]] = str(base / value)
        elif key in _CASTS:
            try:
                v = _CASTS[key](value)
            except ValueError:
                raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from None
            if key in ("bundle_dir", "pension_rates_file", "out_dir"):
                v = str(base / v)
            kw[key] = v
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    return RunConfig(population_files=pop, mortality_files=mort, **kw)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), path.parent)


def format_config(cfg: RunConfig) -> str:
    lines = []
    for reg, p in sorted(cfg.population_files.items()):
        lines.append(f"population_file.{reg} = {p}")
    for reg, p in sorted(cfg.mortality_files.items()):
        lines.append(f"mortality_file.{reg} = {p}")
    for key in _CASTS:
        v = getattr(cfg, key)
        if v is None:
            continue
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"
