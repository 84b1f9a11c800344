"""Simulation studies behind the acceptance suite and the scripts."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .demog_data import synth_pair
from .fts import FunctionalSeries, decompose
from .fts.bootstrap import fit_score_models, forecast_curve
from .hp_engine import ProjectionConfig, project


@dataclass(frozen=True)
class CoverageConfig:
    reps: int = 500
    n: int = 50
    p: int = 101
    ar: tuple[float, float] = (0.7, 0.4)
    score_sd: tuple[float, float] = (2.0, 1.0)
    noise_sd: float = 0.1
    B: int = 1000
    alpha: float = 0.05
    seed: int = 2024


def rank2_series(cfg: CoverageConfig, rng: np.random.Generator):
    """n + 1 curves: smooth mean, two orthonormal components, AR(1) scores, white noise."""
    x = np.linspace(0.0, 1.0, cfg.p)
    mean = np.sin(np.pi * x)
    basis = np.vstack([np.sqrt(2.0) * np.sin(2 * np.pi * x), np.sqrt(2.0) * np.cos(2 * np.pi * x)])
    basis /= np.linalg.norm(basis, axis=1, keepdims=True)
    T = cfg.n + 1
    burn = 100
    scores = np.zeros((T + burn, 2))
    for k, (phi, sd) in enumerate(zip(cfg.ar, cfg.score_sd)):
        innov_sd = sd * np.sqrt(1 - phi**2)
        for t in range(1, T + burn):
            scores[t, k] = phi * scores[t - 1, k] + innov_sd * rng.standard_normal()
    curves = mean + scores[burn:] @ basis + cfg.noise_sd * rng.standard_normal((T, cfg.p))
    return x, curves


def coverage_study(cfg: CoverageConfig = CoverageConfig()) -> dict:
    """Empirical pointwise coverage of the one-step band on a held-out curve."""
    t0 = time.perf_counter()
    hits = np.zeros(cfg.reps)
    for rep in range(cfg.reps):
        rng = np.random.default_rng([cfg.seed, rep])
        x, curves = rank2_series(cfg, rng)
        model = decompose(FunctionalSeries(x, curves[:-1]), 2)
        fc = forecast_curve(model, fit_score_models(model), 1, cfg.B, cfg.alpha, seed=rep)
        truth = curves[-1]
        hits[rep] = np.mean((fc.lower <= truth) & (truth <= fc.upper))
    return dict(coverage=float(hits.mean()), per_rep=hits, seconds=time.perf_counter() - t0)


@dataclass(frozen=True)
class GeometricConfig:
    growth: float = 1.02
    n: int = 51
    horizon: int = 30


def geometric_check(cfg: GeometricConfig = GeometricConfig()) -> dict:
    """Largest relative error of the projection against geometric growth of each cohort."""
    t0 = time.perf_counter()
    f, m = synth_pair(cfg.growth, n=cfg.n)
    res = project(f, m, ProjectionConfig(horizon=cfg.horizon))
    worst = 0.0
    for panel, fc in ((f, res.female), (m, res.male)):
        last = panel.counts[-1]
        p = last.size
        for h in range(1, cfg.horizon + 1):
            ages = np.arange(h + 1, p - 1)
            want = last[ages - h] * cfg.growth**h
            worst = max(worst, float(np.max(np.abs(fc[h - 1, ages] / want - 1.0))))
            # the open bin collects every cohort that has reached it
            want_open = last[p - 1 - h :].sum() * cfg.growth**h
            worst = max(worst, abs(float(fc[h - 1, -1]) / want_open - 1.0))
    return dict(max_rel_error=worst, seconds=time.perf_counter() - t0)
