"""Point forecasts and bootstrap prediction bands for functional series."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ValidationError
from .arima import ScoreModel, error_pools, fit_score_model, forecast_scores
from .fpca import FpcaModel


@dataclass(frozen=True)
class CurveForecast:
    h: int
    point: np.ndarray
    samples: np.ndarray  # (B, p)
    lower: np.ndarray
    upper: np.ndarray
    alpha: float


def fit_score_models(model: FpcaModel, max_orders=(3, 2, 3)) -> list[ScoreModel]:
    return [fit_score_model(model.scores[:, k], max_orders) for k in range(model.K)]


def point_curve(model: FpcaModel, score_models: Sequence[ScoreModel], h: int) -> np.ndarray:
    beta = np.array([sm.forecast(h)[-1] for sm in score_models])
    return model.reconstruct(beta)


def bootstrap_curves(
    model: FpcaModel,
    beta_point: np.ndarray,
    pools: Sequence[np.ndarray],
    rng: np.random.Generator,
    size: int,
) -> np.ndarray:
    """``size`` curves from resampled score errors plus whole residual curves."""
    K = model.K
    beta = np.empty((size, K))
    for k in range(K):
        pool = np.asarray(pools[k])
        beta[:, k] = beta_point[k] + pool[rng.integers(0, pool.size, size)]
    res_idx = rng.integers(0, model.residuals.shape[0], size)
    return model.reconstruct(beta) + model.residuals[res_idx]


def forecast_curve(
    model: FpcaModel,
    score_models: Sequence[ScoreModel],
    h: int,
    B: int = 1000,
    alpha: float = 0.05,
    seed: int = 0,
    pools: Sequence[np.ndarray] | None = None,
) -> CurveForecast:
    """h-step point curve with a pointwise ``1 - alpha`` bootstrap band.

    ``pools`` overrides the in-sample h-step error pools of the score models.
    """
    if B < 100:
        raise ValidationError("need at least 100 bootstrap replications")
    if not 0 < alpha < 1:
        raise ValidationError("alpha must lie in (0, 1)")
    if len(score_models) != model.K:
        raise ValidationError("one score model per component is required")
    beta_point = np.empty(model.K)
    own_pools = []
    for k, sm in enumerate(score_models):
        pt, pool = forecast_scores(sm, h)
        beta_point[k] = pt[-1]
        own_pools.append(pool)
    pools = own_pools if pools is None else pools
    rng = np.random.default_rng(seed)
    samples = bootstrap_curves(model, beta_point, pools, rng, B)
    lower, upper = np.quantile(samples, [alpha / 2, 1 - alpha / 2], axis=0)
    return CurveForecast(h, model.reconstruct(beta_point), samples, lower, upper, alpha)


def all_pools(score_models: Sequence[ScoreModel], H: int) -> list[list[np.ndarray]]:
    """``pools[h-1][k]``: h-step error pool of component k."""
    per_model = [error_pools(sm, H) for sm in score_models]
    return [[per_model[k][h] for k in range(len(score_models))] for h in range(H)]
