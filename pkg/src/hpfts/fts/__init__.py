from .arima import ScoreModel, error_pools, fit_score_model, forecast_scores, refit
from .bootstrap import CurveForecast, all_pools, bootstrap_curves, fit_score_models, forecast_curve, point_curve
from .fpca import FpcaModel, FunctionalSeries, decompose, stack_mfts, unstack

__all__ = [
    "CurveForecast",
    "FpcaModel",
    "FunctionalSeries",
    "ScoreModel",
    "all_pools",
    "bootstrap_curves",
    "decompose",
    "error_pools",
    "fit_score_model",
    "fit_score_models",
    "forecast_curve",
    "forecast_scores",
    "point_curve",
    "refit",
    "stack_mfts",
    "unstack",
]
