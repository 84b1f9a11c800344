"""ARIMA(p, d, q) score models fitted by conditional least squares.

Orders are chosen by AICc over a full grid. AR and MA coefficients are
optimised through the partial-autocorrelation parameterisation, so every fit
is stationary and invertible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import lfilter

_ONE = np.ones(1)


def _linear_filter(b, a, x):
    return lfilter(b, a, x)

from ..errors import HorizonTooLong, SeriesTooShort

MIN_LENGTH = 10
MIN_POOL = 5
ROOT_MARGIN = 1.01


@dataclass(frozen=True)
class ScoreModel:
    order: tuple[int, int, int]
    include_mean: bool
    ar: np.ndarray
    ma: np.ndarray
    mu: float
    sigma2: float
    aicc: float
    y: np.ndarray
    resid: np.ndarray  # innovations on the differenced scale, zero before conditioning
    cond: int  # first index of the differenced series entering the SSE

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def n_params(self) -> int:
        p, _, q = self.order
        return p + q + int(self.include_mean) + 1

    @property
    def drift(self) -> float:
        return self.mu if self.include_mean and self.order[1] == 1 else 0.0

    def forecast(self, h: int) -> np.ndarray:
        return forecast_scores(self, h, with_pool=False)[0]


# --------------------------------------------------------------------------
# constrained parameterisation


def pacf_to_coef(r) -> np.ndarray:
    """Durbin-Levinson map from partial autocorrelations in (-1, 1)."""
    phi: list[float] = []
    for rk in r:
        rk = float(rk)
        phi = [a - rk * b for a, b in zip(phi, reversed(phi))] + [rk]
    return np.array(phi)


def coef_to_pacf(phi: np.ndarray) -> np.ndarray:
    """Inverse of :func:`pacf_to_coef`; entries outside (-1, 1) flag non-stationarity."""
    phi = np.asarray(phi, dtype=float).copy()
    p = phi.size
    r = np.zeros(p)
    for k in range(p - 1, -1, -1):
        rk = phi[k]
        r[k] = rk
        if k:
            if abs(rk) >= 1:
                return r
            phi = (phi[:k] + rk * phi[:k][::-1]) / (1 - rk * rk)
    return r


def is_stationary(phi: np.ndarray) -> bool:
    if phi.size == 0:
        return True
    comp = np.zeros((phi.size, phi.size))
    comp[0] = phi
    comp[1:, :-1] = np.eye(phi.size - 1)
    return bool(np.max(np.abs(np.linalg.eigvals(comp))) < 1 - 1e-9)


def min_root_modulus(ar, ma) -> float:
    """Smallest root modulus over the AR and MA polynomials (inf if none)."""
    out = np.inf
    for poly in (np.concatenate([[1.0], -np.asarray(ar)]), np.concatenate([[1.0], np.asarray(ma)])):
        poly = np.trim_zeros(poly, "b")
        if poly.size > 1:
            out = min(out, float(np.abs(np.roots(poly[::-1])).min()))
    return out


def _unpack(x, p, q):
    ar = pacf_to_coef(np.tanh(x[:p])) if p else np.zeros(0)
    ma = -pacf_to_coef(np.tanh(x[p : p + q])) if q else np.zeros(0)
    return ar, ma


def _pack(ar, ma):
    ra = np.clip(coef_to_pacf(ar), -0.999, 0.999) if ar.size else np.zeros(0)
    rm = np.clip(coef_to_pacf(-ma), -0.999, 0.999) if ma.size else np.zeros(0)
    return np.concatenate([np.arctanh(ra), np.arctanh(rm)])


# --------------------------------------------------------------------------
# residual filter


def innovations(w: np.ndarray, ar, ma, mu: float) -> np.ndarray:
    """Conditional innovations of the differenced series ``w``.

    The first ``len(ar)`` entries are zero; later entries follow the causal
    ARMA filter with zero pre-sample innovations.
    """
    p = len(ar)
    wc = w - mu
    u = np.zeros_like(wc)
    if wc.size > p:
        u[p:] = wc[p:]
        for k in range(p):
            u[p:] -= ar[k] * wc[p - 1 - k : wc.size - 1 - k]
    if len(ma):
        u = _linear_filter(_ONE, np.concatenate([_ONE, ma]), u)
    return u


def _sse(e, cond):
    tail = e[cond:]
    return float(tail @ tail)


@dataclass
class _Fit:
    ar: np.ndarray
    ma: np.ndarray
    mu: float
    sse: float


def _fit_order(w, p, q, include_mean, cond, start=None) -> _Fit:
    """Minimise the conditional SSE of ARMA(p, q) on ``w`` from index ``cond``."""
    scale = float(np.std(w[cond:])) if w.size > cond else 0.0
    if not scale > 0:
        scale = max(float(np.abs(w).max(initial=0.0)), 1.0)
    z = w / scale
    zt = z[cond:]

    if q == 0:
        # pure AR: ordinary least squares is the exact CLS minimiser when stationary
        cols = [z[cond - 1 - k : z.size - 1 - k] for k in range(p)]
        if include_mean:
            cols.append(np.ones(zt.size))
        if cols:
            A = np.column_stack(cols)
            beta, *_ = np.linalg.lstsq(A, zt, rcond=None)
            ar = beta[:p]
            c = beta[p] if include_mean else 0.0
        else:
            ar, c = np.zeros(0), 0.0
        if is_stationary(ar):
            denom = 1.0 - ar.sum()
            mu = c / denom if include_mean else 0.0
            e = innovations(z, ar, np.zeros(0), mu)
            return _Fit(ar, np.zeros(0), mu * scale, _sse(e, cond) * scale**2)

    m0 = float(zt.mean()) if include_mean else 0.0
    if start is not None:
        x0 = np.concatenate([_pack(start.ar, start.ma), [start.mu / scale] if include_mean else []])
    else:
        x0 = np.concatenate([np.zeros(p + q), [m0] if include_mean else []])

    def resid(x):
        ar, ma = _unpack(x, p, q)
        mu = x[p + q] if include_mean else 0.0
        return innovations(z, ar, ma, mu)[cond:]

    # Levenberg-Marquardt on the residual vector; needs at least as many residuals as parameters
    method = "lm" if zt.size >= x0.size else "trf"
    res = least_squares(resid, x0, method=method, xtol=1e-9, ftol=1e-12, gtol=1e-10, max_nfev=40 * (x0.size + 1))
    x = res.x
    ar, ma = _unpack(x, p, q)
    mu = x[p + q] if include_mean else 0.0
    e = innovations(z, ar, ma, mu)
    return _Fit(ar, ma, mu * scale, _sse(e, cond) * scale**2)


def _sigma_floor(y):
    return max((1e-10 * float(np.abs(y).max(initial=0.0))) ** 2, np.finfo(float).tiny)


def _aicc(sse, n_eff, k, floor):
    if n_eff - k - 1 <= 0:
        return np.inf, sse / max(n_eff, 1)
    sigma2 = max(sse / n_eff, floor)
    ll = -0.5 * n_eff * (np.log(2 * np.pi * sigma2) + 1.0)
    return -2 * ll + 2 * k + 2 * k * (k + 1) / (n_eff - k - 1), sigma2


def _build(y, order, include_mean, cond_y, start=None) -> ScoreModel:
    p, d, q = order
    w = np.diff(y, d) if d else y.copy()
    cond = cond_y - d
    fit = _fit_order(w, p, q, include_mean, cond, start)
    k = p + q + int(include_mean) + 1
    aicc, sigma2 = _aicc(fit.sse, w.size - cond, k, _sigma_floor(y))
    resid = innovations(w, fit.ar, fit.ma, fit.mu)
    freeze = lambda a: (a.setflags(write=False), a)[1]  # noqa: E731
    return ScoreModel(
        (p, d, q), include_mean, freeze(fit.ar), freeze(fit.ma), float(fit.mu),
        float(sigma2), float(aicc), freeze(np.array(y, dtype=float)), freeze(resid), cond,
    )


def candidate_orders(max_orders=(3, 2, 3)):
    P, D, Q = max_orders
    for d in range(D + 1):
        for p, q in itertools.product(range(P + 1), range(Q + 1)):
            for inc in ((False, True) if d <= 1 else (False,)):
                yield (p, d, q), inc


def fit_score_model(
    scores,
    max_orders=(3, 2, 3),
    order: tuple[int, int, int] | None = None,
    include_mean: bool | None = None,
    start: ScoreModel | None = None,
) -> ScoreModel:
    """Fit an ARIMA model to a score series.

    With ``order`` unset, every (p, d, q) within ``max_orders`` is fitted with
    and without a constant (mean for d=0, drift for d=1, none for d=2) on a
    common conditioning window, and the smallest AICc wins; ties go to fewer
    parameters, then lexicographic (p, d, q). The winner is then re-estimated
    on its own full conditioning window. A given ``order`` skips selection;
    ``start`` warm-starts the optimiser from a previous fit.
    """
    y = np.asarray(scores, dtype=float)
    if y.ndim != 1 or y.size < MIN_LENGTH:
        raise SeriesTooShort(f"need at least {MIN_LENGTH} observations, got {y.size}")
    if order is not None:
        p, d, q = order
        inc = (d <= 1) if include_mean is None else bool(include_mean and d <= 1)
        return _build(y, tuple(order), inc, d + p, start)

    common = max_orders[1] + max_orders[0]
    floor = _sigma_floor(y)
    best = []
    for (p, d, q), inc in candidate_orders(max_orders):
        w = np.diff(y, d) if d else y
        cond = common - d
        k = p + q + int(inc) + 1
        if w.size - cond - k - 1 <= 0:
            continue
        fit = _fit_order(w, p, q, inc, cond)
        if min_root_modulus(fit.ar, fit.ma) < ROOT_MARGIN:
            # near-unit roots make conditional least squares unreliable
            continue
        aicc, _ = _aicc(fit.sse, w.size - cond, k, floor)
        best.append((aicc, k, (p, d, q), inc))
    if not best:
        raise SeriesTooShort("series too short for any candidate model")
    amin = min(b[0] for b in best)
    tol = 1e-8 * max(1.0, abs(amin))
    ties = sorted((b for b in best if b[0] <= amin + tol), key=lambda b: (b[1], b[2], b[3]))
    rest = sorted((b for b in best if b[0] > amin + tol), key=lambda b: (b[0], b[1], b[2], b[3]))
    first = None
    for _, _, chosen, inc in ties + rest:
        model = _build(y, chosen, inc, chosen[1] + chosen[0])
        first = first or model
        # the final window can move roots toward the unit circle; fall back if so
        if chosen[0] + chosen[2] == 0 or min_root_modulus(model.ar, model.ma) >= ROOT_MARGIN:
            return model
    return first


def refit(model: ScoreModel, scores) -> ScoreModel:
    """Re-estimate coefficients on new data keeping the order and constant."""
    return fit_score_model(scores, order=model.order, include_mean=model.include_mean, start=model)


# --------------------------------------------------------------------------
# forecasting


def _forecast_origins(model: ScoreModel, origins: np.ndarray, H: int) -> np.ndarray:
    """Forecasts ``F[i, j]`` of ``y[origins[i] + j + 1]`` from data up to ``origins[i]``.

    Fixed parameters, rolling origin: the innovations used are the in-sample
    ones, which depend only on data up to their own time. Pre-sample lags of
    the differenced series sit at the mean and pre-sample innovations at zero.
    """
    p, d, q = model.order
    y, e, mu = model.y, model.resid, model.mu
    w = np.diff(y, d) if d else y
    wc = w - mu
    origins = np.asarray(origins)
    m = origins.size
    last_w = origins - d  # index in w of the last available differenced value
    lagw = np.zeros((m, p))
    lage = np.zeros((m, q))
    for k in range(p):
        idx = last_w - k
        ok = idx >= 0
        lagw[ok, k] = wc[idx[ok]]
    for k in range(q):
        idx = last_w - k
        ok = idx >= 0
        lage[ok, k] = e[idx[ok]]
    wf = np.zeros((m, H))
    for j in range(H):
        val = lagw @ model.ar if p else np.zeros(m)
        if q:
            val = val + lage @ model.ma
        wf[:, j] = val + mu
        if p:
            lagw = np.column_stack([val, lagw[:, :-1]])
        if q:
            lage = np.column_stack([np.zeros(m), lage[:, :-1]])
    if d == 0:
        return wf
    level = y[origins]
    if d == 1:
        return level[:, None] + np.cumsum(wf, axis=1)
    prev = np.where(origins >= 1, y[np.maximum(origins - 1, 0)], level)
    slope = level - prev
    dy = slope[:, None] + np.cumsum(wf, axis=1)
    return level[:, None] + np.cumsum(dy, axis=1)


def error_pools(model: ScoreModel, H: int) -> list[np.ndarray]:
    """In-sample h-step errors ``y[t] - yhat[t | t-h]`` for h = 1..H."""
    n = model.n
    if n - H < MIN_POOL:
        raise HorizonTooLong(f"horizon {H} leaves fewer than {MIN_POOL} errors from {n} points")
    origins = np.arange(n - 1)
    F = _forecast_origins(model, origins, H)
    pools = []
    for h in range(1, H + 1):
        o = np.arange(n - h)
        pools.append(model.y[o + h] - F[o, h - 1])
    return pools


def forecast_scores(model: ScoreModel, h: int, with_pool: bool = True):
    """Point forecasts for steps 1..h and the pool of in-sample h-step errors."""
    if h < 1:
        raise ValueError("horizon must be >= 1")
    point = _forecast_origins(model, np.array([model.n - 1]), h)[0]
    if not with_pool:
        return point, None
    return point, error_pools(model, h)[-1]
