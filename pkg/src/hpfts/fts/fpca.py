"""Discrete functional principal component decomposition."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateSeries, KTooLarge, ShapeMismatch, ValidationError


@dataclass(frozen=True)
class FunctionalSeries:
    """``curves[t, j]`` observed on ``grid[j]`` with quadrature ``weights[j]``.

    ``blocks`` lists ``(label, length)`` for stacked multivariate series.
    """

    grid: np.ndarray
    curves: np.ndarray
    weights: np.ndarray | None = None
    blocks: tuple = ()

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        curves = np.atleast_2d(np.asarray(self.curves, dtype=float))
        w = np.ones(grid.size) if self.weights is None else np.asarray(self.weights, dtype=float)
        if curves.shape[1] != grid.size or w.shape != grid.shape:
            raise ShapeMismatch("curves, grid and weights disagree in length")
        if not np.all(np.isfinite(curves)):
            raise ValidationError("functional series has missing or non-finite cells")
        if np.any(w <= 0):
            raise ValidationError("quadrature weights must be strictly positive")
        if self.blocks and sum(b[1] for b in self.blocks) != grid.size:
            raise ShapeMismatch("block lengths do not cover the grid")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "curves", curves)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.curves.shape[0]

    @property
    def p(self) -> int:
        return self.curves.shape[1]


@dataclass(frozen=True)
class FpcaModel:
    mean: np.ndarray
    eigenfunctions: np.ndarray  # (K, p)
    eigenvalues: np.ndarray  # (K,)
    scores: np.ndarray  # (n, K)
    residuals: np.ndarray  # (n, p)
    weights: np.ndarray
    blocks: tuple = ()
    total_variance: float = field(default=0.0)

    @property
    def K(self) -> int:
        return self.eigenvalues.size

    def reconstruct(self, scores) -> np.ndarray:
        """Curves ``mean + scores @ eigenfunctions`` for score rows."""
        return self.mean + np.asarray(scores, dtype=float) @ self.eigenfunctions

    def fitted(self) -> np.ndarray:
        return self.reconstruct(self.scores)


def _orient(phi: np.ndarray) -> np.ndarray:
    """Flip each row so its entries sum to a non-negative value.

    Rows whose sum is numerically zero are oriented by their first entry of
    non-negligible size instead.
    """
    phi = phi.copy()
    for k in range(phi.shape[0]):
        row = phi[k]
        s = row.sum()
        if abs(s) > 1e-10 * np.abs(row).sum():
            if s < 0:
                phi[k] = -row
        else:
            big = np.flatnonzero(np.abs(row) > 1e-8 * np.abs(row).max())
            if big.size and row[big[0]] < 0:
                phi[k] = -row
    return phi


def _complete_basis(v: np.ndarray, K: int, p: int) -> np.ndarray:
    """Extend orthonormal rows ``v`` to K rows using canonical basis vectors."""
    rows = list(v)
    for j in range(p):
        if len(rows) >= K:
            break
        e = np.zeros(p)
        e[j] = 1.0
        for _ in range(2):
            for r in rows:
                e = e - (r @ e) * r
        norm = np.linalg.norm(e)
        if norm > 1e-6:
            rows.append(e / norm)
    return np.array(rows[:K]).reshape(K, p)


def _eigen_covariance(Y: np.ndarray, K: int):
    n = Y.shape[0]
    C = Y.T @ Y / n
    lam, vec = np.linalg.eigh(C)
    order = np.argsort(lam)[::-1][:K]
    return lam[order], vec[:, order].T


def _eigen_gram(Y: np.ndarray, K: int):
    n, p = Y.shape
    G = Y @ Y.T / n
    lam, u = np.linalg.eigh(G)
    order = np.argsort(lam)[::-1][:K]
    lam, u = lam[order], u[:, order]
    tol = max(lam.max(initial=0.0), 0.0) * max(n, p) * 1e-13
    keep = lam > tol if tol > 0 else np.zeros(lam.size, bool)
    v = (Y.T @ u[:, keep]) / np.sqrt(n * lam[keep])
    v = v.T
    if v.shape[0] < K:
        v = _complete_basis(v, K, p)
        lam = np.where(keep, lam, 0.0)
    return lam, v


def decompose(series: FunctionalSeries, K: int, method: str = "auto") -> FpcaModel:
    """Truncated FPCA of ``series`` keeping ``K`` components.

    Eigenpairs come from the p x p weighted covariance when ``p <= n`` and
    from the n x n Gram matrix otherwise (``method`` forces either route).
    Eigenfunctions are orthonormal under the quadrature weights; scores are
    the weighted inner products of the centred curves with them.
    """
    n, p = series.n, series.p
    if n < 2:
        raise DegenerateSeries("need at least two curves")
    if not 1 <= K <= min(n - 1, p):
        raise KTooLarge(f"K={K} outside 1..{min(n - 1, p)}")
    w = series.weights
    sw = np.sqrt(w)
    mean = series.curves.mean(axis=0)
    Xc = series.curves - mean
    Y = Xc * sw
    if method == "auto":
        method = "covariance" if p <= n else "gram"
    if method == "covariance":
        lam, v = _eigen_covariance(Y, K)
    elif method == "gram":
        lam, v = _eigen_gram(Y, K)
    else:
        raise ValueError(f"unknown method {method!r}")
    lam = np.clip(lam, 0.0, None)
    phi = _orient(v / sw)
    scores = Xc @ (phi * w).T
    resid = Xc - scores @ phi
    total = float((Y**2).sum() / n)
    arr = lambda a: (a.setflags(write=False), a)[1]  # noqa: E731
    return FpcaModel(
        arr(mean), arr(phi), arr(lam), arr(scores), arr(resid), w, series.blocks, total
    )


def stack_mfts(female: FunctionalSeries, male: FunctionalSeries) -> FunctionalSeries:
    """Stack female then male curves on a concatenated grid.

    The joint decomposition centres every column by its own mean, which is
    the per-block mean of each sex.
    """
    if female.n != male.n or not np.array_equal(female.grid, male.grid):
        raise ShapeMismatch("female and male series must share n and grid")
    return FunctionalSeries(
        np.concatenate([female.grid, male.grid]),
        np.hstack([female.curves, male.curves]),
        np.concatenate([female.weights, male.weights]),
        blocks=(("Female", female.p), ("Male", male.p)),
    )


def unstack(curves: np.ndarray, blocks) -> list[np.ndarray]:
    """Split stacked curves (last axis) back into their blocks."""
    out, start = [], 0
    for _, length in blocks:
        out.append(curves[..., start : start + length])
        start += length
    return out
