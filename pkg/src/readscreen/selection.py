"""Standardisation and L1-penalised least squares with cross-validated penalty choice.

The fitted objective is

    (1 / 2n) * ||y - b0 - X b||^2 + lam * ||b||_1

with an unpenalised intercept, solved by cyclic coordinate descent with
soft-thresholding on the centred Gram matrix.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numba
import numpy as np

MAX_SWEEPS = 10_000
TOL = 1e-7
# relative band around the penalty inside which a coordinate is set to zero
ZERO_SLACK = 1e-9


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    sd: np.ndarray

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return (X - self.mean) / self.sd

    def restrict(self, idx) -> "Standardizer":
        idx = np.asarray(idx, dtype=np.int64)
        return Standardizer(self.mean[idx], self.sd[idx])


def fit_standardizer(X) -> Standardizer:
    """Column means and sample standard deviations (divisor n-1); constant columns get sd 1."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise ValueError("fit_standardizer needs a non-empty 2-D matrix")
    if X.shape[0] < 2:
        raise ValueError("fit_standardizer needs at least 2 rows")
    if not np.all(np.isfinite(X)):
        raise ValueError("fit_standardizer needs finite entries (impute first)")
    mean = X.mean(axis=0)
    sd = X.std(axis=0, ddof=1)
    # tiny spreads are rounding noise around a constant column
    const = sd <= 1e-12 * np.maximum(np.abs(mean), 1.0)
    sd = np.where(const, 1.0, sd)
    mean = np.where(const, X[0], mean)
    return Standardizer(mean, sd)


def soft_threshold(z, lam):
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


@dataclass(frozen=True)
class LassoFit:
    lam: float
    intercept: float
    coef: np.ndarray
    objective_value: float
    n_sweeps: int = 0
    converged: bool = True
    objective_history: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.coef)

    def predict(self, X) -> np.ndarray:
        return self.intercept + np.asarray(X, dtype=float) @ self.coef


def lasso_objective(X, y, intercept: float, coef, lam: float) -> float:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    r = y - intercept - X @ coef
    return float(r @ r / (2 * len(y)) + lam * np.abs(coef).sum())


@numba.njit(cache=True)
def _cd_gram(G, c, yy, lam, beta, max_sweeps, tol, history):
    """Cyclic coordinate descent on 0.5*b'Gb - c'b + 0.5*yy + lam*|b|_1, in place on ``beta``."""
    p = len(c)
    Gb = G @ beta
    sweeps = 0
    converged = False
    for sweep in range(max_sweeps):
        max_delta = 0.0
        for j in range(p):
            gjj = G[j, j]
            old = beta[j]
            if gjj <= 0.0:
                new = 0.0
            else:
                z = c[j] - Gb[j] + gjj * old
                # the slack keeps exactly collinear columns at zero instead of
                # round-off sized coefficients
                thr = lam * (1.0 + ZERO_SLACK)
                if z > thr:
                    new = (z - lam) / gjj
                elif z < -thr:
                    new = (z + lam) / gjj
                else:
                    new = 0.0
            delta = new - old
            if delta != 0.0:
                beta[j] = new
                for k in range(p):
                    Gb[k] += G[k, j] * delta
                ad = abs(delta)
                if ad > max_delta:
                    max_delta = ad
        obj = 0.5 * yy - c @ beta + 0.5 * (beta @ Gb)
        for j in range(p):
            obj += lam * abs(beta[j])
        history[sweep] = obj
        sweeps = sweep + 1
        if max_delta < tol:
            converged = True
            break
    return sweeps, converged


def _centered(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"dimension mismatch: X {X.shape} vs y {y.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("lasso inputs must be finite")
    xm = X.mean(axis=0)
    ym = y.mean()
    return X - xm, y - ym, xm, ym


def lambda_max(X, y) -> float:
    """Smallest penalty at which every coefficient is zero: max_j |x_j' (y - ybar)| / n."""
    Xc, yc, _, _ = _centered(X, y)
    return float(np.max(np.abs(Xc.T @ yc)) / len(yc)) if Xc.shape[1] else 0.0


class _Problem:
    """Centred sufficient statistics shared by every penalty on one (X, y)."""

    def __init__(self, X, y):
        Xc, yc, self.xm, self.ym = _centered(X, y)
        n = len(yc)
        self.n = n
        self.G = np.ascontiguousarray(Xc.T @ Xc / n)
        self.c = Xc.T @ yc / n
        self.yy = float(yc @ yc / n)
        self.lam_max = float(np.max(np.abs(self.c))) if len(self.c) else 0.0
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float).reshape(-1)

    def solve(self, lam: float, start=None, max_sweeps=MAX_SWEEPS, tol=TOL) -> LassoFit:
        if not (np.isfinite(lam) and lam >= 0):
            raise ValueError(f"lambda must be finite and >= 0, got {lam}")
        p = len(self.c)
        # relative slack absorbs rounding between lambda_max formulas
        if lam >= self.lam_max * (1.0 - 1e-12):
            beta = np.zeros(p)
            history = np.zeros(0)
            sweeps, converged = 0, True
        else:
            beta = np.zeros(p) if start is None else np.array(start, dtype=float)
            history = np.empty(max_sweeps)
            sweeps, converged = _cd_gram(self.G, self.c, self.yy, float(lam), beta, max_sweeps, tol, history)
            history = history[:sweeps].copy()
        b0 = float(self.ym - self.xm @ beta)
        obj = lasso_objective(self.X, self.y, b0, beta, lam)
        return LassoFit(float(lam), b0, beta, obj, sweeps, converged, history)


def lasso_fit(X, y, lam: float, *, start=None, max_sweeps: int = MAX_SWEEPS, tol: float = TOL) -> LassoFit:
    """Coordinate-descent LASSO at a single penalty ``lam`` (intercept unpenalised)."""
    return _Problem(X, y).solve(lam, start, max_sweeps, tol)


def lambda_grid(lam_max: float, n: int = 100, ratio: float = 1e-3) -> np.ndarray:
    """``n`` log-spaced penalties from ``lam_max`` down to ``ratio * lam_max``."""
    if lam_max <= 0:
        lam_max = 1.0
    return np.geomspace(lam_max, ratio * lam_max, n)


def lasso_path(X, y, grid: Sequence[float]) -> list[LassoFit]:
    """Warm-started fits along a descending penalty grid."""
    prob = _Problem(X, y)
    fits, start = [], None
    for lam in grid:
        f = prob.solve(float(lam), start)
        fits.append(f)
        start = f.coef
    return fits


def stratified_folds(y, n_folds: int, seed: int) -> np.ndarray:
    """Fold id per sample: each class is shuffled with ``seed`` and split into contiguous chunks.

    A target with more distinct values than half the sample count is treated as
    continuous and split as a single stratum.
    """
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    fold = np.empty(len(y), dtype=np.int64)
    classes = np.unique(y)
    strata = [np.arange(len(y))] if len(classes) > len(y) // 2 else [np.flatnonzero(y == c) for c in classes]
    offset = 0
    for members in strata:
        idx = rng.permutation(members)
        for f, chunk in enumerate(np.array_split(idx, n_folds)):
            # rotate so that larger chunks do not pile up in fold 0
            fold[chunk] = (f + offset) % n_folds
        offset += len(idx) % n_folds
    return fold


@dataclass(frozen=True, eq=False)
class LassoCvResult:
    lambda_grid: np.ndarray
    mean_cv_mse: np.ndarray
    se_cv_mse: np.ndarray
    lambda_min_mse: float
    lambda_1se: float
    selected_features_min: tuple[int, ...]
    selected_features_1se: tuple[int, ...]
    fold_seed: int
    n_folds: int
    fit_min: LassoFit = field(repr=False, compare=False)
    fit_1se: LassoFit = field(repr=False, compare=False)
    path_support: tuple[tuple[int, ...], ...] = field(default=(), repr=False, compare=False)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LassoCvResult):
            return NotImplemented
        return (all(np.array_equal(getattr(self, k), getattr(other, k))
                    for k in ("lambda_grid", "mean_cv_mse", "se_cv_mse"))
                and (self.lambda_min_mse, self.lambda_1se, self.selected_features_min,
                     self.selected_features_1se, self.fold_seed, self.n_folds)
                == (other.lambda_min_mse, other.lambda_1se, other.selected_features_min,
                    other.selected_features_1se, other.fold_seed, other.n_folds))

    @property
    def index_min(self) -> int:
        return int(np.flatnonzero(self.lambda_grid == self.lambda_min_mse)[0])

    @property
    def index_1se(self) -> int:
        return int(np.flatnonzero(self.lambda_grid == self.lambda_1se)[0])

    def to_dict(self, names: Sequence[str] | None = None) -> dict:
        def label(ix):
            return [names[i] for i in ix] if names is not None else list(ix)

        return {
            "n_folds": self.n_folds,
            "fold_seed": self.fold_seed,
            "lambda_grid": self.lambda_grid.tolist(),
            "mean_cv_mse": self.mean_cv_mse.tolist(),
            "se_cv_mse": self.se_cv_mse.tolist(),
            "lambda_min_mse": self.lambda_min_mse,
            "lambda_1se": self.lambda_1se,
            "selected_features_min": label(self.selected_features_min),
            "selected_features_1se": label(self.selected_features_1se),
        }


def cv_lasso(X, y, n_folds: int = 5, lambda_grid_: Sequence[float] | None = None, fold_seed: int = 0) -> LassoCvResult:
    """K-fold cross-validated LASSO path with minimum-MSE and one-standard-error penalties."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    n = len(y)
    if n < n_folds or n_folds < 2:
        raise ValueError(f"need at least n_folds >= 2 samples, got n={n}, n_folds={n_folds}")
    grid = lambda_grid(lambda_max(X, y)) if lambda_grid_ is None else np.asarray(lambda_grid_, dtype=float)
    if grid.size == 0 or np.any(grid <= 0):
        raise ValueError("lambda grid must be non-empty and positive")
    if np.any(np.diff(grid) >= 0):
        raise ValueError("lambda grid must be strictly descending")

    folds = stratified_folds(y, n_folds, fold_seed)
    mse = np.empty((n_folds, len(grid)))
    for f in range(n_folds):
        test = folds == f
        fits = lasso_path(X[~test], y[~test], grid)
        for j, fit in enumerate(fits):
            r = y[test] - fit.predict(X[test])
            mse[f, j] = r @ r / len(r)
    mean = mse.mean(axis=0)
    se = mse.std(axis=0, ddof=1) / np.sqrt(n_folds)
    i_min = int(np.argmin(mean))
    bound = mean[i_min] + se[i_min]
    # grid is descending, so the first qualifying entry is the largest penalty
    i_1se = int(np.flatnonzero(mean <= bound)[0])

    full = lasso_path(X, y, grid)
    fit_min, fit_1se = full[i_min], full[i_1se]
    return LassoCvResult(
        grid, mean, se, float(grid[i_min]), float(grid[i_1se]),
        tuple(int(i) for i in fit_min.support), tuple(int(i) for i in fit_1se.support),
        int(fold_seed), n_folds, fit_min, fit_1se,
        tuple(tuple(int(i) for i in f.support) for f in full),
    )


def select_dominant(result: LassoCvResult, rule: str = "one_se") -> tuple[int, ...]:
    if rule == "min_mse":
        return result.selected_features_min
    if rule == "one_se":
        return result.selected_features_1se
    raise ValueError(f"unknown selection rule {rule!r}")


def write_cv_report(result: LassoCvResult, path, names: Sequence[str] | None = None) -> None:
    Path(path).write_text(json.dumps(result.to_dict(names), indent=1) + "\n", encoding="utf-8")
