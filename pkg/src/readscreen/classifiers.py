"""Linear soft-margin SVM, Gaussian naive Bayes and a k-means centroid classifier.

All models take already-standardised feature matrices; labels are class
values (the pipeline uses -1 for control, +1 for dyslexic).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

VAR_FLOOR = 1e-9


def _as_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).reshape(-1)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"dimension mismatch: X {X.shape} vs y {y.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("classifier inputs must be finite")
    return X, y


def _check_point(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != d:
        raise ValueError(f"dimension mismatch: model expects {d} features, got {x.shape[0]}")
    return x


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(type(obj))


def model_dump(model) -> str:
    """Canonical JSON of a trained model (used for inspection and hash comparisons)."""
    return json.dumps(model.to_dict(), sort_keys=True, default=_jsonable)


def model_hash(model) -> str:
    return hashlib.sha256(model_dump(model).encode()).hexdigest()


def write_model(model, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1, sort_keys=True, default=_jsonable) + "\n")


# ---------------------------------------------------------------------------
# Linear SVM


@dataclass(frozen=True)
class LinearSvmModel:
    weights: np.ndarray
    bias: float
    c_param: float
    duality_gap: float = 0.0
    n_iter: int = 0
    dual_history: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    def decision(self, x) -> float:
        x = _check_point(x, len(self.weights))
        return float(x @ self.weights + self.bias)

    def to_dict(self) -> dict:
        return {"kind": "linear_svm", "weights": self.weights, "bias": self.bias, "c_param": self.c_param}


def svm_primal(X, y, w, b, c_param) -> float:
    """0.5*|w|^2 + C * mean(hinge)."""
    margins = y * (X @ w + b)
    return float(0.5 * w @ w + c_param * np.maximum(0.0, 1.0 - margins).mean())


def train_svm(X, y, c_param: float = 1.0, tol: float = 1e-6, max_iter: int = 200_000) -> LinearSvmModel:
    """Soft-margin linear SVM minimising ``0.5*|w|^2 + C * mean(hinge loss)``.

    Solved in the dual (box ``[0, C/n]`` plus ``y'a = 0``) by sequential minimal
    optimisation with maximal-violating-pair selection; stops once the duality
    gap drops below ``tol``. Labels must be +1/-1.
    """
    X, y = _as_xy(X, y)
    y = y.astype(float)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("SVM labels must be +1/-1")
    if len(np.unique(y)) < 2:
        raise ValueError("SVM training set needs both classes")
    if c_param <= 0:
        raise ValueError("c_param must be positive")
    n, d = X.shape
    C = c_param / n
    Q = (y[:, None] * y[None, :]) * (X @ X.T)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 0.5*a'Qa - sum(a)
    eps = 1e-12 * C
    history = []
    gap = np.inf
    it = 0
    w = np.zeros(d)
    b = 0.0
    for it in range(1, max_iter + 1):
        # I_up / I_low sets (Keerthi et al.)
        up = ((y > 0) & (alpha < C - eps)) | ((y < 0) & (alpha > eps))
        low = ((y > 0) & (alpha > eps)) | ((y < 0) & (alpha < C - eps))
        score = -y * grad
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        j = int(np.flatnonzero(low)[np.argmin(score[low])])
        viol = score[i] - score[j]
        if it % 10 == 1 or viol < 1e-12:
            w = (alpha * y) @ X
            b = _svm_bias(alpha, y, grad, C, eps)
            gap = svm_primal(X, y, w, b, c_param) - (alpha.sum() - 0.5 * w @ w)
            if gap < tol or viol < 1e-12:
                break
        # two-variable update along y_i*a_i + y_j*a_j = const
        quad = Q[i, i] + Q[j, j] - 2.0 * y[i] * y[j] * Q[i, j]
        quad = max(quad, 1e-12)
        step = viol / quad
        # feasible step limits
        lim_i = (C - alpha[i]) if y[i] > 0 else alpha[i]
        lim_j = alpha[j] if y[j] > 0 else (C - alpha[j])
        step = min(step, lim_i, lim_j)
        ai = min(max(alpha[i] + y[i] * step, 0.0), C)
        aj = min(max(alpha[j] - y[j] * step, 0.0), C)
        di, dj = ai - alpha[i], aj - alpha[j]
        alpha[i], alpha[j] = ai, aj
        grad += Q[:, i] * di + Q[:, j] * dj
        # dual objective 0.5*a'Qa - sum(a), non-increasing
        history.append(0.5 * alpha @ (grad - 1.0))
    w = (alpha * y) @ X
    b = _svm_bias(alpha, y, grad, C, eps)
    gap = svm_primal(X, y, w, b, c_param) - (alpha.sum() - 0.5 * w @ w)
    return LinearSvmModel(w, float(b), float(c_param), float(gap), it, np.array(history))


def _svm_bias(alpha, y, grad, C, eps) -> float:
    free = (alpha > eps) & (alpha < C - eps)
    score = -y * grad
    if free.any():
        return float(score[free].mean())
    up = ((y > 0) & (alpha < C - eps)) | ((y < 0) & (alpha > eps))
    low = ((y > 0) & (alpha > eps)) | ((y < 0) & (alpha < C - eps))
    hi = score[up].max() if up.any() else score[low].min()
    lo = score[low].min() if low.any() else hi
    return float(0.5 * (hi + lo))


def predict_svm(model: LinearSvmModel, x) -> tuple[int, float]:
    """Label and decision value; a decision of exactly 0 goes to the positive class."""
    dv = model.decision(x)
    return (1 if dv >= 0 else -1), dv


# ---------------------------------------------------------------------------
# Gaussian naive Bayes


@dataclass(frozen=True)
class GaussianNbModel:
    classes: np.ndarray
    priors: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def log_posteriors(self, x) -> np.ndarray:
        x = _check_point(x, self.means.shape[1])
        ll = -0.5 * (np.log(2 * np.pi * self.variances) + (x - self.means) ** 2 / self.variances)
        return np.log(self.priors) + ll.sum(axis=1)

    def to_dict(self) -> dict:
        return {"kind": "gaussian_nb", "classes": self.classes, "priors": self.priors,
                "means": self.means, "variances": self.variances}


def train_gnb(X, y) -> GaussianNbModel:
    """Per-class priors, feature means and (population) variances floored at 1e-9."""
    X, y = _as_xy(X, y)
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValueError("naive Bayes training set needs both classes")
    priors = np.array([np.mean(y == c) for c in classes])
    means = np.array([X[y == c].mean(axis=0) for c in classes])
    var = np.array([X[y == c].var(axis=0) for c in classes])
    return GaussianNbModel(classes, priors, means, np.maximum(var, VAR_FLOOR))


def predict_gnb(model: GaussianNbModel, x):
    """Arg-max log posterior; ties go to the larger prior, then the lower class index."""
    lp = model.log_posteriors(x)
    best = lp.max()
    tied = np.flatnonzero(lp == best)
    k = tied[np.argmax(model.priors[tied])] if len(tied) > 1 else tied[0]
    return model.classes[k].item(), lp


# ---------------------------------------------------------------------------
# k-means centroid classifier


@dataclass(frozen=True)
class CentroidModel:
    k: int
    centroids: np.ndarray
    cluster_labels: np.ndarray
    kmeans_seed: int
    n_iter: int = 0
    inertia_history: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    def to_dict(self) -> dict:
        return {"kind": "centroid", "k": self.k, "centroids": self.centroids,
                "cluster_labels": self.cluster_labels, "kmeans_seed": self.kmeans_seed}


def kmeans(X, k: int, seed: int, max_iter: int = 300):
    """Lloyd iterations from k distinct seeded rows; returns (centroids, assignment, n_iter, inertia history).

    An emptied cluster is re-seeded at the point farthest from its current centroid.
    """
    X = np.asarray(X, dtype=float)
    n = len(X)
    if n < k:
        raise ValueError(f"k-means needs n >= k (n={n}, k={k})")
    rng = np.random.default_rng(seed)
    _, first = np.unique(X, axis=0, return_index=True)
    distinct = np.sort(first)
    pick = rng.choice(distinct, size=k, replace=False) if len(distinct) >= k else rng.choice(n, size=k, replace=False)
    centroids = X[pick].copy()
    assign = np.full(n, -1)
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            members = assign == c
            if not members.any():
                own = d2[np.arange(n), assign]
                far = int(np.argmax(own))
                assign[far] = c
                members = assign == c
            centroids[c] = X[members].mean(axis=0)
        history.append(float(((X - centroids[assign]) ** 2).sum()))
    return centroids, assign, it, np.array(history)


def train_centroid_classifier(X, y, k: int = 2, seed: int = 0) -> CentroidModel:
    """Cluster training points with k-means and label each cluster by its majority label."""
    X, y = _as_xy(X, y)
    centroids, assign, n_iter, hist = kmeans(X, k, seed)
    labels = []
    for c in range(k):
        vals, counts = np.unique(y[assign == c], return_counts=True)
        # np.unique sorts, so argmax picks the smaller label on ties
        labels.append(vals[np.argmax(counts)])
    return CentroidModel(k, centroids, np.array(labels), int(seed), n_iter, hist)


def predict_centroid(model: CentroidModel, x):
    """Label of the nearest centroid (ties go to the lower centroid index)."""
    x = _check_point(x, model.centroids.shape[1])
    d2 = ((model.centroids - x) ** 2).sum(axis=1)
    return model.cluster_labels[int(np.argmin(d2))].item()
