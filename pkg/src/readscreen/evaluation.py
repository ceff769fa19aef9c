"""Leave-one-out evaluation, median imputation, noise sweeps and report files."""
from __future__ import annotations

import csv
import json
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from . import classifiers as clf
from .features import FeatureMatrix, MovementThresholds, extract_features
from .ingest import Cohort, ReadingSession, TextLayout, roi_indices
from .selection import LassoCvResult, Standardizer, cv_lasso, fit_standardizer

CLASSIFIERS = ("svm", "gnb", "centroid")
SELECTIONS = ("min_mse", "one_se", "none")


class EvaluationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Imputation and baselines


def column_medians(X) -> np.ndarray:
    """Median of the non-missing entries of every column; errors on an all-missing column."""
    X = np.asarray(X, dtype=float)
    missing = np.isnan(X)
    empty = missing.all(axis=0)
    if empty.any():
        raise EvaluationError(f"feature column(s) {np.flatnonzero(empty).tolist()} entirely missing in training set")
    if not missing.any():
        return np.median(X, axis=0)
    return np.nanmedian(X, axis=0)


def impute_median(train, test=None):
    """Fill NaN cells of ``train`` and ``test`` with the per-feature median of the training rows.

    Returns ``(train_filled, test_filled, medians)``; ``test_filled`` is None when no test rows are given.
    """
    train = np.asarray(train, dtype=float)
    med = column_medians(train)
    tr = np.where(np.isnan(train), med, train)
    te = None
    if test is not None:
        test = np.asarray(test, dtype=float)
        te = np.where(np.isnan(test), med, test)
    return tr, te, med


def trivial_accuracy(labels: Sequence) -> float:
    """Percentage accuracy of always predicting the majority class."""
    labels = list(labels)
    if not labels:
        raise EvaluationError("trivial_accuracy of an empty label list")
    return 100.0 * max(Counter(labels).values()) / len(labels)


# ---------------------------------------------------------------------------
# Pipelines


@dataclass(frozen=True)
class PipelineSpec:
    classifier: str = "svm"
    selection: str = "one_se"
    k: int = 2
    c_param: float = 1.0
    fold_seed: int = 0
    kmeans_seed: int = 0
    nested: bool = False

    def __post_init__(self):
        if self.classifier not in CLASSIFIERS:
            raise EvaluationError(f"classifier must be one of {CLASSIFIERS}")
        if self.selection not in SELECTIONS:
            raise EvaluationError(f"selection must be one of {SELECTIONS}")
        if self.classifier == "centroid" and self.k not in (2, 3, 4):
            raise EvaluationError("centroid classifier supports k in {2, 3, 4}")
        if self.c_param <= 0:
            raise EvaluationError("c_param must be positive")

    @property
    def name(self) -> str:
        base = {"svm": "Linear SVM", "gnb": "Naive Bayes", "centroid": f"K-means (k={self.k})"}[self.classifier]
        sel = {"min_mse": "LASSO (lambda_minMSE)", "one_se": "LASSO (lambda_1SE)",
               "none": "without feature selection"}[self.selection]
        return f"{base}, {sel}" + (" [nested]" if self.nested else "")


def default_battery(c_param: float = 1.0, fold_seed: int = 0, kmeans_seed: int = 0,
                      nested: bool = False) -> list[PipelineSpec]:
    """The 12 standard pipelines: k-means (k=2,3,4) with either LASSO penalty, then SVM and naive Bayes with each feature choice."""
    kw = dict(c_param=c_param, fold_seed=fold_seed, kmeans_seed=kmeans_seed, nested=nested)
    rows = [PipelineSpec("centroid", "min_mse", k=k, **kw) for k in (2, 3, 4)]
    rows += [PipelineSpec("centroid", "one_se", k=k, **kw) for k in (2, 3, 4)]
    rows += [PipelineSpec("svm", s, **kw) for s in ("min_mse", "one_se", "none")]
    rows += [PipelineSpec("gnb", s, **kw) for s in ("min_mse", "one_se", "none")]
    return rows


@dataclass(frozen=True)
class Selection:
    features: tuple[int, ...]
    cv: LassoCvResult | None = None
    fallback: bool = False


def select_features(X, y, spec: PipelineSpec) -> Selection:
    """Feature subset for ``spec``: LASSO CV on the imputed, standardised matrix, or all columns.

    If the chosen penalty keeps no feature, the first feature to enter the
    LASSO path is used so that every classifier has at least one input.
    """
    X = np.asarray(X, dtype=float)
    if spec.selection == "none":
        return Selection(tuple(range(X.shape[1])))
    filled, _, _ = impute_median(X)
    Z = fit_standardizer(filled).transform(filled)
    res = cv_lasso(Z, y, n_folds=5, fold_seed=spec.fold_seed)
    chosen = res.selected_features_1se if spec.selection == "one_se" else res.selected_features_min
    if chosen:
        return Selection(chosen, res)
    first = next((s for s in res.path_support if s), (0,))
    return Selection(first, res, fallback=True)


@dataclass(frozen=True)
class FoldModel:
    """Everything fitted on one training split: imputation medians, scaling and classifier."""

    features: tuple[int, ...]
    medians: np.ndarray
    scaler: Standardizer
    model: object

    def predict(self, x_raw) -> int:
        x = np.asarray(x_raw, dtype=float)[list(self.features)]
        x = np.where(np.isnan(x), self.medians, x)
        z = self.scaler.transform(x)
        if isinstance(self.model, clf.LinearSvmModel):
            return clf.predict_svm(self.model, z)[0]
        if isinstance(self.model, clf.GaussianNbModel):
            return int(clf.predict_gnb(self.model, z)[0])
        return int(clf.predict_centroid(self.model, z))

    def to_dict(self) -> dict:
        return {"features": list(self.features), "medians": self.medians.tolist(),
                "scale_mean": self.scaler.mean.tolist(), "scale_sd": self.scaler.sd.tolist(),
                "model": self.model.to_dict()}


def train_fold(X_train, y_train, features: Sequence[int], spec: PipelineSpec) -> FoldModel:
    """Impute, standardise and train on the training rows only."""
    feats = tuple(int(i) for i in features)
    Xs = np.asarray(X_train, dtype=float)[:, list(feats)]
    filled, _, med = impute_median(Xs)
    scaler = fit_standardizer(filled)
    Z = scaler.transform(filled)
    y_train = np.asarray(y_train)
    if spec.classifier == "svm":
        model = clf.train_svm(Z, y_train, spec.c_param)
    elif spec.classifier == "gnb":
        model = clf.train_gnb(Z, y_train)
    else:
        model = clf.train_centroid_classifier(Z, y_train, spec.k, spec.kmeans_seed)
    return FoldModel(feats, med, scaler, model)


@dataclass
class PipelineResult:
    spec: PipelineSpec
    text_id: str
    subject_ids: tuple[str, ...]
    truth: np.ndarray
    predictions: np.ndarray
    features: tuple[str, ...]
    trivial: float
    fold_hashes: tuple[str, ...] = ()
    selection_fallback: bool = False
    cv: LassoCvResult | None = field(default=None, repr=False)

    @property
    def n_correct(self) -> int:
        return int(np.sum(self.truth == self.predictions))

    @property
    def accuracy(self) -> float:
        return 100.0 * self.n_correct / len(self.truth)

    def to_dict(self) -> dict:
        return {
            "pipeline": self.spec.name,
            "spec": asdict(self.spec),
            "text_id": self.text_id,
            "accuracy": round(self.accuracy, 2),
            "n_correct": self.n_correct,
            "n": len(self.truth),
            "trivial_accuracy": round(self.trivial, 2),
            "dominant_features": list(self.features),
            "selection_fallback": self.selection_fallback,
            "predictions": {s: int(p) for s, p in zip(self.subject_ids, self.predictions)},
        }


def _check_cohort(fm: FeatureMatrix) -> np.ndarray:
    if len(fm) < 3:
        raise EvaluationError("LOOCV needs at least 3 subjects")
    try:
        y = fm.y
    except ValueError as exc:
        raise EvaluationError(f"{exc}; evaluation needs labelled subjects") from None
    if len(np.unique(y)) < 2:
        raise EvaluationError("LOOCV needs both classes present")
    return y


def loocv(fm: FeatureMatrix, spec: PipelineSpec, text_id: str = "", threads: int = 1,
          keep_models: bool = False, features: Sequence[int] | None = None):
    """Leave-one-out accuracy of one pipeline.

    Feature selection runs once on the whole imputed matrix unless ``spec.nested``,
    in which case it is repeated inside every fold; ``features`` skips selection
    and uses the given columns. Imputation, scaling and the classifier are always
    fitted on the n-1 training subjects only.
    """
    y = _check_cohort(fm)
    X = fm.X
    n = len(y)
    if features is not None:
        sel = Selection(tuple(int(j) for j in features))
    else:
        sel = None if spec.nested else select_features(X, y, spec)

    def fold(i):
        train = np.arange(n) != i
        s = sel if sel is not None else select_features(X[train], y[train], spec)
        fmod = train_fold(X[train], y[train], s.features, spec)
        return fmod.predict(X[i]), fmod, s

    with ThreadPoolExecutor(max(1, threads)) as pool:
        out = list(pool.map(fold, range(n))) if threads > 1 else [fold(i) for i in range(n)]
    preds = np.array([o[0] for o in out])
    models = [o[1] for o in out]
    chosen = sel if sel is not None else out[0][2]
    res = PipelineResult(
        spec, text_id, fm.subject_ids, y, preds,
        tuple(fm.names[i] for i in chosen.features), trivial_accuracy(fm.labels),
        tuple(clf.model_hash(m) for m in models), chosen.fallback, chosen.cv,
    )
    return (res, models) if keep_models else res


# ---------------------------------------------------------------------------
# Noise


@dataclass(frozen=True)
class NoiseSpec:
    sigma_grid: tuple[float, ...] = tuple(float(s) for s in range(10, 101, 10))
    replicates: int = 10
    noise_seed: int = 0
    mode: str = "train_on_noisy"
    complete_cases: bool = True

    def __post_init__(self):
        object.__setattr__(self, "sigma_grid", tuple(float(s) for s in self.sigma_grid))
        if not self.sigma_grid or any(s <= 0 for s in self.sigma_grid):
            raise EvaluationError("noise sigmas must be positive")
        if self.replicates < 1:
            raise EvaluationError("replicates must be >= 1")
        if self.mode not in ("train_on_noisy", "train_on_clean"):
            raise EvaluationError(f"unknown noise mode {self.mode!r}")


def inject_noise(session: ReadingSession, layout: TextLayout, sigma: float, seed) -> ReadingSession:
    """Displace every fixation by independent N(0, sigma^2) draws in x and y.

    Positions are clamped to the screen and ROIs are recomputed from the
    displaced positions; timestamps and metadata are untouched.
    """
    if not sigma > 0:
        raise EvaluationError("sigma must be > 0")
    rng = np.random.default_rng(seed)
    n = len(session)
    x = np.clip(session.x + rng.normal(0.0, sigma, n), 0.0, layout.screen_width)
    y = np.clip(session.y + rng.normal(0.0, sigma, n), 0.0, layout.screen_height)
    return session.replace(x=x, y=y, roi=roi_indices(x, y, layout))


def noise_stream(noise_seed: int, sigma: float, replicate: int, subject: int) -> np.random.SeedSequence:
    """Independent substream per (sigma, replicate, subject), stable under reordering of the grid."""
    return np.random.SeedSequence(noise_seed, spawn_key=(int(round(sigma * 1000)), replicate, subject))


def noisy_features(cohort: Cohort, sigma: float, replicate: int, noise_seed: int,
                   thresholds: MovementThresholds | None = None) -> FeatureMatrix:
    vecs = [
        extract_features(inject_noise(s, cohort.layout, sigma, noise_stream(noise_seed, sigma, replicate, i)),
                         cohort.layout, thresholds)
        for i, s in enumerate(cohort.sessions)
    ]
    return FeatureMatrix.from_vectors(vecs)


@dataclass
class NoiseResult:
    mode: str
    spec: PipelineSpec
    sigmas: tuple[float, ...]
    accuracies: np.ndarray  # (n_sigma, replicates), percent
    clean_accuracy: float
    features: tuple[str, ...]
    n_subjects: int

    @property
    def mean(self) -> np.ndarray:
        # the rounded mean of equal values can land one ulp outside [min, max]
        return np.clip(self.accuracies.mean(axis=1), self.min, self.max)

    @property
    def min(self) -> np.ndarray:
        return self.accuracies.min(axis=1)

    @property
    def max(self) -> np.ndarray:
        return self.accuracies.max(axis=1)

    @property
    def n_datasets(self) -> int:
        return int(self.accuracies.size)

    def rows(self) -> list[dict]:
        return [
            {"mode": self.mode, "sigma": s, "mean": float(m), "min": float(lo), "max": float(hi),
             "replicates": self.accuracies.shape[1]}
            for s, m, lo, hi in zip(self.sigmas, self.mean, self.min, self.max)
        ]

    def to_dict(self) -> dict:
        return {"mode": self.mode, "pipeline": self.spec.name, "spec": asdict(self.spec),
                "clean_accuracy": self.clean_accuracy, "dominant_features": list(self.features),
                "n_subjects": self.n_subjects, "n_datasets": self.n_datasets,
                "rows": self.rows(), "accuracies": self.accuracies.tolist()}


def noise_sweep(cohort: Cohort, spec: PipelineSpec, noise: NoiseSpec,
                thresholds: MovementThresholds | None = None, threads: int = 1) -> NoiseResult:
    """Accuracy under Gaussian fixation displacement for every (sigma, replicate) dataset.

    ``train_on_noisy`` reruns the full LOOCV (selection included) on each noisy
    dataset. ``train_on_clean`` fixes the selected features and the per-fold
    models from the original data and scores each held-out subject's noisy copy.
    """
    from .features import extract_cohort_features

    clean = extract_cohort_features(cohort, thresholds)
    if noise.complete_cases:
        keep = np.flatnonzero(clean.complete_rows())
        cohort = cohort.subset(keep)
        clean = clean.subset(keep)
    y = _check_cohort(clean)
    jobs = [(si, s, r) for si, s in enumerate(noise.sigma_grid) for r in range(noise.replicates)]
    acc = np.zeros((len(noise.sigma_grid), noise.replicates))

    if noise.mode == "train_on_clean":
        base, models = loocv(clean, spec, cohort.text_id, keep_models=True)

        def run(job):
            si, s, r = job
            fm = noisy_features(cohort, s, r, noise.noise_seed, thresholds)
            preds = np.array([m.predict(fm.X[i]) for i, m in enumerate(models)])
            return 100.0 * np.mean(preds == y)
    else:
        base = loocv(clean, spec, cohort.text_id)

        def run(job):
            si, s, r = job
            fm = noisy_features(cohort, s, r, noise.noise_seed, thresholds)
            return loocv(fm, spec, cohort.text_id).accuracy

    with ThreadPoolExecutor(max(1, threads)) as pool:
        values = list(pool.map(run, jobs)) if threads > 1 else [run(j) for j in jobs]
    for (si, _, r), v in zip(jobs, values):
        acc[si, r] = v
    return NoiseResult(noise.mode, spec, noise.sigma_grid, acc, base.accuracy, base.features, len(y))


# ---------------------------------------------------------------------------
# Reports


@dataclass
class EvalReport:
    text_ids: list[str]
    pipelines: list[PipelineSpec]
    results: dict[tuple[int, str], PipelineResult] = field(default_factory=dict)
    trivial: dict[str, float] = field(default_factory=dict)
    noise: list[NoiseResult] = field(default_factory=list)

    def accuracy(self, pipeline: int, text_id: str) -> float:
        return self.results[(pipeline, text_id)].accuracy

    def to_dict(self) -> dict:
        return {
            "text_ids": list(self.text_ids),
            "pipelines": [
                {"name": p.name, "spec": asdict(p),
                 "results": {t: self.results[(i, t)].to_dict() for t in self.text_ids if (i, t) in self.results}}
                for i, p in enumerate(self.pipelines)
            ],
            "trivial_accuracy": {t: round(v, 2) for t, v in self.trivial.items()},
            "noise": [nr.to_dict() for nr in self.noise],
        }


def run_battery(cohorts: Sequence[Cohort], pipelines: Sequence[PipelineSpec],
                thresholds: MovementThresholds | None = None, threads: int = 1) -> EvalReport:
    """LOOCV of every pipeline on every cohort (one cohort per text)."""
    from .features import extract_cohort_features

    report = EvalReport([c.text_id for c in cohorts], list(pipelines))
    for c in cohorts:
        fm = extract_cohort_features(c, thresholds)
        report.trivial[c.text_id] = trivial_accuracy(fm.labels)
        for i, p in enumerate(pipelines):
            report.results[(i, c.text_id)] = loocv(fm, p, c.text_id, threads=threads)
    return report


def write_table_csv(report: EvalReport, path, include_trivial: bool = True) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["classifier", *report.text_ids])
        for i, p in enumerate(report.pipelines):
            w.writerow([p.name, *(f"{report.accuracy(i, t):.2f}" for t in report.text_ids)])
        if include_trivial and report.trivial:
            w.writerow(["Trivial Accuracy", *(f"{report.trivial[t]:.2f}" for t in report.text_ids)])


def write_noise_csv(results: Sequence[NoiseResult], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "sigma", "mean", "min", "max", "replicates"])
        for nr in results:
            for row in nr.rows():
                w.writerow([row["mode"], f"{row['sigma']:g}", f"{row['mean']:.2f}", f"{row['min']:.2f}",
                            f"{row['max']:.2f}", row["replicates"]])


def emit_report(report: EvalReport, path, fmt: str = "table_csv", include_trivial: bool = True) -> list[Path]:
    """Write ``report`` as a table CSV (plus ``<stem>_noise.csv`` when noise runs exist) or as JSON."""
    path = Path(path)
    written = []
    if fmt == "json":
        path.write_text(json.dumps(report.to_dict(), indent=1, sort_keys=False) + "\n", encoding="utf-8")
        return [path]
    if fmt != "table_csv":
        raise EvaluationError(f"unknown report format {fmt!r}")
    if report.pipelines:
        write_table_csv(report, path, include_trivial)
        written.append(path)
    if report.noise:
        npath = path.with_name(path.stem + "_noise.csv") if report.pipelines else path
        write_noise_csv(report.noise, npath)
        written.append(npath)
    return written


def read_table_csv(path) -> list[list[str]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [row for row in csv.reader(fh)]
