"""Saccades, movement classes, word-visit statistics and the 35-slot feature vector."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .ingest import NO_ROI, ReadingSession, TextLayout

MOVEMENT_KINDS = (
    "short_forward", "medium_forward", "long_forward",
    "short_backward", "medium_backward", "long_backward",
)

GENERAL_FEATURES = (
    "n_fixations",
    "mean_fixation_duration",
    "median_fixation_duration",
    "sd_fixation_duration",
    "total_reading_time",
    "n_saccades",
    "mean_saccade_length",
    "median_saccade_length",
    "sd_saccade_length",
    *(f"n_{k}" for k in MOVEMENT_KINDS),
    *(f"frac_{k}" for k in MOVEMENT_KINDS),
    "n_change_of_line",
    "forward_backward_ratio",
)

WORD_FEATURES = (
    "n_skipped",
    "n_once_visited",
    "n_multiply_fixated",
    "frac_skipped",
    "frac_multiply_fixated",
    "mean_visits_per_visited_word",
    "max_visits",
    "mean_gaze_duration",
    "median_gaze_duration",
    "mean_total_word_duration",
    "mean_fixations_per_visited_word",
    "mean_revisit_count",
)

FEATURE_NAMES = GENERAL_FEATURES + WORD_FEATURES
N_FEATURES = len(FEATURE_NAMES)
FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}
WORD_SLICE = slice(len(GENERAL_FEATURES), N_FEATURES)

assert len(GENERAL_FEATURES) == 23 and N_FEATURES == 35


class MovementClass(str, enum.Enum):
    SHORT_FORWARD = "short_forward"
    MEDIUM_FORWARD = "medium_forward"
    LONG_FORWARD = "long_forward"
    SHORT_BACKWARD = "short_backward"
    MEDIUM_BACKWARD = "medium_backward"
    LONG_BACKWARD = "long_backward"
    CHANGE_OF_LINE = "change_of_line"


# integer codes used by the vectorised path; 0..5 follow MOVEMENT_KINDS, 6 is change of line
CHANGE_OF_LINE = 6
_CODE_TO_CLASS = [MovementClass(k) for k in MOVEMENT_KINDS] + [MovementClass.CHANGE_OF_LINE]


@dataclass(frozen=True)
class MovementThresholds:
    short_max: float = 100.0
    long_min: float = 400.0
    change_line_dx_min: float = 400.0
    change_line_dy_min: float = 40.0

    def __post_init__(self):
        if not 0 < self.short_max < self.long_min:
            raise ValueError("thresholds must satisfy 0 < short_max < long_min")

    @classmethod
    def for_layout(cls, layout: TextLayout, **kw) -> "MovementThresholds":
        kw.setdefault("change_line_dy_min", 0.5 * layout.line_height)
        return cls(**kw)


@dataclass(frozen=True)
class Saccade:
    from_index: int
    to_index: int
    dx: float
    dy: float
    length: float
    kind: MovementClass | None = None


def saccade_arrays(session: ReadingSession) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Signed displacements and Euclidean lengths between consecutive fixations."""
    if len(session) < 2:
        raise ValueError(f"subject {session.subject_id}: need at least 2 fixations for saccades")
    dx = np.diff(session.x)
    dy = np.diff(session.y)
    return dx, dy, np.hypot(dx, dy)


def compute_saccades(session: ReadingSession) -> list[Saccade]:
    dx, dy, length = saccade_arrays(session)
    return [Saccade(i, i + 1, float(dx[i]), float(dy[i]), float(length[i])) for i in range(len(dx))]


def classify_movement(saccade: Saccade, thresholds: MovementThresholds = MovementThresholds()) -> MovementClass:
    """Movement class of one saccade.

    Change of line (large leftward and downward jump) takes precedence; otherwise
    ``dx >= 0`` is forward, and the magnitude is short below ``short_max``, long
    above ``long_min`` and medium in between (both bounds inclusive).
    """
    if -saccade.dx >= thresholds.change_line_dx_min and saccade.dy >= thresholds.change_line_dy_min:
        return MovementClass.CHANGE_OF_LINE
    direction = "forward" if saccade.dx >= 0 else "backward"
    if saccade.length < thresholds.short_max:
        size = "short"
    elif saccade.length > thresholds.long_min:
        size = "long"
    else:
        size = "medium"
    return MovementClass(f"{size}_{direction}")


def classify_movements(dx, dy, length, thresholds: MovementThresholds = MovementThresholds()) -> np.ndarray:
    """Vectorised :func:`classify_movement`; returns integer codes (6 = change of line)."""
    dx, dy, length = (np.asarray(a, dtype=float) for a in (dx, dy, length))
    size = np.where(length < thresholds.short_max, 0, np.where(length > thresholds.long_min, 2, 1))
    code = size + np.where(dx >= 0, 0, 3)
    col = (-dx >= thresholds.change_line_dx_min) & (dy >= thresholds.change_line_dy_min)
    return np.where(col, CHANGE_OF_LINE, code)


def code_to_class(code: int) -> MovementClass:
    return _CODE_TO_CLASS[int(code)]


@dataclass(frozen=True)
class WordStats:
    visit_count: np.ndarray
    fixation_count: np.ndarray
    gaze_duration: np.ndarray
    total_duration: np.ndarray

    @property
    def n_words(self) -> int:
        return len(self.visit_count)


def compute_word_stats(session: ReadingSession, layout: TextLayout) -> WordStats:
    """Per-word visit statistics; a visit is a maximal run of consecutive fixations on one word.

    Fixations on no word ("none") interrupt runs, so ``[3, none, 3]`` is two visits.
    """
    n_words = layout.n_words
    roi = session.roi
    dur = session.durations
    visits = np.zeros(n_words, dtype=np.int64)
    fix_count = np.zeros(n_words, dtype=np.int64)
    gaze = np.zeros(n_words)
    total = np.zeros(n_words)
    on_word = roi != NO_ROI
    if not on_word.any():
        return WordStats(visits, fix_count, gaze, total)
    idx = roi[on_word]
    np.add.at(fix_count, idx, 1)
    np.add.at(total, idx, dur[on_word])
    run_start = on_word & np.concatenate([[True], roi[1:] != roi[:-1]])
    run_id = np.cumsum(run_start) - 1
    np.add.at(visits, roi[run_start], 1)
    # gaze duration: durations of the first run on each word only
    first_run = np.full(n_words, -1, dtype=np.int64)
    starts = np.nonzero(run_start)[0]
    for r, pos in enumerate(starts):
        w = roi[pos]
        if first_run[w] < 0:
            first_run[w] = r
    in_first = on_word & (run_id == first_run[np.where(on_word, roi, 0)])
    np.add.at(gaze, roi[in_first], dur[in_first])
    return WordStats(visits, fix_count, gaze, total)


@dataclass(frozen=True)
class FeatureVector:
    subject_id: str
    label: str
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if len(v) != N_FEATURES:
            raise ValueError(f"feature vector needs {N_FEATURES} slots, got {len(v)}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __getitem__(self, name: str) -> float:
        return float(self.values[FEATURE_INDEX[name]])

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    def as_dict(self) -> dict[str, float]:
        return {k: float(v) for k, v in zip(FEATURE_NAMES, self.values)}

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return (self.subject_id == other.subject_id and self.label == other.label
                and self.values.tobytes() == other.values.tobytes())


def extract_features(session: ReadingSession, layout: TextLayout,
                     thresholds: MovementThresholds | None = None) -> FeatureVector:
    """Compute the 35-slot feature vector of one session.

    Word-specific slots are NaN (missing) when the session carries no ROI data at all.
    Standard deviations use the population divisor.
    """
    if thresholds is None:
        thresholds = MovementThresholds.for_layout(layout)
    dx, dy, length = saccade_arrays(session)
    dur = session.durations
    codes = classify_movements(dx, dy, length, thresholds)
    counts = np.bincount(codes, minlength=7).astype(float)
    n_sacc = float(len(length))
    n_fwd = counts[0:3].sum()
    n_bwd = counts[3:6].sum()

    general = [
        float(len(session)),
        float(np.mean(dur)),
        float(np.median(dur)),
        float(np.std(dur)),
        float(session.t_end[-1] - session.t_start[0]),
        n_sacc,
        float(np.mean(length)),
        float(np.median(length)),
        float(np.std(length)),
        *counts[:6],
        *(counts[:6] / n_sacc),
        counts[CHANGE_OF_LINE],
        # +1 keeps the ratio finite for sessions without regressions
        n_fwd / (n_bwd + 1.0),
    ]

    if session.has_rois:
        ws = compute_word_stats(session, layout)
        n_words = float(ws.n_words)
        visited = ws.visit_count > 0
        n_visited = float(visited.sum())
        n_skipped = n_words - n_visited
        n_once = float((ws.visit_count == 1).sum())
        n_multi = float((ws.visit_count > 1).sum())
        vc = ws.visit_count[visited].astype(float)
        word = [
            n_skipped,
            n_once,
            n_multi,
            n_skipped / n_words,
            n_multi / n_words,
            float(vc.mean()),
            float(vc.max()),
            float(ws.gaze_duration[visited].mean()),
            float(np.median(ws.gaze_duration[visited])),
            float(ws.total_duration[visited].mean()),
            float(ws.fixation_count[visited].mean()),
            float((vc - 1.0).mean()),
        ]
    else:
        word = [math.nan] * len(WORD_FEATURES)
    return FeatureVector(session.subject_id, session.label, np.array(general + word))


def ecdf(values: Sequence[float]) -> list[tuple[float, float]]:
    """Right-continuous empirical CDF at each distinct value."""
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size == 0:
        raise ValueError("ecdf of an empty sequence")
    if not np.all(np.isfinite(v)):
        raise ValueError("ecdf needs finite values")
    uniq, counts = np.unique(v, return_counts=True)
    frac = np.cumsum(counts) / v.size
    frac[-1] = 1.0
    return [(float(a), float(b)) for a, b in zip(uniq, frac)]


# ---------------------------------------------------------------------------
# Feature matrices


LABEL_TO_TARGET = {"dyslexic": 1.0, "control": -1.0}


@dataclass(frozen=True)
class FeatureMatrix:
    """Stacked feature vectors; NaN marks a missing value."""

    subject_ids: tuple[str, ...]
    labels: tuple[str, ...]
    X: np.ndarray
    names: tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self):
        X = np.array(self.X, dtype=float).reshape(len(self.subject_ids), len(self.names))
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "subject_ids", tuple(self.subject_ids))
        object.__setattr__(self, "labels", tuple(self.labels))

    def __len__(self) -> int:
        return len(self.subject_ids)

    @property
    def y(self) -> np.ndarray:
        """+1 for dyslexic, -1 for control."""
        try:
            return np.array([LABEL_TO_TARGET[lab] for lab in self.labels])
        except KeyError as exc:
            raise ValueError(f"label {exc.args[0]!r} has no class target") from None

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.names.index(name)]

    def complete_rows(self) -> np.ndarray:
        return ~np.isnan(self.X).any(axis=1)

    def subset(self, rows) -> "FeatureMatrix":
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.nonzero(rows)[0]
        return FeatureMatrix(tuple(self.subject_ids[i] for i in rows),
                             tuple(self.labels[i] for i in rows), self.X[rows], self.names)

    @classmethod
    def from_vectors(cls, vectors: Sequence[FeatureVector]) -> "FeatureMatrix":
        return cls(tuple(v.subject_id for v in vectors), tuple(v.label for v in vectors),
                   np.array([v.values for v in vectors]).reshape(len(vectors), N_FEATURES))


def extract_cohort_features(cohort, thresholds: MovementThresholds | None = None) -> FeatureMatrix:
    return FeatureMatrix.from_vectors([extract_features(s, cohort.layout, thresholds) for s in cohort.sessions])


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def write_feature_matrix(fm: FeatureMatrix, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "label", *fm.names])
        for sid, lab, row in zip(fm.subject_ids, fm.labels, fm.X):
            w.writerow([sid, lab, *(_fmt(v) for v in row)])


def read_feature_matrix(path) -> FeatureMatrix:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["subject_id", "label"]:
            raise ValueError(f"{path}: feature matrix header must start with subject_id,label")
        names = tuple(header[2:])
        ids, labels, rows = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields")
            ids.append(row[0])
            labels.append(row[1])
            rows.append([math.nan if c == "" else float(c) for c in row[2:]])
    return FeatureMatrix(tuple(ids), tuple(labels), np.array(rows, dtype=float).reshape(len(ids), len(names)), names)


def write_ecdf(points: Sequence[tuple[float, float]], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["value", "fraction"])
        for v, f in points:
            w.writerow([repr(v), repr(f)])
