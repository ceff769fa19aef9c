"""Reading sessions, text layouts and synthetic cohorts.

A session is stored column-wise (one numpy array per fixation field) so that
noise injection and feature extraction stay vectorised. ``roi == -1`` marks a
fixation that lies on no word.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, fields, asdict, astuple
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

NO_ROI = -1
LABELS = ("dyslexic", "control", "unknown")
FIXATION_HEADER = ["subject_id", "label", "text_id", "x", "y", "t_start", "t_end", "roi"]


class CohortError(ValueError):
    """Raised for malformed or inconsistent cohort input."""


class Fixation(NamedTuple):
    x: float
    y: float
    t_start: float
    t_end: float
    roi: int | None = None

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class Word:
    index: int
    line: int
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))


@dataclass(frozen=True)
class TextLayout:
    """Ordered word boxes on a screen of known size (pixels)."""

    screen_width: float
    screen_height: float
    line_height: float
    words: tuple[Word, ...]
    text_id: str | None = None
    boxes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        if self.screen_width <= 0 or self.screen_height <= 0 or self.line_height <= 0:
            raise CohortError("screen dimensions and line_height must be positive")
        for i, w in enumerate(self.words):
            if w.index != i:
                raise CohortError(f"word indices must be contiguous 0..N-1 (got {w.index} at position {i})")
            if not (w.x_min <= w.x_max and w.y_min <= w.y_max):
                raise CohortError(f"word {i} has an inverted bounding box")
        by_line: dict[int, list[Word]] = {}
        for w in self.words:
            by_line.setdefault(w.line, []).append(w)
        for line, ws in by_line.items():
            ws = sorted(ws, key=lambda w: w.x_min)
            for a, b in zip(ws, ws[1:]):
                if b.x_min < a.x_max:
                    raise CohortError(f"words {a.index} and {b.index} overlap on line {line}")
        boxes = np.array([[w.x_min, w.x_max, w.y_min, w.y_max] for w in self.words], dtype=float)
        boxes = boxes.reshape(-1, 4)
        boxes.setflags(write=False)
        object.__setattr__(self, "boxes", boxes)

    @property
    def n_words(self) -> int:
        return len(self.words)

    @property
    def n_lines(self) -> int:
        return len({w.line for w in self.words})

    def line_lengths(self) -> dict[int, float]:
        out: dict[int, list[float]] = {}
        for w in self.words:
            lo, hi = out.get(w.line, [math.inf, -math.inf])
            out[w.line] = [min(lo, w.x_min), max(hi, w.x_max)]
        return {k: v[1] - v[0] for k, v in sorted(out.items())}

    def to_dict(self) -> dict:
        d = {
            "screen_width": self.screen_width,
            "screen_height": self.screen_height,
            "line_height": self.line_height,
            "words": [
                {"index": w.index, "line": w.line, "x_min": w.x_min, "x_max": w.x_max,
                 "y_min": w.y_min, "y_max": w.y_max}
                for w in self.words
            ],
        }
        if self.text_id is not None:
            d["text_id"] = self.text_id
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TextLayout":
        try:
            words = tuple(
                Word(int(w["index"]), int(w["line"]), float(w["x_min"]), float(w["x_max"]),
                     float(w["y_min"]), float(w["y_max"]))
                for w in d["words"]
            )
            words = tuple(sorted(words, key=lambda w: w.index))
            return cls(float(d["screen_width"]), float(d["screen_height"]),
                       float(d["line_height"]), words, d.get("text_id"))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, CohortError):
                raise
            raise CohortError(f"malformed layout: {exc!r}") from exc


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype).reshape(-1)
    a.setflags(write=False)
    return a


class ReadingSession:
    """One subject reading one text: an ordered fixation sequence plus metadata."""

    __slots__ = ("subject_id", "label", "text_id", "x", "y", "t_start", "t_end", "roi")

    def __init__(self, subject_id: str, label: str, text_id: str, x, y, t_start, t_end, roi=None):
        if label not in LABELS:
            raise CohortError(f"label must be one of {LABELS}, got {label!r}")
        self.subject_id = str(subject_id)
        self.label = label
        self.text_id = str(text_id)
        self.x = _frozen(x, float)
        self.y = _frozen(y, float)
        self.t_start = _frozen(t_start, float)
        self.t_end = _frozen(t_end, float)
        if roi is None:
            roi = np.full(len(self.x), NO_ROI)
        self.roi = _frozen(roi, np.int64)
        n = len(self.x)
        if not all(len(a) == n for a in (self.y, self.t_start, self.t_end, self.roi)):
            raise CohortError(f"subject {subject_id}: fixation arrays differ in length")

    @classmethod
    def from_fixations(cls, subject_id, label, text_id, fixations: Sequence[Fixation]):
        fx = list(fixations)
        return cls(
            subject_id, label, text_id,
            [f.x for f in fx], [f.y for f in fx],
            [f.t_start for f in fx], [f.t_end for f in fx],
            [NO_ROI if f.roi is None else f.roi for f in fx],
        )

    def __len__(self) -> int:
        return len(self.x)

    def __iter__(self) -> Iterator[Fixation]:
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i: int) -> Fixation:
        r = int(self.roi[i])
        return Fixation(float(self.x[i]), float(self.y[i]), float(self.t_start[i]),
                        float(self.t_end[i]), None if r == NO_ROI else r)

    @property
    def fixations(self) -> list[Fixation]:
        return list(self)

    @property
    def durations(self) -> np.ndarray:
        return self.t_end - self.t_start

    @property
    def has_rois(self) -> bool:
        return bool(np.any(self.roi != NO_ROI))

    def replace(self, **changes) -> "ReadingSession":
        kw = {k: getattr(self, k) for k in self.__slots__}
        kw.update(changes)
        return ReadingSession(**kw)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ReadingSession):
            return NotImplemented
        return (
            (self.subject_id, self.label, self.text_id) == (other.subject_id, other.label, other.text_id)
            and all(np.array_equal(getattr(self, k), getattr(other, k))
                    for k in ("x", "y", "t_start", "t_end", "roi"))
        )

    def __repr__(self) -> str:
        return (f"ReadingSession(subject_id={self.subject_id!r}, label={self.label!r}, "
                f"text_id={self.text_id!r}, n_fixations={len(self)})")


@dataclass(frozen=True)
class Cohort:
    sessions: tuple[ReadingSession, ...]
    layout: TextLayout
    text_id: str

    def __post_init__(self):
        object.__setattr__(self, "sessions", tuple(self.sessions))
        for s in self.sessions:
            if s.text_id != self.text_id:
                raise CohortError(f"unknown text_id {s.text_id!r} for subject {s.subject_id}")

    def __len__(self) -> int:
        return len(self.sessions)

    @property
    def labels(self) -> list[str]:
        return [s.label for s in self.sessions]

    def label_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for lab in self.labels:
            out[lab] = out.get(lab, 0) + 1
        return out

    def subset(self, keep: Sequence[int]) -> "Cohort":
        return Cohort(tuple(self.sessions[i] for i in keep), self.layout, self.text_id)


# ---------------------------------------------------------------------------
# ROI assignment


def roi_indices(x: np.ndarray, y: np.ndarray, layout: TextLayout) -> np.ndarray:
    """Index of the first (lowest-index) closed word box containing each point, -1 if none."""
    x = np.asarray(x, dtype=float)[:, None]
    y = np.asarray(y, dtype=float)[:, None]
    b = layout.boxes
    if len(b) == 0 or len(x) == 0:
        return np.full(len(x), NO_ROI, dtype=np.int64)
    inside = (x >= b[:, 0]) & (x <= b[:, 1]) & (y >= b[:, 2]) & (y <= b[:, 3])
    hit = inside.any(axis=1)
    return np.where(hit, inside.argmax(axis=1), NO_ROI).astype(np.int64)


def assign_rois(session: ReadingSession, layout: TextLayout) -> ReadingSession:
    """Return a copy of ``session`` with every fixation's ROI recomputed from its position."""
    return session.replace(roi=roi_indices(session.x, session.y, layout))


# ---------------------------------------------------------------------------
# Parsing and writing


def _check_session(s: ReadingSession, layout: TextLayout | None, where: str) -> ReadingSession:
    order = np.argsort(s.t_start, kind="stable")
    if not np.array_equal(order, np.arange(len(s))):
        s = s.replace(x=s.x[order], y=s.y[order], t_start=s.t_start[order],
                      t_end=s.t_end[order], roi=s.roi[order])
    if len(s) > 1:
        bad = np.nonzero(s.t_start[1:] < s.t_end[:-1])[0]
        if len(bad):
            i = int(bad[0]) + 1
            raise CohortError(f"{where}: overlapping fixation intervals for subject {s.subject_id} "
                              f"(fixation {i} starts at {s.t_start[i]} before previous ends at {s.t_end[i - 1]})")
    if layout is not None:
        if np.any(s.roi >= layout.n_words) or np.any(s.roi < NO_ROI):
            raise CohortError(f"{where}: subject {s.subject_id} has roi outside 0..{layout.n_words - 1}")
    return s


def _parse_float(text: str, name: str, where: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise CohortError(f"{where}: malformed {name} value {text!r}") from None
    if not math.isfinite(v):
        raise CohortError(f"{where}: non-finite {name} value {text!r}")
    return v


def read_layout(path) -> TextLayout:
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CohortError(f"{path}: invalid JSON ({exc})") from exc
    return TextLayout.from_dict(d)


def write_layout(layout: TextLayout, path) -> None:
    Path(path).write_text(json.dumps(layout.to_dict(), indent=1) + "\n", encoding="utf-8")


def read_sessions(path, layout: TextLayout | None = None) -> list[ReadingSession]:
    """Read the fixation CSV into sessions (one per subject, in order of first appearance)."""
    path = Path(path)
    rows: dict[str, dict] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != FIXATION_HEADER:
            raise CohortError(f"{path}:1: expected header {','.join(FIXATION_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            where = f"{path}:{lineno}"
            if not row:
                continue
            if len(row) != len(FIXATION_HEADER):
                raise CohortError(f"{where}: malformed row, expected {len(FIXATION_HEADER)} fields, got {len(row)}")
            sid, label, text_id = row[0], row[1], row[2]
            if label not in LABELS:
                raise CohortError(f"{where}: malformed row, label {label!r} not in {LABELS}")
            x = _parse_float(row[3], "x", where)
            y = _parse_float(row[4], "y", where)
            t0 = _parse_float(row[5], "t_start", where)
            t1 = _parse_float(row[6], "t_end", where)
            if t1 <= t0:
                raise CohortError(f"{where}: t_end ({t1}) must exceed t_start ({t0})")
            if layout is not None and not (0 <= x <= layout.screen_width and 0 <= y <= layout.screen_height):
                raise CohortError(f"{where}: coordinate ({x}, {y}) outside the screen")
            roi_text = row[7].strip()
            if roi_text in ("", "none"):
                roi = NO_ROI
            else:
                try:
                    roi = int(roi_text)
                except ValueError:
                    raise CohortError(f"{where}: malformed roi {roi_text!r}") from None
                if roi < 0:
                    raise CohortError(f"{where}: malformed roi {roi_text!r}")
            rec = rows.setdefault(sid, {"label": label, "text_id": text_id, "cols": [], "first": lineno})
            if rec["label"] != label or rec["text_id"] != text_id:
                raise CohortError(f"{where}: subject {sid} changes label or text_id mid-file")
            rec["cols"].append((x, y, t0, t1, roi))
    sessions = []
    for sid, rec in rows.items():
        cols = list(zip(*rec["cols"]))
        s = ReadingSession(sid, rec["label"], rec["text_id"], *cols)
        sessions.append(_check_session(s, layout, f"{path}"))
    return sessions


def parse_cohort(session_file, layout_file) -> Cohort:
    """Parse a fixation CSV and its layout JSON into a validated :class:`Cohort`.

    If the layout carries a ``text_id`` every session must use it; otherwise all
    sessions must share a single text_id.
    """
    layout = read_layout(layout_file)
    sessions = read_sessions(session_file, layout)
    if layout.text_id is not None:
        text_id = layout.text_id
    else:
        ids = sorted({s.text_id for s in sessions})
        if len(ids) > 1:
            raise CohortError(f"unknown text_id: layout {layout_file} has no text_id but sessions use {ids}")
        text_id = ids[0] if ids else ""
    for s in sessions:
        if s.text_id != text_id:
            raise CohortError(f"unknown text_id {s.text_id!r} for subject {s.subject_id}")
    return Cohort(tuple(sessions), layout, text_id)


def write_sessions(sessions: Sequence[ReadingSession], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIXATION_HEADER)
        for s in sessions:
            for i in range(len(s)):
                r = int(s.roi[i])
                w.writerow([s.subject_id, s.label, s.text_id, repr(float(s.x[i])), repr(float(s.y[i])),
                            repr(float(s.t_start[i])), repr(float(s.t_end[i])), "" if r == NO_ROI else r])


def write_cohort(cohort: Cohort, session_file, layout_file) -> None:
    layout = cohort.layout
    if layout.text_id is None:
        layout = TextLayout(layout.screen_width, layout.screen_height, layout.line_height,
                            layout.words, cohort.text_id)
    write_sessions(cohort.sessions, session_file)
    write_layout(layout, layout_file)


# ---------------------------------------------------------------------------
# Validation report


@dataclass
class SessionCheck:
    subject_id: str
    label: str
    n_fixations: int
    none_fraction: float
    flags: list[str]


@dataclass
class ValidationReport:
    sessions: list[SessionCheck]
    issues: list[str]
    label_counts: dict[str, int]
    majority_fraction: float

    @property
    def summary(self) -> str:
        counts = ", ".join(f"{k}={v}" for k, v in sorted(self.label_counts.items()))
        return f"{counts}; majority class fraction {self.majority_fraction:.4f}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["summary"] = self.summary
        return d


def validate_cohort(cohort: Cohort) -> ValidationReport:
    """Report per-session fixation counts, ROI coverage and missing-feature risks."""
    layout = cohort.layout
    line_of = np.array([w.line for w in layout.words], dtype=np.int64)
    last_line = int(line_of.max()) if len(line_of) else None
    checks, issues = [], []
    for s in cohort.sessions:
        n = len(s)
        none_frac = float(np.mean(s.roi == NO_ROI)) if n else 1.0
        flags = []
        if n < 2:
            flags.append("too short for saccade features")
        if n and none_frac == 1.0:
            flags.append("no ROI assignments: word-specific features will be missing")
        elif last_line is not None and n:
            hit = s.roi[s.roi != NO_ROI]
            if not np.any(line_of[hit] == last_line):
                flags.append("zero fixations on last line")
        checks.append(SessionCheck(s.subject_id, s.label, n, none_frac, flags))
        issues.extend(f"{s.subject_id}: {f}" for f in flags)
    counts = cohort.label_counts()
    total = sum(counts.values())
    majority = max(counts.values()) / total if total else 0.0
    return ValidationReport(checks, issues, counts, majority)


# ---------------------------------------------------------------------------
# Synthetic cohorts


@dataclass(frozen=True)
class ReaderParams:
    """Per-class reading behaviour for the synthetic walk."""

    fixation_duration_mean: float
    fixation_duration_sd: float
    saccade_length_mean: float
    saccade_length_sd: float
    regression_prob: float
    skip_prob: float
    refixation_prob: float
    # mean number of words jumped back by a regression (>= 1)
    regression_span: float = 1.5
    # small within-word corrective step back after a fixation; its rate varies
    # between subjects independently of class
    correction_prob: float = 0.0


CONTROL_READER = ReaderParams(250.0, 80.0, 200.0, 25.0, 0.05, 0.20, 0.05, 1.0, 0.6)
DYSLEXIC_READER = ReaderParams(250.0, 80.0, 190.0, 25.0, 0.25, 0.20, 0.40, 1.0, 0.6)


@dataclass(frozen=True)
class SynthSpec:
    n_control: int = 37
    n_dyslexic: int = 32
    seed: int = 0
    control: ReaderParams = CONTROL_READER
    dyslexic: ReaderParams = DYSLEXIC_READER
    # relative between-subject spread of every reader parameter
    subject_spread: float = 0.05
    # dyslexic readers interpolate each parameter independently between the control
    # and dyslexic values with a weight drawn from U(severity_min, 1)
    severity_min: float = 1.0
    # probability that a subject's ROI column is missing entirely
    roi_dropout: float = 0.0
    n_words: int = 96
    line_length: float = 900.0
    line_height: float = 75.0
    char_width: float = 16.0
    screen_width: float = 1280.0
    screen_height: float = 1200.0
    text_id: str = "synthetic"

    def __post_init__(self):
        if self.n_control < 0 or self.n_dyslexic < 0:
            raise CohortError("subject counts must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise CohortError("seed must be a 64-bit unsigned integer")
        for name in ("control", "dyslexic"):
            p = getattr(self, name)
            for f in ("regression_prob", "skip_prob", "refixation_prob", "correction_prob"):
                v = getattr(p, f)
                if not 0.0 <= v <= 1.0:
                    raise CohortError(f"{name}_{f} must lie in [0, 1], got {v}")
            for f in ("fixation_duration_sd", "saccade_length_sd"):
                if getattr(p, f) < 0:
                    raise CohortError(f"{name}_{f} must be >= 0")
            if p.regression_span < 1:
                raise CohortError(f"{name}_regression_span must be >= 1")
            if p.fixation_duration_mean <= 0 or p.saccade_length_mean <= 0:
                raise CohortError(f"{name}: means must be positive")
        if not 0.0 <= self.severity_min <= 1.0:
            raise CohortError("severity_min must lie in [0, 1]")
        if self.subject_spread < 0 or not 0 <= self.roi_dropout <= 1:
            raise CohortError("subject_spread must be >= 0 and roi_dropout in [0, 1]")
        if self.n_words < 1 or self.line_length <= 0 or self.line_height <= 0 or self.char_width <= 0:
            raise CohortError("layout geometry must be positive")

    def to_flat(self) -> dict[str, object]:
        out: dict[str, object] = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, ReaderParams):
                for g in fields(v):
                    out[f"{f.name}_{g.name}"] = getattr(v, g.name)
            else:
                out[f.name] = v
        return out

    @classmethod
    def from_flat(cls, d: dict[str, str]) -> "SynthSpec":
        kw: dict[str, object] = {}
        readers = {"control": asdict(CONTROL_READER), "dyslexic": asdict(DYSLEXIC_READER)}
        types = {f.name: f.type for f in fields(cls)}
        for key, raw in d.items():
            cls_name, _, rest = key.partition("_")
            if cls_name in readers and rest in readers[cls_name]:
                readers[cls_name][rest] = float(raw)
            elif key in types and key not in readers:
                if key == "text_id":
                    kw[key] = str(raw)
                elif key in ("n_control", "n_dyslexic", "seed", "n_words"):
                    kw[key] = int(raw)
                else:
                    kw[key] = float(raw)
            else:
                raise CohortError(f"unknown synth spec key {key!r}")
        kw["control"] = ReaderParams(**readers["control"])
        kw["dyslexic"] = ReaderParams(**readers["dyslexic"])
        return cls(**kw)


def read_keyvalue(path) -> dict[str, str]:
    """Flat ``key = value`` text file; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CohortError(f"{path}:{lineno}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def write_keyvalue(d: dict[str, object], path) -> None:
    Path(path).write_text("".join(f"{k} = {v}\n" for k, v in d.items()), encoding="utf-8")


def read_synth_spec(path) -> SynthSpec:
    return SynthSpec.from_flat(read_keyvalue(path))


def write_synth_spec(spec: SynthSpec, path) -> None:
    write_keyvalue(spec.to_flat(), path)


def make_layout(n_words: int, rng: np.random.Generator, *, line_length=900.0, line_height=75.0,
                char_width=16.0, screen_width=1280.0, screen_height=1200.0, text_id=None) -> TextLayout:
    """Lay out ``n_words`` words of 2-10 letters in left-aligned lines of at most ``line_length`` px."""
    left = max((screen_width - line_length) / 2.0, 0.0)
    top = line_height
    box_half = 0.45 * line_height
    letters = rng.integers(2, 11, size=n_words)
    words, line, x = [], 0, left
    for i, n in enumerate(letters):
        width = float(n) * char_width
        if x > left and x + width > left + line_length:
            line += 1
            x = left
        yc = top + line * line_height
        words.append(Word(i, line, x, x + width, yc - box_half, yc + box_half))
        x += width + char_width
    if words and words[-1].y_max > screen_height:
        raise CohortError(f"{n_words} words need {line + 1} lines and do not fit a {screen_height:g} px screen")
    return TextLayout(screen_width, screen_height, line_height, tuple(words), text_id)


def _blend_params(control: ReaderParams, dyslexic: ReaderParams, severity_min: float,
                  rng: np.random.Generator) -> ReaderParams:
    if severity_min >= 1.0:
        return dyslexic
    a = np.array(astuple(control))
    b = np.array(astuple(dyslexic))
    w = rng.uniform(severity_min, 1.0, size=len(a))
    return ReaderParams(*(a + w * (b - a)).tolist())


def _jitter_params(p: ReaderParams, spread: float, rng: np.random.Generator) -> ReaderParams:
    if spread == 0:
        return p
    f = np.exp(rng.normal(0.0, spread, size=8))
    return ReaderParams(
        p.fixation_duration_mean * f[0],
        p.fixation_duration_sd * f[1],
        p.saccade_length_mean * f[2],
        p.saccade_length_sd * f[3],
        min(p.regression_prob * f[4], 0.45),
        min(p.skip_prob * rng.uniform(0.0, 2.0), 0.9),
        min(p.refixation_prob * f[6], 0.45),
        1.0 + (p.regression_span - 1.0) * f[7],
        min(p.correction_prob * rng.uniform(0.0, 2.0), 0.9),
    )


# landing points snapped into a word stay clear of its box edge, so tiny
# displacements cannot flip the ROI
EDGE_INSET = 0.01  # one unit of the 0.01 px output rounding


def simulate_reading(layout: TextLayout, params: ReaderParams, rng: np.random.Generator,
                     max_fixations: int | None = None):
    """First-order Markov walk of fixations over ``layout``; returns (x, y, t_start, t_end)."""
    b = layout.boxes
    line = np.array([w.line for w in layout.words])
    n = len(b)
    width = b[:, 1] - b[:, 0]
    ycen = 0.5 * (b[:, 2] + b[:, 3])
    half = 0.5 * (b[:, 3] - b[:, 2])
    first_on_line = {}
    last_on_line = {}
    for i, ln in enumerate(line):
        first_on_line.setdefault(int(ln), i)
        last_on_line[int(ln)] = i
    max_fixations = max_fixations or 30 * n

    xs, ws = [], []
    w = 0
    x = b[0, 0] + rng.uniform(0.2, 0.5) * width[0]
    xs.append(x)
    ws.append(w)
    fresh = True  # first fixation of the current visit to word w
    seen_on_line = [w]
    while len(xs) < max_fixations:
        ln = int(line[w])
        if params.correction_prob > 0 and rng.random() < params.correction_prob:
            nx = x - rng.uniform(20.0, 40.0)
            if nx >= b[w, 0]:
                x = nx
                xs.append(x)
                ws.append(w)
                continue
        # refixation and regression are decided once per word visit, so their
        # counts scale with the text rather than with the number of saccades
        if fresh and rng.random() < params.refixation_prob:
            nx = x + rng.uniform(20.0, 40.0)
            if nx <= b[w, 1]:
                x = nx
                xs.append(x)
                ws.append(w)
                fresh = False
                continue
        fresh = True
        earlier = [v for v in seen_on_line if v < w]
        if earlier and rng.random() < params.regression_prob:
            # regressions return to words already fixated on this line
            back = 1 + int(rng.poisson(params.regression_span - 1.0))
            w = earlier[-min(back, len(earlier))]
            x = b[w, 0] + rng.uniform(0.2, 0.8) * width[w]
            xs.append(x)
            ws.append(w)
            continue
        step = max(rng.normal(params.saccade_length_mean, params.saccade_length_sd), 10.0)
        target = x + step
        if rng.random() < params.skip_prob and w + 1 <= last_on_line[ln]:
            target += width[w + 1]
        if target > b[last_on_line[ln], 1]:
            if ln + 1 not in first_on_line:
                break
            w = first_on_line[ln + 1]
            x = b[w, 0] + rng.uniform(0.0, 0.5) * width[w]
            seen_on_line = [w]
        else:
            cand = np.nonzero((line == ln) & (b[:, 1] >= target))[0]
            nw = int(cand[0])
            fresh = nw != w
            w = nw
            if w not in seen_on_line:
                seen_on_line = sorted(seen_on_line + [w])
            x = max(target, b[w, 0] + EDGE_INSET)
        xs.append(x)
        ws.append(w)

    ws = np.array(ws)
    xs = np.round(np.array(xs), 2)
    ys = np.round(ycen[ws] + np.clip(rng.normal(0.0, 0.15 * half[ws]), -0.9 * half[ws], 0.9 * half[ws]), 2)
    dur = np.maximum(rng.normal(params.fixation_duration_mean, params.fixation_duration_sd, size=len(ws)), 60.0)
    dur = np.round(dur)
    t_start = np.concatenate([[0.0], np.cumsum(dur[:-1] + 25.0)])
    return xs, ys, t_start, t_start + dur


def generate_synthetic_cohort(spec: SynthSpec) -> Cohort:
    """Deterministic synthetic cohort: controls first, then dyslexic readers."""
    if spec.n_control + spec.n_dyslexic == 0:
        raise CohortError("degenerate synth spec: zero subjects in both classes")
    layout_ss, subj_ss = np.random.SeedSequence(spec.seed).spawn(2)
    layout = make_layout(
        spec.n_words, np.random.default_rng(layout_ss), line_length=spec.line_length,
        line_height=spec.line_height, char_width=spec.char_width,
        screen_width=spec.screen_width, screen_height=spec.screen_height, text_id=spec.text_id,
    )
    plan = [("control", spec.control)] * spec.n_control + [("dyslexic", spec.dyslexic)] * spec.n_dyslexic
    sessions = []
    for i, ((label, params), ss) in enumerate(zip(plan, subj_ss.spawn(len(plan)))):
        rng = np.random.default_rng(ss)
        if label == "dyslexic":
            params = _blend_params(spec.control, spec.dyslexic, spec.severity_min, rng)
        p = _jitter_params(params, spec.subject_spread, rng)
        x, y, t0, t1 = simulate_reading(layout, p, rng)
        s = ReadingSession(f"S{i:03d}", label, spec.text_id, x, y, t0, t1)
        if rng.random() >= spec.roi_dropout:
            s = assign_rois(s, layout)
        sessions.append(s)
    return Cohort(tuple(sessions), layout, spec.text_id)
