import numpy as np
import pytest

from readscreen.ingest import (
    Cohort,
    ReadingSession,
    SynthSpec,
    TextLayout,
    Word,
    generate_synthetic_cohort,
)
from readscreen.features import extract_cohort_features


def grid_layout(n_lines=3, per_line=5, width=100.0, gap=20.0, line_height=60.0,
                box_half=20.0, left=50.0, top=60.0, screen=(1000.0, 400.0), text_id=None):
    """Regular layout: equal-width words, ``gap`` px apart, one row per line."""
    words = []
    for ln in range(n_lines):
        yc = top + ln * line_height
        for j in range(per_line):
            x0 = left + j * (width + gap)
            words.append(Word(len(words), ln, x0, x0 + width, yc - box_half, yc + box_half))
    return TextLayout(screen[0], screen[1], line_height, tuple(words), text_id)


def session_at(points, durations=None, roi=None, subject_id="s1", label="control", text_id="t"):
    """Session with fixations at ``points``; 10 ms gaps between fixations."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    dur = np.full(n, 100.0) if durations is None else np.asarray(durations, dtype=float)
    t0 = np.concatenate([[0.0], np.cumsum(dur[:-1] + 10.0)])
    return ReadingSession(subject_id, label, text_id, pts[:, 0], pts[:, 1], t0, t0 + dur, roi)


@pytest.fixture
def layout():
    return grid_layout()


@pytest.fixture(scope="session")
def planted_cohort():
    return generate_synthetic_cohort(SynthSpec(seed=0))


@pytest.fixture(scope="session")
def planted_features(planted_cohort):
    return extract_cohort_features(planted_cohort)


@pytest.fixture
def small_cohort():
    c = generate_synthetic_cohort(SynthSpec(n_control=6, n_dyslexic=5, seed=3, n_words=40))
    assert isinstance(c, Cohort)
    return c


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
