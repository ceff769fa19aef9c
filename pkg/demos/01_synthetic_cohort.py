# coding: utf-8

# # A synthetic reading cohort
#
# Two groups of simulated readers go through the same text. The dyslexic
# group makes shorter saccades, refixates words more often and regresses a
# little more. Everything downstream (features, selection, classifiers)
# only sees fixation coordinates, timestamps and word boxes.

import numpy as np

from readscreen.ingest import (CONTROL_READER, DYSLEXIC_READER, SynthSpec,
                               generate_synthetic_cohort, validate_cohort)

spec = SynthSpec(seed=0)
cohort = generate_synthetic_cohort(spec)
print(cohort.label_counts())

# The two reader profiles differ in three places.

for name in ("saccade_length_mean", "refixation_prob", "regression_prob"):
    print(f"{name:22s} control={getattr(CONTROL_READER, name):7.2f} "
          f"dyslexic={getattr(DYSLEXIC_READER, name):7.2f}")

# ## One session

s = cohort.sessions[0]
print(s.subject_id, s.label, len(s), "fixations")
print(np.column_stack([s.x[:8], s.y[:8], s.roi[:8]]))

# Durations in ms, the first few fixations
print(s.t_end[:8] - s.t_start[:8])

# ## The text layout
#
# Words are boxes on a grid of lines; a fixation belongs to the word whose
# box contains it, or to no word at all.

lay = cohort.layout
print(lay.n_words, "words on", len(lay.line_lengths()), "lines")
print(lay.words[0])

# ## Validation

report = validate_cohort(cohort)
print(report.summary)
print(report.issues[:5])
