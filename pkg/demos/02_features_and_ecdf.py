# coding: utf-8

# # From fixations to features
#
# Every session becomes a vector of 35 numbers: saccade statistics, counts
# and fractions of the six movement classes (short/medium/long, forward or
# backward) and word-level statistics from the visit structure.

import numpy as np

from readscreen.features import (FEATURE_NAMES, classify_movement, compute_saccades, ecdf,
                                 extract_cohort_features)
from readscreen.ingest import SynthSpec, generate_synthetic_cohort

cohort = generate_synthetic_cohort(SynthSpec(seed=0))
fm = extract_cohort_features(cohort)
print(fm.X.shape)

# ## Movement classes of one session

s = cohort.sessions[0]
sac = compute_saccades(s)
kinds = [classify_movement(m).value for m in sac]
print({k: kinds.count(k) for k in sorted(set(kinds))})

# ## Group means of a few features

y = fm.y
for name in ("mean_saccade_length", "n_short_forward", "n_multiply_fixated", "mean_fixation_duration"):
    col = fm.column(name)
    print(f"{name:24s} control {np.nanmean(col[y < 0]):8.2f}   dyslexic {np.nanmean(col[y > 0]):8.2f}")

# ## Empirical CDFs
#
# The step function is returned as (value, F(value)) pairs; plotting is
# left to whatever tool you like.

col = fm.column("mean_saccade_length")
ctrl, dys = ecdf(col[y < 0]), ecdf(col[y > 0])
print(ctrl[:3], "...", ctrl[-1])
print(dys[:3], "...", dys[-1])

# median of each group read off the ECDF
med = lambda pts: next(v for v, f in pts if f >= 0.5)
print("medians", med(ctrl), med(dys))

# Missing values are NaN; a subject who never fixates a word has no gaze durations.
print(int(np.isnan(fm.X).sum()), "missing cells of", fm.X.size)
print(len(FEATURE_NAMES), "features")
