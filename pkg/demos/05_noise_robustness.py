# coding: utf-8

# # How much tracker noise can the screen tolerate?
#
# Every fixation is displaced by Gaussian noise of standard deviation sigma
# pixels, words are reassigned from the new positions and features are
# recomputed. In train-on-clean mode the models from the original LOOCV
# folds score each subject's noisy copy; 10 replicates per sigma.

import numpy as np

from readscreen.evaluation import NoiseSpec, PipelineSpec, inject_noise, noise_sweep
from readscreen.ingest import SynthSpec, generate_synthetic_cohort

cohort = generate_synthetic_cohort(SynthSpec(seed=0))

# ## What noise does to a single session

s = cohort.sessions[0]
for sigma in (10, 50, 100):
    n = inject_noise(s, cohort.layout, sigma, seed=1)
    print(sigma, "px:", int(np.sum(n.roi != s.roi)), "of", len(s), "fixations change word")

# ## The sweep

spec = PipelineSpec("svm", "one_se")
res = noise_sweep(cohort, spec, NoiseSpec(mode="train_on_clean"))
print("clean", res.clean_accuracy, "features", res.features)
for row in res.rows():
    print(f"sigma {row['sigma']:5.0f}   mean {row['mean']:6.2f}   [{row['min']:6.2f}, {row['max']:6.2f}]")

# Retraining on the noisy data instead (selection included) takes longer;
# two sigmas are enough to see the difference.

res2 = noise_sweep(cohort, spec, NoiseSpec(sigma_grid=(10, 100), replicates=3))
print(res2.rows())
