# coding: utf-8

# # Picking features with the LASSO
#
# The class label (+1 dyslexic, -1 control) is regressed on the standardised
# features with an L1 penalty. Five-fold cross-validation over a grid of 100
# penalties gives two choices: the penalty with the smallest CV error, and the
# largest penalty within one standard error of it (fewer features).

import numpy as np

from readscreen.evaluation import impute_median
from readscreen.features import extract_cohort_features
from readscreen.ingest import SynthSpec, generate_synthetic_cohort
from readscreen.selection import cv_lasso, fit_standardizer

fm = extract_cohort_features(generate_synthetic_cohort(SynthSpec(seed=0)))
filled, _, _ = impute_median(fm.X)
Z = fit_standardizer(filled).transform(filled)

res = cv_lasso(Z, fm.y, n_folds=5, fold_seed=0)
print("lambda_min", res.lambda_min_mse, "lambda_1se", res.lambda_1se)

print("min-MSE features:", [fm.names[i] for i in res.selected_features_min])
print("1SE features:    ", [fm.names[i] for i in res.selected_features_1se])

# ## The CV curve

for k in range(0, 100, 10):
    print(f"{res.lambda_grid[k]:.4f}  {res.mean_cv_mse[k]:.4f} +- {res.se_cv_mse[k]:.4f}")

# ## Order of entry along the path
#
# The first few non-empty supports show which features the penalty lets in first.

seen = []
for sup in res.path_support:
    for j in sup:
        if j not in seen:
            seen.append(j)
print([fm.names[j] for j in seen[:8]])

# Coefficients at lambda_1SE
coef = res.fit_1se.coef
order = np.argsort(-np.abs(coef))
for j in order[: np.count_nonzero(coef)]:
    print(f"{fm.names[j]:28s} {coef[j]:+.4f}")
