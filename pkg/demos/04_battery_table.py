# coding: utf-8

# # The classifier battery
#
# Three classifiers (linear SVM, Gaussian naive Bayes, k-means with cluster
# majority labels) combined with three feature choices, each scored by
# leave-one-out cross-validation. Selection runs once on the full cohort;
# the nested variant reruns it inside every fold and is usually a bit lower.

from readscreen.evaluation import PipelineSpec, default_battery, loocv, run_battery
from readscreen.features import extract_cohort_features
from readscreen.ingest import SynthSpec, generate_synthetic_cohort

cohort = generate_synthetic_cohort(SynthSpec(seed=0))
report = run_battery([cohort], default_battery())

for i, p in enumerate(report.pipelines):
    r = report.results[(i, cohort.text_id)]
    print(f"{p.name:45s} {r.accuracy:6.2f}  {', '.join(r.features[:3])}")
print(f"{'Trivial Accuracy':45s} {report.trivial[cohort.text_id]:6.2f}")

# ## Nested selection for one row
#
# Slower (the LASSO CV runs 69 times), but no subject ever influences the
# features used to classify it.

fm = extract_cohort_features(cohort)
nested = loocv(fm, PipelineSpec("svm", "one_se", nested=True))
print(nested.spec.name, f"{nested.accuracy:.2f}")

# Which subjects were misclassified?
wrong = [s for s, t, p in zip(nested.subject_ids, nested.truth, nested.predictions) if t != p]
print(wrong)
