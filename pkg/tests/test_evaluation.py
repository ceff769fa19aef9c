import json

import numpy as np
import pytest

from readscreen.evaluation import (
    EvalReport,
    EvaluationError,
    NoiseSpec,
    PipelineSpec,
    default_battery,
    emit_report,
    impute_median,
    inject_noise,
    loocv,
    noise_sweep,
    read_table_csv,
    run_battery,
    select_features,
    trivial_accuracy,
)
from readscreen.features import FEATURE_NAMES, FeatureMatrix, extract_features
from readscreen.ingest import NO_ROI, SynthSpec, assign_rois, generate_synthetic_cohort

from conftest import grid_layout, session_at


def labelled(y):
    return tuple("dyslexic" if v > 0 else "control" for v in y)


def separable_matrix(seed=0, n_ctrl=20, n_dys=15):
    rng = np.random.default_rng(seed)
    y = np.array([-1.0] * n_ctrl + [1.0] * n_dys)
    X = rng.standard_normal((len(y), len(FEATURE_NAMES)))
    X[:, 4] = 3.0 * y + rng.uniform(-0.5, 0.5, len(y))
    ids = tuple(f"s{i:02d}" for i in range(len(y)))
    return FeatureMatrix(ids, labelled(y), X)


@pytest.fixture(scope="module")
def tiny():
    cohort = generate_synthetic_cohort(SynthSpec(n_control=10, n_dyslexic=8, seed=5, n_words=60))
    from readscreen.features import extract_cohort_features
    return cohort, extract_cohort_features(cohort)


# -- imputation and baseline ------------------------------------------------------------


def test_impute_even_median():
    train = np.array([[1.0], [2.0], [3.0], [100.0]])
    _, te, med = impute_median(train, np.array([[np.nan]]))
    assert te[0, 0] == 2.5 and med[0] == 2.5


def test_impute_identity():
    X = np.random.default_rng(0).standard_normal((6, 4))
    tr, te, _ = impute_median(X, X[:2])
    assert np.array_equal(tr, X) and np.array_equal(te, X[:2])


def test_impute_singleton_and_train_cells():
    tr, _, _ = impute_median(np.array([[7.0, 1.0], [np.nan, 3.0]]))
    assert tr[1, 0] == 7.0


def test_impute_uses_training_rows_only():
    _, te, _ = impute_median(np.array([[1.0], [3.0], [np.nan]]), np.array([[np.nan], [1e6]]))
    assert te[:, 0].tolist() == [2.0, 1e6]


def test_impute_all_missing_column():
    with pytest.raises(EvaluationError, match="entirely missing"):
        impute_median(np.array([[1.0, np.nan], [2.0, np.nan]]))


def test_trivial_accuracy_examples():
    labels = ["dyslexic"] * 32 + ["control"] * 37
    assert f"{trivial_accuracy(labels):.2f}" == "53.62"
    assert trivial_accuracy(["control"] * 9) == 100.0
    assert trivial_accuracy([0, 1] * 10) == 50.0
    shuffled = list(np.random.default_rng(0).permutation(labels))
    assert trivial_accuracy(shuffled) == trivial_accuracy(labels)
    with pytest.raises(EvaluationError):
        trivial_accuracy([])


# -- pipelines and LOOCV ----------------------------------------------------------------


def test_battery_shape():
    rows = default_battery()
    assert len(rows) == 12
    assert len({p.name for p in rows}) == 12
    with pytest.raises(EvaluationError):
        PipelineSpec("centroid", k=5)
    with pytest.raises(EvaluationError):
        PipelineSpec("forest")


def test_separable_cohort_is_perfect():
    fm = separable_matrix()
    res = loocv(fm, PipelineSpec("svm", "one_se"))
    assert res.accuracy == 100.0
    assert FEATURE_NAMES[4] in res.features


def test_loocv_deterministic(tiny):
    _, fm = tiny
    for spec in (PipelineSpec("svm", "one_se"), PipelineSpec("centroid", "min_mse", k=3, kmeans_seed=4)):
        a, b = loocv(fm, spec), loocv(fm, spec)
        assert np.array_equal(a.predictions, b.predictions)
        assert a.fold_hashes == b.fold_hashes


def test_loocv_errors(tiny):
    _, fm = tiny
    with pytest.raises(EvaluationError, match="both classes"):
        loocv(fm.subset(np.flatnonzero(fm.y < 0)), PipelineSpec("gnb", "none"))
    fm_u = FeatureMatrix(fm.subject_ids, ("unknown",) + fm.labels[1:], fm.X)
    with pytest.raises(EvaluationError, match="labelled"):
        loocv(fm_u, PipelineSpec("gnb", "none"))
    with pytest.raises(EvaluationError, match="at least 3"):
        loocv(fm.subset([0, 15]), PipelineSpec("gnb", "none"))


def test_selection_fallback_when_nothing_selected():
    rng = np.random.default_rng(2)
    y = np.array([-1.0, 1.0] * 15)
    fm = FeatureMatrix(tuple(map(str, range(30))), labelled(y), rng.standard_normal((30, len(FEATURE_NAMES))))
    spec = PipelineSpec("svm", "one_se", fold_seed=1)
    sel = select_features(fm.X, y, spec)
    if sel.fallback:
        assert len(sel.features) >= 1
    assert len(loocv(fm, spec).features) >= 1


def poisoned(fm, i, seed):
    X = np.array(fm.X)
    X[i] = np.random.default_rng(seed).choice([-1e6, 1e6], X.shape[1])
    return FeatureMatrix(fm.subject_ids, fm.labels, X, fm.names)


@pytest.mark.parametrize("spec", default_battery(kmeans_seed=1), ids=lambda p: p.name)
def test_held_out_row_never_reaches_its_fold(tiny, spec):
    _, fm = tiny
    clean = loocv(fm, spec)
    feats = [fm.names.index(f) for f in clean.features]
    base = loocv(fm, spec, features=feats)
    for i in (0, 7, 12, 17):
        dirty = loocv(poisoned(fm, i, seed=i), spec, features=feats)
        assert dirty.fold_hashes[i] == base.fold_hashes[i]
        # the poison is visible to every other fold, so the comparison has teeth
        others = [j for j in range(len(fm)) if j != i]
        assert all(dirty.fold_hashes[j] != base.fold_hashes[j] for j in others)


def test_held_out_row_never_reaches_its_fold_nested(tiny):
    _, fm = tiny
    spec = PipelineSpec("svm", "one_se", nested=True)
    base = loocv(fm, spec)
    dirty = loocv(poisoned(fm, 3, seed=0), spec)
    assert dirty.fold_hashes[3] == base.fold_hashes[3]


def test_run_battery_order_and_determinism(tiny):
    cohort, _ = tiny
    pipes = [PipelineSpec("gnb", "none"), PipelineSpec("svm", "none"), PipelineSpec("centroid", "none", k=3)]
    a = run_battery([cohort], pipes)
    b = run_battery([cohort], pipes)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())
    assert [r["name"] for r in a.to_dict()["pipelines"]] == [p.name for p in pipes]


# -- noise ------------------------------------------------------------------------------


def test_inject_noise_continuity(small_cohort):
    lay = small_cohort.layout
    for s in small_cohort.sessions:
        a = extract_features(s, lay).values
        b = extract_features(inject_noise(s, lay, 1e-9, 0), lay).values
        ok = np.isnan(a) == np.isnan(b)
        assert ok.all()
        m = ~np.isnan(a)
        assert np.all(np.abs(a[m] - b[m]) <= 1e-3 * np.maximum(np.abs(a[m]), 1e-12))


def test_inject_noise_seeds_and_metadata(small_cohort):
    s, lay = small_cohort.sessions[0], small_cohort.layout
    a, b, c = (inject_noise(s, lay, 20.0, k) for k in (1, 1, 2))
    assert a == b
    assert not np.array_equal(a.x, c.x)
    assert np.array_equal(a.t_start, c.t_start) and np.array_equal(a.t_end, s.t_end)
    assert (a.subject_id, a.label, a.text_id) == (s.subject_id, s.label, s.text_id)
    assert np.all((a.x >= 0) & (a.x <= lay.screen_width) & (a.y >= 0) & (a.y <= lay.screen_height))
    with pytest.raises(EvaluationError):
        inject_noise(s, lay, 0.0, 1)


def test_inject_noise_reassigns_rois():
    lay = grid_layout(width=100.0)
    pts = [w.center for w in lay.words]
    s = assign_rois(session_at(pts), lay)
    changed = {}
    for sigma in (10.0, 100.0):
        counts = [np.sum(inject_noise(s, lay, sigma, seed).roi != s.roi) for seed in range(10)]
        changed[sigma] = np.mean(counts)
    assert changed[100.0] > changed[10.0]
    far = inject_noise(s, lay, 1e4, 0)
    assert np.sum(far.roi == NO_ROI) > 0


def test_noise_spec_validation():
    assert len(NoiseSpec().sigma_grid) == 10
    with pytest.raises(EvaluationError):
        NoiseSpec(sigma_grid=(0.0,))
    with pytest.raises(EvaluationError):
        NoiseSpec(mode="both")
    with pytest.raises(EvaluationError):
        NoiseSpec(replicates=0)


def test_noise_sweep_counts_and_bands(small_cohort):
    spec = PipelineSpec("svm", "none")
    nr = noise_sweep(small_cohort, spec, NoiseSpec(mode="train_on_clean"))
    assert nr.n_datasets == 100 and len(nr.rows()) == 10
    assert np.all(nr.min <= nr.mean) and np.all(nr.mean <= nr.max)


def test_train_on_clean_continuity(small_cohort):
    spec = PipelineSpec("svm", "none")
    nr = noise_sweep(small_cohort, spec, NoiseSpec(sigma_grid=(1e-9,), replicates=3, mode="train_on_clean"))
    assert np.all(nr.accuracies == nr.clean_accuracy)


def test_noise_drops_accuracy(planted_cohort):
    spec = PipelineSpec("svm", "one_se")
    nr = noise_sweep(planted_cohort, spec, NoiseSpec(sigma_grid=(10, 100), replicates=3, mode="train_on_clean"))
    assert nr.mean[1] <= nr.mean[0]


def test_noise_sweep_train_on_noisy_reproducible(small_cohort):
    noise = NoiseSpec(sigma_grid=(30,), replicates=2, noise_seed=4)
    spec = PipelineSpec("gnb", "none")
    a, b = noise_sweep(small_cohort, spec, noise), noise_sweep(small_cohort, spec, noise, threads=2)
    assert np.array_equal(a.accuracies, b.accuracies)


# -- reports ----------------------------------------------------------------------------


def test_single_pipeline_csv(tmp_path, tiny):
    cohort, _ = tiny
    rep = run_battery([cohort], [PipelineSpec("gnb", "none")])
    emit_report(rep, tmp_path / "t.csv", include_trivial=False)
    rows = read_table_csv(tmp_path / "t.csv")
    assert len(rows) == 2 and rows[0] == ["classifier", cohort.text_id]
    emit_report(rep, tmp_path / "t2.csv")
    assert read_table_csv(tmp_path / "t2.csv")[-1][0] == "Trivial Accuracy"


def test_report_accuracy_is_exact_rational(tiny):
    cohort, fm = tiny
    rep = run_battery([cohort], [PipelineSpec("svm", "none")])
    r = rep.results[(0, cohort.text_id)]
    assert r.accuracy == 100.0 * r.n_correct / len(fm)
    assert r.to_dict()["accuracy"] == round(100.0 * r.n_correct / len(fm), 2)


def test_battery_row_order(tmp_path, tiny):
    cohort, _ = tiny
    pipes = default_battery()[::-1]
    rep = EvalReport([cohort.text_id], pipes)
    for i in range(len(pipes)):
        rep.results[(i, cohort.text_id)] = type("R", (), {"accuracy": float(i)})()
    emit_report(rep, tmp_path / "t.csv")
    rows = read_table_csv(tmp_path / "t.csv")
    assert [r[0] for r in rows[1:]] == [p.name for p in pipes]
    assert [float(r[1]) for r in rows[1:]] == list(range(12))


def test_noise_csv_and_json(tmp_path, small_cohort):
    nr = noise_sweep(small_cohort, PipelineSpec("gnb", "none"), NoiseSpec(replicates=2, mode="train_on_clean"))
    rep = EvalReport([small_cohort.text_id], [], noise=[nr])
    (path,) = emit_report(rep, tmp_path / "n.csv")
    rows = read_table_csv(path)
    assert rows[0] == ["mode", "sigma", "mean", "min", "max", "replicates"]
    assert len(rows) == 11
    for r in rows[1:]:
        assert float(r[3]) <= float(r[2]) <= float(r[4])
    emit_report(rep, tmp_path / "n.json", "json")
    d = json.loads((tmp_path / "n.json").read_text())
    assert d["noise"][0]["n_datasets"] == 20
    with pytest.raises(EvaluationError):
        emit_report(rep, tmp_path / "x", "xml")
