import math

import numpy as np
import pytest

from mitensor.errors import DimensionMismatch, InsufficientData, SingleClassData
from mitensor.features import FeatureVector
from mitensor.ingest import ClassLabel
from mitensor.svm import (
    BinarySvmModel,
    KernelSpec,
    TrainConfig,
    argmax_label,
    class_scores,
    decision,
    decision_batch,
    dual_objective,
    gram_matrix,
    kernel_eval,
    predict,
    train_binary,
    train_multiclass,
)
from oracles import brute_force_dual
from synth import blob_features, nearest_centroid

RBF1 = KernelSpec("rbf", 1.0)


def full_alphas(model, x):
    """Scatter the stored multipliers back onto the training rows."""
    out = np.zeros(len(x))
    for sv, a in zip(model.support_vectors, model.alphas):
        out[np.flatnonzero((x == sv).all(axis=1))[0]] = a
    return out


def test_kernel_eval_examples():
    assert kernel_eval(RBF1, [0.3, -2.0], [0.3, -2.0]) == 1.0
    assert kernel_eval(KernelSpec("linear"), [1, 2], [3, 4]) == 11.0
    assert kernel_eval(KernelSpec("rbf", 0.5), [0, 0], [1, 1]) == pytest.approx(math.exp(-1), rel=1e-15)
    with pytest.raises(DimensionMismatch):
        kernel_eval(RBF1, [1, 2], [1, 2, 3])


def test_kernel_spec_validation():
    for bad in (None, 0.0, -1.0, float("inf")):
        with pytest.raises(ValueError):
            KernelSpec("rbf", bad)
    with pytest.raises(ValueError):
        KernelSpec("poly", 1.0)


def test_gram_matches_pointwise():
    rng = np.random.default_rng(2)
    x, z = rng.normal(size=(5, 3)), rng.normal(size=(4, 3))
    for spec in (RBF1, KernelSpec("linear")):
        g = gram_matrix(spec, x, z)
        ref = [[kernel_eval(spec, a, b) for b in z] for a in x]
        assert g == pytest.approx(np.array(ref), rel=1e-13)


def test_separable_pair():
    x = np.array([[-1.0], [1.0]])
    m = train_binary(x, [-1, 1], c=10, kernel=KernelSpec("linear"))
    assert decision(m, [-1.0]) < 0 < decision(m, [1.0])
    assert abs(decision(m, [0.0])) < 1
    assert m.converged


def test_xor_rbf():
    x = np.array([(0, 0), (1, 1), (0, 1), (1, 0)], dtype=float)
    y = np.array([-1, -1, 1, 1], dtype=float)
    m = train_binary(x, y, c=10, kernel=RBF1)
    assert np.all(np.sign(decision_batch(m, x)) == y)


def test_single_class_and_shape_errors():
    x = np.zeros((3, 2))
    with pytest.raises(SingleClassData):
        train_binary(x, [1, 1, 1])
    with pytest.raises(DimensionMismatch):
        train_binary(x, [1, -1])
    with pytest.raises(InsufficientData):
        train_binary(np.zeros((1, 2)), [1])
    m = train_binary(np.array([[0.0, 0.0], [1.0, 1.0]]), [1, -1])
    with pytest.raises(DimensionMismatch):
        decision(m, [1.0, 2.0, 3.0])


def test_rbf_decision_far_away_is_bias():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(20, 2))
    y = np.where(x[:, 0] > 0, 1.0, -1.0)
    m = train_binary(x, y, c=1.0, kernel=RBF1)
    far = x.mean(axis=0) + np.array([10.0, 0.0]) + np.abs(x).max()
    # every kernel term is below exp(-100)
    assert abs(decision(m, far) - m.bias) < 1e-6


def _random_problem(rng, kind):
    n = int(rng.integers(2, 7))
    d = 2 if kind == "rbf" else 6
    x = rng.normal(size=(n, d))
    y = rng.choice([-1.0, 1.0], size=n)
    y[0], y[1] = 1.0, -1.0
    spec = KernelSpec("rbf", 0.5) if kind == "rbf" else KernelSpec("linear")
    return x, y, spec


@pytest.mark.parametrize("kind", ["rbf", "linear"])
def test_feasibility_kkt_and_small_instance_optimum(kind):
    rng = np.random.default_rng(10 if kind == "rbf" else 20)
    for trial in range(25):
        x, y, spec = _random_problem(rng, kind)
        c = float(rng.choice([0.1, 1.0, 10.0]))
        tol = 1e-3
        m = train_binary(x, y, c=c, kernel=spec, tol=tol, seed=trial)
        assert np.all(m.alphas > 0) and np.all(m.alphas <= c + 1e-9)
        assert abs(np.sum(m.alphas * m.signs)) <= 1e-6
        alpha = full_alphas(m, x)
        g = gram_matrix(spec, x, x)
        best, _ = brute_force_dual(y, g, c)
        assert dual_objective(alpha, y, g) >= best - 1e-4

        margins = y * decision_batch(m, x)
        slack = 10 * tol
        ok = np.where(alpha <= 0, margins >= 1 - slack,
                      np.where(alpha >= c, margins <= 1 + slack, np.abs(margins - 1) <= slack))
        assert ok.mean() >= 0.95


def test_free_support_vectors_sit_on_margin():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(40, 2))
    y = np.where(x[:, 0] + 0.3 * x[:, 1] > 0, 1.0, -1.0)
    m = train_binary(x, y, c=5.0, kernel=RBF1, tol=1e-3)
    free = (m.alphas > 1e-8) & (m.alphas < m.c - 1e-8)
    assert free.any()
    f = decision_batch(m, m.support_vectors[free])
    assert np.all(np.abs(np.abs(f) - 1) <= 1e-2)


def test_training_is_reproducible():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(60, 2))
    y = np.where(x[:, 0] * x[:, 1] > 0, 1.0, -1.0)
    a = train_binary(x, y, c=1.0, kernel=RBF1, seed=3)
    b = train_binary(x, y, c=1.0, kernel=RBF1, seed=3)
    assert a.bias == b.bias
    assert np.array_equal(a.alphas, b.alphas)
    assert np.array_equal(a.support_vectors, b.support_vectors)


def test_update_cap_reports_nonconvergence():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(60, 2))
    y = np.where(x[:, 0] * x[:, 1] > 0, 1.0, -1.0)
    m = train_binary(x, y, c=1.0, kernel=RBF1, max_iter=3)
    assert not m.converged
    assert m.updates == 3


def test_multiclass_with_two_classes_has_two_degenerate_models():
    data = blob_features(per_class=20, labels=(ClassLabel.NON_DEMENTED, ClassLabel.MILD_DEMENTED))
    model = train_multiclass(data)
    assert len(model.models) == 4
    assert [m.degenerate for m in model.models] == [False, True, False, True]
    assert model.models[1].bias == -1.0 and model.models[1].n_support == 0


def test_multiclass_three_blobs_reproduce_training_labels():
    labels = (ClassLabel.NON_DEMENTED, ClassLabel.VERY_MILD_DEMENTED, ClassLabel.MODERATE_DEMENTED)
    data = blob_features(per_class=40, seed=2, labels=labels)
    truth = [v.label for v in data]
    # blobs must be separable by construction before the SVM is judged on them
    assert nearest_centroid(data) == truth
    model = train_multiclass(data, TrainConfig(seed=5))
    predicted = [argmax_label(s) for s in class_scores(model, data)]
    assert predicted == truth


def test_multiclass_input_errors():
    with pytest.raises(InsufficientData):
        train_multiclass([])
    with pytest.raises(InsufficientData):
        train_multiclass(blob_features(per_class=5, labels=(ClassLabel.MILD_DEMENTED,)))


def test_default_gamma_is_about_one_over_features():
    model = train_multiclass(blob_features(per_class=30))
    assert model.kernel.gamma == pytest.approx(0.5, rel=1e-12)
    assert model.config.gamma == model.kernel.gamma


def _constant_model(scores):
    model = train_multiclass(blob_features(per_class=5, labels=(ClassLabel.NON_DEMENTED, ClassLabel.MILD_DEMENTED)))
    model.models = [BinarySvmModel.always_negative(model.kernel, 1.0, 2) for _ in range(4)]
    for m, s in zip(model.models, scores):
        m.bias = s
    return model


@pytest.mark.parametrize("scores,expected", [
    ((2.0, -1.0, -1.0, -1.0), ClassLabel.NON_DEMENTED),
    ((-3.0, 0.5, 0.5, -1.0), ClassLabel.VERY_MILD_DEMENTED),
    ((-1.0, -1.0, -1.0, -1.0), ClassLabel.NON_DEMENTED),
])
def test_predict_argmax_and_ties(scores, expected):
    model = _constant_model(scores)
    label, got = predict(model, FeatureVector(100.0, 30.0, 70.0, 130.0))
    assert label is expected
    assert got.tolist() == list(scores)


def test_argmax_shift_invariance():
    rng = np.random.default_rng(0)
    for _ in range(100):
        s = rng.normal(size=4)
        s[rng.integers(4)] = s.max()
        assert argmax_label(s) == argmax_label(s + rng.normal() * 10)
