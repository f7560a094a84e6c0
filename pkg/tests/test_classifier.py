"""Linear softmax classifier: losses, gradients, training, pooling."""

import math

import numpy as np
import pytest

from partalign import (DegenerateInputError, DivergenceError, FeatureMap,
                       LabelMap, LrSchedule, PixelPartClassifier, UNLABELED,
                       ValidationError, forward_confidences, labeled_pixels,
                       parsing_gradient, parsing_loss, pool_descriptor,
                       train_classifier)

from conftest import rand_fmap, rand_label_map, small_set
from oracles import fd_parsing_gradient


def test_zero_weights_give_uniform_confidences(rng):
    fmap = rand_fmap(rng, h=3, w=4, c=5)
    conf = forward_confidences(np.zeros((4, 5)), fmap)
    assert conf.probs.shape == (4, 3, 4)
    assert np.allclose(conf.probs, 0.25)


def test_confidences_sum_to_one(rng):
    fmap = rand_fmap(rng, h=5, w=4, c=6, scale=3.0)
    conf = forward_confidences(rng.standard_normal((3, 6)), fmap)
    assert np.abs(conf.probs.sum(axis=0) - 1.0).max() < 1e-6


def test_single_pixel_uniform_loss_is_log_k():
    fmap = FeatureMap(0, 0, 0, np.ones((1, 1, 2)))
    lmap = LabelMap(0, 0, np.array([[2]], dtype=np.uint8), 4)
    loss = parsing_loss(forward_confidences(np.zeros((4, 2)), fmap), lmap)
    assert math.isclose(loss, math.log(4), rel_tol=1e-12)


def test_sum_and_mean_reductions(rng):
    fmap = rand_fmap(rng, h=2, w=5, c=3)
    labels = rng.integers(0, 4, size=(2, 5)).astype(np.uint8)
    lmap = LabelMap(0, 0, labels, 4)
    conf = forward_confidences(np.zeros((4, 3)), fmap)
    total = parsing_loss(conf, lmap, reduction="sum")
    mean = parsing_loss(conf, lmap, reduction="mean")
    assert math.isclose(total, 10 * math.log(4), rel_tol=1e-12)
    assert math.isclose(mean, math.log(4), rel_tol=1e-12)
    with pytest.raises(ValidationError):
        parsing_loss(conf, lmap, reduction="median")


def test_unlabeled_pixels_excluded(rng):
    fmap = rand_fmap(rng, h=2, w=2, c=3)
    labels = np.array([[0, UNLABELED], [UNLABELED, UNLABELED]], dtype=np.uint8)
    lmap = LabelMap(0, 0, labels, 3)
    conf = forward_confidences(np.zeros((3, 3)), fmap)
    assert math.isclose(parsing_loss(conf, lmap), math.log(3), rel_tol=1e-12)
    all_un = LabelMap(0, 0, np.full((2, 2), UNLABELED, dtype=np.uint8), 3)
    with pytest.raises(DegenerateInputError):
        parsing_loss(conf, all_un)


def test_analytic_gradient_matches_finite_differences(rng):
    for _ in range(5):
        fmap = rand_fmap(rng, h=4, w=3, c=4)
        lmap = rand_label_map(rng, h=4, w=3, n_classes=3, unlabeled_frac=0.2)
        W = rng.standard_normal((3, 4))
        analytic = parsing_gradient(W, fmap, lmap)
        fd = fd_parsing_gradient(W, fmap, lmap)
        rel = np.abs(analytic - fd).max() / max(np.abs(fd).max(), 1e-6)
        assert rel < 1e-6


def test_labeled_pixels_order_and_masking(rng):
    fset = small_set(rng, n_people=1, imgs_each=2, h=2, w=2, c=3)
    l0 = LabelMap(0, 0, np.array([[1, UNLABELED], [0, 2]], dtype=np.uint8), 3)
    l1 = LabelMap(1, 0, np.array([[2, 0], [UNLABELED, 1]], dtype=np.uint8), 3)
    X, y = labeled_pixels(fset, [l1, l0])
    assert X.shape == (6, 3)
    assert y.tolist() == [1, 0, 2, 2, 0, 1]
    flat0 = fset.maps[0].data.reshape(-1, 3).astype(np.float64)
    assert np.array_equal(X[0], flat0[0])
    assert np.array_equal(X[1], flat0[2])


def test_labeled_pixels_rejects_mismatch(rng):
    fset = small_set(rng, n_people=1, imgs_each=1, h=2, w=2, c=3)
    with pytest.raises(ValidationError):
        labeled_pixels(fset, [rand_label_map(rng, h=2, w=2, image_id=9)])
    wrong_shape = rand_label_map(rng, h=3, w=2, image_id=0)
    with pytest.raises(ValidationError):
        labeled_pixels(fset, [wrong_shape])


def test_first_epoch_loss_is_log_k(rng):
    X = rng.standard_normal((20, 3))
    y = rng.integers(0, 4, size=20)
    clf = PixelPartClassifier(n_classes=4, lr=0.1).fit(X, y, epochs=1)
    assert math.isclose(clf.loss_history_[0], math.log(4), rel_tol=1e-12)
    assert clf.epoch_ == 1 and clf.adam_t_ == 1


def test_partial_fit_equals_one_long_fit(rng):
    X = rng.standard_normal((30, 4))
    y = rng.integers(0, 3, size=30)
    schedule = LrSchedule(total_epochs=8, warmup_epochs=2, decay_epochs=(5,))
    a = PixelPartClassifier(n_classes=3, schedule=schedule).fit(X, y, epochs=8)
    b = PixelPartClassifier(n_classes=3, schedule=schedule).fit(X, y, epochs=3)
    b.partial_fit(X, y, epochs=5)
    assert np.array_equal(a.W_, b.W_)
    assert a.loss_history_ == b.loss_history_
    assert b.epoch_ == 8


def test_fit_resets_partial_fit_does_not(rng):
    X = rng.standard_normal((10, 3))
    y = rng.integers(0, 2, size=10)
    clf = PixelPartClassifier(n_classes=2, lr=0.05).fit(X, y, epochs=4)
    w = clf.W_.copy()
    clf.fit(X, y, epochs=4)
    assert np.array_equal(clf.W_, w)
    clf.partial_fit(X, y, epochs=1)
    assert clf.epoch_ == 5


def test_training_separates_blobs(rng):
    X = np.concatenate([rng.standard_normal((40, 3)) + 6,
                        rng.standard_normal((40, 3)) - 6])
    y = np.array([0] * 40 + [1] * 40)
    clf = PixelPartClassifier(n_classes=2, lr=0.1).fit(X, y, epochs=120)
    assert clf.loss_history_[-1] < 0.05 < clf.loss_history_[0]
    assert np.array_equal(clf.predict(X), y)


def test_agreement_with_reference_logistic_regression(rng):
    from sklearn.linear_model import LogisticRegression

    centers = np.array([[5.0, 0.0, 0.0], [0.0, 5.0, 0.0], [0.0, 0.0, 5.0]])
    X = np.concatenate([rng.standard_normal((30, 3)) + cc for cc in centers])
    y = np.repeat(np.arange(3), 30)
    clf = PixelPartClassifier(n_classes=3, lr=0.1).fit(X, y, epochs=200)
    ref = LogisticRegression(fit_intercept=False, C=1e6, max_iter=2000).fit(X, y)
    agree = np.mean(clf.predict(X) == ref.predict(X))
    assert agree >= 0.95


@pytest.mark.filterwarnings("ignore:overflow")
def test_divergence_raises_with_epoch(rng):
    X = rng.standard_normal((10, 3)) * 10
    y = rng.integers(0, 3, size=10)
    clf = PixelPartClassifier(n_classes=3, lr=1e308)
    with pytest.raises(DivergenceError) as err:
        clf.fit(X, y, epochs=5)
    assert err.value.epoch is not None


def test_label_range_validated(rng):
    X = rng.standard_normal((5, 2))
    with pytest.raises(ValidationError):
        PixelPartClassifier(n_classes=3).fit(X, np.array([0, 1, 2, 3, 0]))


def test_partial_fit_channel_mismatch(rng):
    clf = PixelPartClassifier(n_classes=2).fit(rng.standard_normal((5, 3)),
                                               np.zeros(5, dtype=int) )
    with pytest.raises(ValidationError):
        clf.partial_fit(rng.standard_normal((5, 4)), np.zeros(5, dtype=int))


def test_train_classifier_wires_schedule(rng):
    fset = small_set(rng, n_people=2, imgs_each=2, h=4, w=3, c=3)
    lmaps = [rand_label_map(rng, h=4, w=3, n_classes=3, image_id=m.image_id,
                            person_id=m.person_id) for m in fset.maps]
    schedule = LrSchedule(total_epochs=4, warmup_epochs=1, decay_epochs=())
    clf = PixelPartClassifier(n_classes=3)
    train_classifier(clf, fset, lmaps, schedule, epochs=4)
    assert clf.epoch_ == 4
    assert clf.schedule is schedule
    assert len(clf.loss_history_) == 4


def test_pool_descriptor_identities(rng):
    fmap = rand_fmap(rng, h=5, w=4, c=3, image_id=7, person_id=2, camera_id=1)
    W = rng.standard_normal((4, 3))
    d = pool_descriptor(W, fmap)
    assert (d.image_id, d.person_id, d.camera_id) == (7, 2, 1)
    assert d.part_feats.shape == (3, 3)
    assert np.abs(d.part_feats.sum(axis=0) - d.fg_feat).max() < 1e-6
    assert np.allclose(d.global_feat, fmap.data.astype(np.float64).mean(axis=(0, 1)))


def test_pool_descriptor_zero_weights_background_wins(rng):
    fmap = rand_fmap(rng, h=3, w=3, c=2)
    d = pool_descriptor(np.zeros((3, 2)), fmap)
    assert not d.visibility.any()
    assert np.allclose(d.part_feats[0], d.part_feats[1])
