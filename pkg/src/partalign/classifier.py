"""Linear pixel-wise part classifier and confidence-weighted pooling.

The classifier is a bias-free linear map followed by softmax: per pixel,
class k gets probability exp(w_k . f) / sum_i exp(w_i . f).  It is trained
on pseudo-labels by full-batch Adam on the pixel cross-entropy; the
gradient is analytic.  Weights start at zero, so the first forward pass is
uniform.

Pooling turns one image into a Descriptor: each part's confidence map
weights the feature map elementwise, the weighted maps are globally
average-pooled into per-part vectors, their sum map pools into the
foreground vector, and the raw map pools into the global vector.
"""

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import DegenerateInputError, DivergenceError, ValidationError
from .features import UNLABELED, Descriptor
from .matching import visibility_labels
from .validation import check_finite

_TINY = np.finfo(np.float64).tiny


def check_weights(weights, n_channels=None):
    """Coerce to a finite (K, c) float64 matrix, K >= 2."""
    w = np.ascontiguousarray(weights, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] < 2:
        raise ValidationError(f"weights must be (K >= 2, c), got shape {w.shape}")
    check_finite(w, "weights")
    if n_channels is not None and w.shape[1] != n_channels:
        raise ValidationError(
            f"weights expect {w.shape[1]} channels, features have {n_channels}"
        )
    return w


def _softmax(logits):
    """Row-stable softmax over the last axis."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class ConfidenceMaps:
    """Per-pixel class probabilities for one image: (K, h, w), rows of the
    pixelwise distribution sum to 1."""

    image_id: int
    probs: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(self.probs, dtype=np.float64)
        if p.ndim != 3 or p.shape[0] < 2:
            raise ValidationError(f"probs must be (K >= 2, h, w), got shape {p.shape}")
        check_finite(p, "probs")
        if p.min() < 0.0 or p.max() > 1.0 or np.abs(p.sum(axis=0) - 1.0).max() > 1e-6:
            raise ValidationError("probs must be a per-pixel distribution")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def n_classes(self):
        return self.probs.shape[0]


def forward_confidences(weights, fmap):
    """Softmax class probabilities for every pixel of one feature map."""
    w = check_weights(weights, fmap.c)
    logits = fmap.data.astype(np.float64) @ w.T  # (h, w, K)
    probs = _softmax(logits)
    return ConfidenceMaps(fmap.image_id, np.moveaxis(probs, 2, 0))


def parsing_loss(conf, label_map, reduction="sum"):
    """Cross-entropy of the confidence maps against a pixel label map.

    Pixels labeled UNLABELED are excluded.  ``reduction`` is "sum" (the
    loss as a plain sum over pixels) or "mean".  Raises
    DegenerateInputError when no pixel is labeled.
    """
    if reduction not in ("sum", "mean"):
        raise ValidationError(f"reduction must be 'sum' or 'mean', got {reduction!r}")
    labels = label_map.labels
    if conf.probs.shape[1:] != labels.shape:
        raise ValidationError(
            f"confidence grid {conf.probs.shape[1:]} vs labels {labels.shape}"
        )
    if label_map.n_classes != conf.n_classes:
        raise ValidationError("class counts disagree between confidences and labels")
    mask = labels != UNLABELED
    n = int(np.count_nonzero(mask))
    if n == 0:
        raise DegenerateInputError(f"image {label_map.image_id}: every pixel unlabeled")
    rows, cols = np.nonzero(mask)
    picked = conf.probs[labels[mask].astype(np.intp), rows, cols]
    total = float(np.sum(-np.log(np.maximum(picked, _TINY))))
    return total / n if reduction == "mean" else total


def labeled_pixels(fset, label_maps):
    """Flatten a feature set plus label maps into (X, y) training pixels.

    Pixels come out image by image in set order, row-major, with
    UNLABELED pixels dropped.  X is (n, c) float64, y is (n,) int.
    """
    by_image = {lm.image_id: lm for lm in label_maps}
    if len(by_image) != len(label_maps):
        raise ValidationError("duplicate image_id among label maps")
    xs = []
    ys = []
    for m in fset.maps:
        lm = by_image.get(m.image_id)
        if lm is None:
            raise ValidationError(f"no label map for image {m.image_id}")
        if (lm.h, lm.w) != (m.h, m.w):
            raise ValidationError(f"image {m.image_id}: label/feature shape mismatch")
        mask = (lm.labels != UNLABELED).ravel()
        if mask.any():
            xs.append(m.data.reshape(-1, m.c).astype(np.float64)[mask])
            ys.append(lm.labels.ravel()[mask].astype(np.int64))
    if not xs:
        raise DegenerateInputError("no labeled pixel in the whole set")
    return np.concatenate(xs, axis=0), np.concatenate(ys)


class PixelPartClassifier(BaseEstimator, ClassifierMixin):
    """Bias-free linear softmax classifier over pixel feature vectors.

    Trained full-batch with Adam (betas 0.9/0.999, eps 1e-8) on the mean
    cross-entropy.  ``schedule`` is an LrSchedule consulted at the global
    epoch counter; without one, ``lr`` is used every epoch.  ``fit``
    restarts from zero weights; ``partial_fit`` continues from the current
    weights and optimizer state, which is how interleaved
    relabel/train rounds keep one optimizer running.

    Attributes after fitting: ``W_`` (n_classes, c), ``loss_history_``
    (mean loss at the start of each epoch), ``epoch_`` (global epochs
    done), plus Adam state ``adam_m_``, ``adam_v_``, ``adam_t_``.
    """

    def __init__(self, n_classes=6, schedule=None, lr=3.5e-4, seed=0):
        self.n_classes = n_classes
        self.schedule = schedule
        self.lr = lr
        self.seed = seed

    def _check_xy(self, X, y):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValidationError(f"X must be (n >= 1, c), got shape {X.shape}")
        check_finite(X, "X")
        if y.shape != (X.shape[0],):
            raise ValidationError("y must be one label per row of X")
        if y.min() < 0 or y.max() >= self.n_classes:
            raise ValidationError(f"labels must lie in [0, {self.n_classes})")
        return X, y.astype(np.intp)

    def _init_state(self, n_features):
        self.W_ = np.zeros((self.n_classes, n_features), dtype=np.float64)
        self.adam_m_ = np.zeros_like(self.W_)
        self.adam_v_ = np.zeros_like(self.W_)
        self.adam_t_ = 0
        self.epoch_ = 0
        self.loss_history_ = []
        self.classes_ = np.arange(self.n_classes)

    def fit(self, X, y, epochs=1):
        X, y = self._check_xy(X, y)
        self._init_state(X.shape[1])
        return self._run(X, y, epochs)

    def partial_fit(self, X, y, epochs=1):
        X, y = self._check_xy(X, y)
        if not hasattr(self, "W_"):
            self._init_state(X.shape[1])
        elif self.W_.shape[1] != X.shape[1]:
            raise ValidationError(
                f"classifier has {self.W_.shape[1]} channels, X has {X.shape[1]}"
            )
        return self._run(X, y, epochs)

    def _run(self, X, y, epochs):
        if int(epochs) != epochs or epochs < 1:
            raise ValidationError(f"epochs must be a positive integer, got {epochs!r}")
        n = X.shape[0]
        onehot_rows = np.arange(n)
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        for _ in range(int(epochs)):
            probs = _softmax(X @ self.W_.T)
            loss = float(np.mean(-np.log(np.maximum(probs[onehot_rows, y], _TINY))))
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite training loss at epoch {self.epoch_}",
                                      epoch=self.epoch_)
            self.loss_history_.append(loss)
            grad_probs = probs.copy()
            grad_probs[onehot_rows, y] -= 1.0
            grad = grad_probs.T @ X / n
            lr = self.lr if self.schedule is None else self.schedule.lr_at(self.epoch_)
            self.adam_t_ += 1
            self.adam_m_ = beta1 * self.adam_m_ + (1.0 - beta1) * grad
            self.adam_v_ = beta2 * self.adam_v_ + (1.0 - beta2) * grad * grad
            m_hat = self.adam_m_ / (1.0 - beta1 ** self.adam_t_)
            v_hat = self.adam_v_ / (1.0 - beta2 ** self.adam_t_)
            self.W_ = self.W_ - lr * m_hat / (np.sqrt(v_hat) + eps)
            if not np.all(np.isfinite(self.W_)):
                raise DivergenceError(f"non-finite weights after epoch {self.epoch_}",
                                      epoch=self.epoch_)
            self.epoch_ += 1
        return self

    def predict_proba(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.W_.shape[1]:
            raise ValidationError("X must be (n, c) with the fitted channel count")
        return _softmax(X @ self.W_.T)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


def parsing_gradient(weights, fmap, label_map):
    """Analytic mean-reduced gradient of the pixel cross-entropy w.r.t. the
    weight matrix, as a (K, c) array.  Exposed for verification."""
    w = check_weights(weights, fmap.c)
    mask = label_map.labels != UNLABELED
    if not mask.any():
        raise DegenerateInputError(f"image {label_map.image_id}: every pixel unlabeled")
    X = fmap.data.astype(np.float64)[mask]
    y = label_map.labels[mask].astype(np.intp)
    probs = _softmax(X @ w.T)
    probs[np.arange(X.shape[0]), y] -= 1.0
    return probs.T @ X / X.shape[0]


def train_classifier(clf, fset, label_maps, schedule, epochs, seed=0):
    """Continue training a PixelPartClassifier on a labeled feature set.

    ``seed`` is accepted for interface stability; full-batch training is
    deterministic and draws nothing from it.  Returns the classifier.
    """
    if int(epochs) != epochs or epochs < 1:
        raise ValidationError(f"epochs must be a positive integer, got {epochs!r}")
    X, y = labeled_pixels(fset, label_maps)
    clf.set_params(schedule=schedule, seed=seed)
    return clf.partial_fit(X, y, epochs=int(epochs))


def pool_descriptor(weights, fmap):
    """Average-pool one image into a Descriptor under the classifier.

    Part k's map is the feature map weighted by its confidence; the
    foreground vector pools the sum of all part maps; the global vector
    pools the raw map.  Visibility flags come from pixelwise argmax.
    """
    conf = forward_confidences(weights, fmap)
    data = fmap.data.astype(np.float64)
    k = conf.n_classes
    part_feats = np.empty((k - 1, fmap.c), dtype=np.float64)
    fg_map = np.zeros_like(data)
    for part in range(1, k):
        weighted = conf.probs[part][:, :, None] * data
        part_feats[part - 1] = weighted.mean(axis=(0, 1))
        fg_map += weighted
    fg_feat = fg_map.mean(axis=(0, 1))
    global_feat = data.mean(axis=(0, 1))
    vis = visibility_labels(conf)
    return Descriptor(fmap.image_id, fmap.person_id, fmap.camera_id,
                      part_feats, fg_feat, global_feat, vis)


def pool_descriptors(weights, fset):
    """Pool every image of a set, in set order."""
    return [pool_descriptor(weights, m) for m in fset.maps]
