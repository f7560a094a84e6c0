"""Lloyd k-means with k-means++ seeding and pinned arithmetic.

The arithmetic is deliberately specified down to summation order so that an
independent straightforward reimplementation reproduces results bit for bit:

* squared distances accumulate dimension by dimension in float64;
* centroid updates sum samples in ascending sample order (bincount);
* inertia is a compensated sum (math.fsum) of per-sample minima;
* assignment ties go to the lowest centroid index;
* the k-means++ draw uses one uniform variate per added centroid, located
  by cumulative sum and right-sided binary search;
* an empty cluster is re-seeded, in ascending cluster order, at the sample
  farthest from its assigned centroid (first occurrence on ties), and that
  sample is withdrawn from the farthest-sample pool;
* restarts consume one shared PCG64 stream in restart order, and the
  winner is the restart with strictly smallest final inertia (earliest
  wins ties).

Termination: after each centroid update, stop when the largest centroid
displacement drops below ``tol``; otherwise run ``max_iter`` updates.  A
final assignment pass follows the last update, so ``inertia_history_`` has
``n_iter_ + 1`` entries and is non-increasing.

When the requested cluster count exceeds the number of distinct samples,
the count is silently reduced to the distinct count and ``reduced_k_`` is
set instead of raising.
"""

import math

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .errors import ValidationError
from .validation import check_positive_int, check_samples


def _sq_dists_to(X, center):
    """Squared Euclidean distance of every row of X to one center.

    Accumulates one dimension at a time so the float64 rounding matches a
    per-sample scalar loop over dimensions.
    """
    acc = np.zeros(X.shape[0], dtype=np.float64)
    for j in range(X.shape[1]):
        diff = X[:, j] - center[j]
        acc += diff * diff
    return acc


def _assign(X, centroids):
    """Nearest-centroid labels and the squared distance to that centroid."""
    dists = np.empty((X.shape[0], centroids.shape[0]), dtype=np.float64)
    for c in range(centroids.shape[0]):
        dists[:, c] = _sq_dists_to(X, centroids[c])
    labels = np.argmin(dists, axis=1)
    min_d2 = dists[np.arange(X.shape[0]), labels]
    return labels, min_d2


def _plusplus_init(X, k, rng):
    """k-means++ seeding.  Consumes one integers() draw, then one random()
    draw per remaining centroid."""
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]), dtype=np.float64)
    centroids[0] = X[int(rng.integers(n))]
    if k == 1:
        return centroids
    min_d2 = _sq_dists_to(X, centroids[0])
    for c in range(1, k):
        cum = np.cumsum(min_d2)
        total = float(cum[-1])
        if total == 0.0:
            idx = int(rng.integers(n))
        else:
            u = rng.random() * total
            idx = int(np.searchsorted(cum, u, side="right"))
            if idx >= n:
                idx = n - 1
        centroids[c] = X[idx]
        if c < k - 1:
            min_d2 = np.minimum(min_d2, _sq_dists_to(X, centroids[c]))
    return centroids


def _update(X, labels, k, min_d2):
    """Mean of each cluster; empty clusters re-seeded at far samples."""
    counts = np.bincount(labels, minlength=k)
    centroids = np.empty((k, X.shape[1]), dtype=np.float64)
    for j in range(X.shape[1]):
        centroids[:, j] = np.bincount(labels, weights=X[:, j], minlength=k)
    nonempty = counts > 0
    centroids[nonempty] /= counts[nonempty, None]
    if not np.all(nonempty):
        pool = min_d2.copy()
        for c in np.flatnonzero(~nonempty):
            far = int(np.argmax(pool))
            centroids[c] = X[far]
            pool[far] = 0.0
    return centroids


def _max_shift(old, new):
    shift = 0.0
    for c in range(old.shape[0]):
        acc = 0.0
        for j in range(old.shape[1]):
            diff = new[c, j] - old[c, j]
            acc += diff * diff
        d = math.sqrt(acc)
        if d > shift:
            shift = d
    return shift


def _distinct_rows(X):
    return np.unique(X, axis=0).shape[0]


class LloydKMeans(BaseEstimator, ClusterMixin):
    """Deterministic Lloyd k-means.

    Parameters
    ----------
    n_clusters : requested cluster count (>= 1).
    seed : unsigned int feeding a PCG64 generator.
    max_iter : maximum number of centroid updates.
    tol : stop once the largest centroid displacement is below this.
    init : "k-means++" or an explicit (k, dim) centroid array.  An array
        bypasses seeding entirely (no random draws, no distinct-row
        reduction, single run); its row count overrides n_clusters.
    n_init : number of seeded restarts; the lowest-inertia run wins.

    Attributes after fit
    --------------------
    cluster_centers_ : (effective_k_, dim) float64.
    labels_ : nearest-centroid index per sample.
    inertia_ : within-cluster sum of squared distances at the end.
    inertia_history_ : inertia after each assignment pass, non-increasing.
    n_iter_ : number of centroid updates performed.
    effective_k_ : cluster count actually used.
    reduced_k_ : True when n_clusters exceeded the distinct sample count.
    """

    def __init__(self, n_clusters=2, seed=0, max_iter=100, tol=1e-4,
                 init="k-means++", n_init=10):
        self.n_clusters = n_clusters
        self.seed = seed
        self.max_iter = max_iter
        self.tol = tol
        self.init = init
        self.n_init = n_init

    def _lloyd(self, X, centroids, k):
        """One full Lloyd run from given start centroids."""
        history = []
        n_iter = 0
        for _ in range(self.max_iter):
            labels, min_d2 = _assign(X, centroids)
            history.append(math.fsum(min_d2))
            new_centroids = _update(X, labels, k, min_d2)
            n_iter += 1
            shift = _max_shift(centroids, new_centroids)
            centroids = new_centroids
            if shift < self.tol:
                break
        labels, min_d2 = _assign(X, centroids)
        history.append(math.fsum(min_d2))
        return centroids, labels, history, n_iter

    def fit(self, X, y=None):
        X = check_samples(X)
        check_positive_int(self.n_clusters, "n_clusters")
        check_positive_int(self.max_iter, "max_iter")
        check_positive_int(self.n_init, "n_init")
        if self.tol < 0:
            raise ValidationError(f"tol must be >= 0, got {self.tol}")
        if isinstance(self.init, str):
            if self.init != "k-means++":
                raise ValidationError(f"unknown init {self.init!r}")
            k = min(self.n_clusters, _distinct_rows(X))
            self.reduced_k_ = k < self.n_clusters
            rng = np.random.Generator(np.random.PCG64(self.seed))
            best = None
            for _ in range(self.n_init):
                run = self._lloyd(X, _plusplus_init(X, k, rng), k)
                if best is None or run[2][-1] < best[2][-1]:
                    best = run
        else:
            start = check_samples(self.init)
            if start.shape[1] != X.shape[1]:
                raise ValidationError(
                    f"init centroids have {start.shape[1]} dims, samples {X.shape[1]}"
                )
            k = start.shape[0]
            self.reduced_k_ = False
            best = self._lloyd(X, start, k)
        self.effective_k_ = k
        self.cluster_centers_, self.labels_, history, self.n_iter_ = best
        self.inertia_ = history[-1]
        self.inertia_history_ = history
        return self

    def predict(self, X):
        X = check_samples(X)
        if X.shape[1] != self.cluster_centers_.shape[1]:
            raise ValidationError(
                f"expected {self.cluster_centers_.shape[1]} dims, got {X.shape[1]}"
            )
        labels, _ = _assign(X, self.cluster_centers_)
        return labels

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_


def kmeans(samples, k, seed=0, max_iter=100, tol=1e-4, n_init=10):
    """Functional wrapper: returns (fitted LloydKMeans, labels)."""
    est = LloydKMeans(n_clusters=k, seed=seed, max_iter=max_iter, tol=tol,
                      n_init=n_init).fit(samples)
    return est, est.labels_
