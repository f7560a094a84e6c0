"""Two-stage per-identity pixel clustering that self-generates part labels.

Stage 1 pools the normalized activation of every pixel of every image of
one person and splits them into two clusters; the cluster with the larger
centroid is foreground.  Stage 2 pools the unit direction vectors of that
person's foreground pixels and clusters them into ``n_classes - 1`` groups,
which become part labels 1..n_classes-1 ordered top of image first (by
ascending mean row coordinate).  Label 0 is background.

Pixels are always pooled image by image in set order, row-major within an
image; all randomness derives from per-person sub-seeds, so results do not
depend on identity processing order and repeat calls are bit-identical.

Degenerate inputs never abort a whole set: an all-zero image gets an
all-background map, a person with no foreground pixels gets all-background
maps for every image, and each such event is recorded as a warning string.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .errors import DegenerateInputError, ValidationError
from .features import LabelMap, activation_map, direction_map
from .kmeans import LloydKMeans
from .validation import check_positive_int

_STAGE_FG = 1
_STAGE_PART = 2


def person_stage_seed(seed, person_id, stage):
    """Stable 32-bit sub-seed for one person's clustering stage."""
    return int(np.random.SeedSequence((int(seed), int(person_id), int(stage))).generate_state(1)[0])


@dataclass(frozen=True)
class PartOrdering:
    """Raw stage-2 cluster index -> semantic part label, with the mean pixel
    coordinates that determined the order.

    ``raw_to_semantic[r]`` is the label in 1..n_classes-1 given to raw
    cluster r; ``mean_rows``/``mean_cols`` are indexed by raw cluster too.
    Sorting raw clusters by their semantic label puts mean_rows in
    non-decreasing order.
    """

    person_id: int
    raw_to_semantic: tuple
    mean_rows: tuple
    mean_cols: tuple


def stage1_foreground_split(fset, person_id, seed, max_iter=100, tol=1e-4):
    """Foreground/background masks for every image of one person.

    Returns (masks, warnings): one (h, w) bool array per image of the
    person in set order, True = foreground.  All-zero images get all-False
    masks and a warning; if every activation is identical the whole pool is
    foreground (larger-centroid rule on a single cluster) with a warning.
    """
    maps = fset.by_person(person_id)
    warnings = []
    acts = []
    valid = []
    for m in maps:
        try:
            acts.append(activation_map(m))
            valid.append(True)
        except DegenerateInputError:
            acts.append(None)
            valid.append(False)
            warnings.append(f"person {person_id}: image {m.image_id} is all zero, forced background")
    masks = [np.zeros((fset.h, fset.w), dtype=bool) for _ in maps]
    pooled = [a.ravel() for a in acts if a is not None]
    if not pooled:
        warnings.append(f"person {person_id}: no usable image, everything background")
        return masks, warnings
    samples = np.concatenate(pooled)
    km = LloydKMeans(n_clusters=2, seed=seed, max_iter=max_iter, tol=tol).fit(samples)
    if km.reduced_k_:
        warnings.append(f"person {person_id}: all activations identical, everything foreground")
    fg_cluster = int(np.argmax(km.cluster_centers_[:, 0]))
    fg = km.labels_ == fg_cluster
    offset = 0
    px = fset.h * fset.w
    for i, ok in enumerate(valid):
        if ok:
            masks[i] = fg[offset:offset + px].reshape(fset.h, fset.w)
            offset += px
    return masks, warnings


def stage2_part_split(fset, person_id, fg_masks, n_classes, seed,
                      max_iter=100, tol=1e-4, init_centroids=None):
    """Cluster one person's pooled foreground directions into parts.

    Returns (label_arrays, ordering, warnings, centers): per-image (h, w)
    uint8 label arrays in set order for this person, the PartOrdering that
    renamed raw clusters, warnings, and the final (k, c) centroids (for
    warm-starting a later round).

    Raises DegenerateInputError when the person has no foreground pixel
    with a usable direction.
    """
    maps = fset.by_person(person_id)
    if len(fg_masks) != len(maps):
        raise ValidationError("one foreground mask per image of the person is required")
    warnings = []
    sample_chunks = []
    row_chunks = []
    col_chunks = []
    pixels = []  # (image index, flat fg positions) for write-back
    rows_grid, cols_grid = np.indices((fset.h, fset.w))
    for i, (m, mask) in enumerate(zip(maps, fg_masks)):
        if mask.shape != (fset.h, fset.w):
            raise ValidationError("foreground mask shape mismatch")
        if not mask.any():
            pixels.append((i, np.empty(0, dtype=np.intp)))
            continue
        dirs, degenerate = direction_map(m)
        usable = mask & ~degenerate
        n_dropped = int(np.count_nonzero(mask & degenerate))
        if n_dropped:
            warnings.append(
                f"person {person_id}: image {m.image_id}: {n_dropped} zero foreground "
                f"pixels kept as background"
            )
        flat = np.flatnonzero(usable)
        pixels.append((i, flat))
        if flat.size:
            sample_chunks.append(dirs.reshape(-1, fset.c)[flat])
            row_chunks.append(rows_grid.ravel()[flat])
            col_chunks.append(cols_grid.ravel()[flat])
    if not sample_chunks:
        raise DegenerateInputError(f"person {person_id}: no foreground pixels to cluster")
    samples = np.concatenate(sample_chunks, axis=0)
    rows = np.concatenate(row_chunks).astype(np.float64)
    cols = np.concatenate(col_chunks).astype(np.float64)

    init = "k-means++"
    if init_centroids is not None and init_centroids.shape == (n_classes - 1, fset.c):
        init = init_centroids
    km = LloydKMeans(n_clusters=n_classes - 1, seed=seed, max_iter=max_iter,
                     tol=tol, init=init).fit(samples)
    if km.reduced_k_:
        warnings.append(
            f"person {person_id}: only {km.effective_k_} distinct directions, "
            f"part count reduced from {n_classes - 1}"
        )

    k = km.effective_k_
    mean_rows = tuple(float(rows[km.labels_ == c].mean()) for c in range(k))
    mean_cols = tuple(float(cols[km.labels_ == c].mean()) for c in range(k))
    order = sorted(range(k), key=lambda c: (mean_rows[c], mean_cols[c], c))
    raw_to_semantic = [0] * k
    for rank, c in enumerate(order):
        raw_to_semantic[c] = rank + 1
    ordering = PartOrdering(person_id, tuple(raw_to_semantic), mean_rows, mean_cols)

    semantic = np.asarray(raw_to_semantic, dtype=np.uint8)[km.labels_]
    label_arrays = [np.zeros((fset.h, fset.w), dtype=np.uint8) for _ in maps]
    offset = 0
    for i, flat in pixels:
        if flat.size:
            label_arrays[i].reshape(-1)[flat] = semantic[offset:offset + flat.size]
            offset += flat.size
    return label_arrays, ordering, warnings, km.cluster_centers_


def generate_pseudo_labels(fset, n_classes, seed, max_iter=100, tol=1e-4,
                           warm_centers=None):
    """Run both clustering stages for every identity in the set.

    Returns (label_maps, orderings, warnings, centers): one LabelMap per
    image in set order, {person_id: PartOrdering} for identities that
    reached stage 2, warning strings, and {person_id: stage-2 centroids}.
    ``warm_centers`` optionally carries the previous round's centroids to
    start stage 2 from.
    """
    check_positive_int(n_classes, "n_classes")
    if n_classes < 2:
        raise ValidationError(f"n_classes must be >= 2, got {n_classes}")
    if n_classes > 255:
        raise ValidationError(f"n_classes must fit a uint8 label, got {n_classes}")
    warm_centers = warm_centers or {}
    per_person = {}
    orderings = {}
    centers = {}
    warnings = []
    for pid in fset.person_ids():
        s1 = person_stage_seed(seed, pid, _STAGE_FG)
        s2 = person_stage_seed(seed, pid, _STAGE_PART)
        masks, w1 = stage1_foreground_split(fset, pid, s1, max_iter=max_iter, tol=tol)
        warnings.extend(w1)
        try:
            arrays, ordering, w2, ctr = stage2_part_split(
                fset, pid, masks, n_classes, s2, max_iter=max_iter, tol=tol,
                init_centroids=warm_centers.get(pid),
            )
            warnings.extend(w2)
            orderings[pid] = ordering
            centers[pid] = ctr
        except DegenerateInputError as exc:
            warnings.append(f"{exc}; all images forced background")
            arrays = [np.zeros((fset.h, fset.w), dtype=np.uint8) for _ in fset.by_person(pid)]
        per_person[pid] = arrays
    by_image = {}
    counters = {pid: 0 for pid in per_person}
    for m in fset.maps:
        idx = counters[m.person_id]
        counters[m.person_id] += 1
        by_image[m.image_id] = LabelMap(m.image_id, m.person_id,
                                        per_person[m.person_id][idx], n_classes)
    label_maps = [by_image[m.image_id] for m in fset.maps]
    return label_maps, orderings, warnings, centers


class CascadePartLabeler(BaseEstimator):
    """Estimator facade over the cascaded clustering.

    ``fit(fset)`` labels every image of the set; ``fit_predict`` also
    returns the label maps.  With ``warm_start=True`` a refit reuses the
    previous fit's stage-2 centroids per person (stage 1 always restarts),
    which keeps part identities stable across relabeling rounds.  Change
    ``seed`` between warm refits via ``set_params``.

    Attributes after fit: ``label_maps_`` (one LabelMap per image, set
    order), ``orderings_`` ({person_id: PartOrdering}), ``warnings_``,
    ``centers_`` ({person_id: stage-2 centroids}).
    """

    def __init__(self, n_classes=6, seed=0, max_iter=100, tol=1e-4, warm_start=False):
        self.n_classes = n_classes
        self.seed = seed
        self.max_iter = max_iter
        self.tol = tol
        self.warm_start = warm_start

    def fit(self, X, y=None):
        warm = self.centers_ if self.warm_start and hasattr(self, "centers_") else None
        label_maps, orderings, warnings, centers = generate_pseudo_labels(
            X, self.n_classes, self.seed, max_iter=self.max_iter, tol=self.tol,
            warm_centers=warm,
        )
        self.label_maps_ = label_maps
        self.orderings_ = orderings
        self.warnings_ = warnings
        self.centers_ = centers
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).label_maps_
