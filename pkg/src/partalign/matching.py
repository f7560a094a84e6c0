"""Visibility-aware aligned distance between pooled descriptors.

A part counts toward the distance between two images only when both sides
consider it visible: the per-part cosine distances of shared-visible parts
are averaged together with the global and foreground cosine distances.
With no shared part the distance degrades to the mean of the global and
foreground terms, so occluded parts can never pollute a comparison.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ValidationError
from .validation import check_finite, check_vector_pair


def visibility_labels(conf):
    """Part visibility flags from confidence maps.

    Part k (1..K-1) is visible iff some pixel's argmax class is k; argmax
    ties resolve to the lowest class index, so background wins ties.
    Returns a (K-1,) bool array indexed by part-1.
    """
    winners = np.argmax(conf.probs, axis=0)
    k = conf.probs.shape[0]
    return np.array([(winners == part).any() for part in range(1, k)], dtype=bool)


def cosine_distance(u, v):
    """1 minus the cosine of the angle between u and v, in [0, 2].

    Either vector being all-zero yields 1 (treated as orthogonal); the
    cosine is clamped to [-1, 1] so identical vectors give exactly 0.
    """
    u, v = check_vector_pair(u, v)
    nu = math.sqrt(float(u @ u))
    nv = math.sqrt(float(v @ v))
    if nu == 0.0 or nv == 0.0:
        return 1.0
    cos = float(u @ v) / (nu * nv)
    return 1.0 - max(-1.0, min(1.0, cos))


def _check_pair(q, g):
    if q.n_parts != g.n_parts or q.c != g.c:
        raise ValidationError(
            f"descriptor configs differ: ({q.n_parts}, {q.c}) vs ({g.n_parts}, {g.c})"
        )


def aligned_distance(q, g):
    """Aggregate distance between two descriptors.

    Mean of the global term, the foreground term, and the per-part cosine
    distances of parts visible on both sides.
    """
    _check_pair(q, g)
    shared = q.visibility & g.visibility
    terms = [cosine_distance(q.part_feats[k], g.part_feats[k])
             for k in np.flatnonzero(shared)]
    terms.append(cosine_distance(q.global_feat, g.global_feat))
    terms.append(cosine_distance(q.fg_feat, g.fg_feat))
    return math.fsum(terms) / (int(np.count_nonzero(shared)) + 2)


@dataclass(frozen=True)
class DistanceMatrix:
    """Query-by-gallery distances plus the identity/camera metadata the
    retrieval protocol filters on."""

    values: np.ndarray        # (q, g) float64
    query_ids: np.ndarray     # (q,) int
    query_cams: np.ndarray    # (q,) int
    gallery_ids: np.ndarray   # (g,) int
    gallery_cams: np.ndarray  # (g,) int

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] < 1:
            raise ValidationError(f"values must be (q >= 1, g >= 1), got {vals.shape}")
        check_finite(vals, "distances")
        if vals.min() < 0.0 or vals.max() > 2.0:
            raise ValidationError("distances must lie in [0, 2]")
        meta = {}
        for name, want in (("query_ids", vals.shape[0]), ("query_cams", vals.shape[0]),
                           ("gallery_ids", vals.shape[1]), ("gallery_cams", vals.shape[1])):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.int64)
            if arr.shape != (want,):
                raise ValidationError(f"{name} must have length {want}")
            meta[name] = arr
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        for name, arr in meta.items():
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_query(self):
        return self.values.shape[0]

    @property
    def n_gallery(self):
        return self.values.shape[1]


def distance_matrix(queries, gallery):
    """Aligned distance of every query against every gallery descriptor."""
    queries = list(queries)
    gallery = list(gallery)
    if not queries or not gallery:
        raise ValidationError("need at least one query and one gallery descriptor")
    ref = queries[0]
    for d in queries + gallery:
        _check_pair(ref, d)
    values = np.empty((len(queries), len(gallery)), dtype=np.float64)
    for i, q in enumerate(queries):
        for j, g in enumerate(gallery):
            values[i, j] = aligned_distance(q, g)
    return DistanceMatrix(
        values,
        np.array([d.person_id for d in queries], dtype=np.int64),
        np.array([d.camera_id for d in queries], dtype=np.int64),
        np.array([d.person_id for d in gallery], dtype=np.int64),
        np.array([d.camera_id for d in gallery], dtype=np.int64),
    )
