"""Retrieval-objective components computed on pooled descriptors.

These are forward-only monitoring quantities: a batch-hard triplet loss
and a label-smoothed cross-entropy per representation (concatenated parts,
foreground, global), combined with the parsing loss into one weighted
total.  Nothing here updates the part classifier; there is no gradient
path from descriptors back to it.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ValidationError
from .validation import check_finite, check_samples


@dataclass(frozen=True)
class IdHead:
    """Linear identity classifier used by the smoothed-CE term: V is
    (n_id, dim), logits are V @ feat."""

    V: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.V, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValidationError(f"V must be (n_id, dim), got shape {v.shape}")
        check_finite(v, "V")
        v.setflags(write=False)
        object.__setattr__(self, "V", v)

    @property
    def n_id(self):
        return self.V.shape[0]

    @property
    def dim(self):
        return self.V.shape[1]

    @classmethod
    def zeros(cls, n_id, dim):
        return cls(np.zeros((n_id, dim)))


@dataclass(frozen=True)
class LossReport:
    """Loss components over one descriptor batch.

    l_p / l_f / l_g are triplet + smoothed CE on the part-concat,
    foreground, and global representations; total combines them with
    alpha-weighted parsing loss.
    """

    l_p: float
    l_f: float
    l_g: float
    l_parsing: float
    alpha: float
    total: float

    def __post_init__(self):
        expect = self.l_p + self.l_f + self.l_g + self.alpha * self.l_parsing
        if not math.isclose(self.total, expect, rel_tol=0.0, abs_tol=1e-9):
            raise ValidationError(
                f"total {self.total} is not the weighted component sum {expect}"
            )


def _check_batch(feats, ids):
    feats = check_samples(feats)
    ids = np.asarray(ids)
    if ids.shape != (feats.shape[0],):
        raise ValidationError("need exactly one id per feature row")
    return feats, ids.astype(np.int64)


def _pairwise_euclidean(feats):
    diff = feats[:, None, :] - feats[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def triplet_loss(feats, ids, margin=0.3):
    """Batch-hard triplet loss with Euclidean distances.

    Per anchor: largest same-id distance minus smallest other-id distance
    plus margin, hinged at zero; averaged over anchors that have both a
    positive and a negative.  Raises DegenerateInputError when no anchor
    qualifies (single identity, or no identity repeated).
    """
    feats, ids = _check_batch(feats, ids)
    if len(set(ids.tolist())) < 2:
        raise DegenerateInputError("triplet loss needs at least two identities")
    dists = _pairwise_euclidean(feats)
    n = feats.shape[0]
    terms = []
    for a in range(n):
        same = ids == ids[a]
        pos = same.copy()
        pos[a] = False
        if not pos.any():
            continue
        hard_pos = dists[a, pos].max()
        hard_neg = dists[a, ~same].min()
        terms.append(max(0.0, hard_pos - hard_neg + margin))
    if not terms:
        raise DegenerateInputError("no anchor has a positive; every identity is unique")
    return float(math.fsum(terms) / len(terms))


def smoothed_ce(head, feats, ids, epsilon=0.1):
    """Label-smoothed cross-entropy of the identity head over a batch.

    The target puts 1 - epsilon on the true identity and spreads epsilon
    uniformly over all identities, so the smoothed target still sums
    to one.  Returns the batch mean.
    """
    if not 0.0 <= epsilon < 1.0:
        raise ValidationError(f"epsilon must lie in [0, 1), got {epsilon}")
    feats, ids = _check_batch(feats, ids)
    if feats.shape[1] != head.dim:
        raise ValidationError(f"head expects dim {head.dim}, features have {feats.shape[1]}")
    if ids.min() < 0 or ids.max() >= head.n_id:
        raise ValidationError(f"ids must lie in [0, {head.n_id})")
    logits = feats @ head.V.T
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    nll_true = -log_probs[np.arange(feats.shape[0]), ids]
    nll_all = -log_probs.sum(axis=1)
    per_sample = (1.0 - epsilon) * nll_true + (epsilon / head.n_id) * nll_all
    return float(np.mean(per_sample))


def _part_concat(descs):
    return np.stack([d.part_feats.ravel() for d in descs])


def reid_objective(descs, ids, heads, margin=0.3, epsilon=0.1, alpha=0.1,
                   l_parsing=0.0):
    """Full loss report over a descriptor batch.

    ``heads`` is a (part, foreground, global) triple of IdHead whose dims
    are (K-1)*c, c, c; ``ids`` are contiguous identity indices aligned
    with the descriptors (pass None to reuse descriptor person_ids).
    """
    descs = list(descs)
    if len(descs) < 2:
        raise ValidationError("need at least two descriptors")
    if ids is None:
        ids = [d.person_id for d in descs]
    head_p, head_f, head_g = heads
    reps = (
        _part_concat(descs),
        np.stack([d.fg_feat for d in descs]),
        np.stack([d.global_feat for d in descs]),
    )
    parts = []
    for feats, head in zip(reps, (head_p, head_f, head_g)):
        parts.append(triplet_loss(feats, ids, margin) + smoothed_ce(head, feats, ids, epsilon))
    l_p, l_f, l_g = parts
    total = l_p + l_f + l_g + alpha * l_parsing
    return LossReport(l_p, l_f, l_g, float(l_parsing), alpha, total)
