"""Retrieval metrics (CMC, mAP) and parsing quality metrics (IoU).

Retrieval follows the standard cross-camera protocol: for each query,
gallery entries sharing both its person and camera id are dropped, the
rest are ranked by ascending distance with ties resolved toward the lower
gallery index, and CMC/AP are computed over the correct matches.  Queries
left without a single correct match are excluded and counted in a warning.

IoU aggregates intersection and union pixel counts per label over all
images before dividing, so image iteration order cannot matter.
"""

import math
import warnings as _warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .features import UNLABELED


def cmc_map(dm):
    """Cumulative match characteristic and mean average precision.

    Returns (cmc, mean_ap): cmc[r-1] is the fraction of scored queries
    whose first correct match ranks within r; its length is the gallery
    size.  Queries with no valid correct match are skipped with a warning.
    """
    n_q, n_g = dm.n_query, dm.n_gallery
    first_hit_counts = np.zeros(n_g, dtype=np.int64)
    aps = []
    excluded = 0
    for i in range(n_q):
        keep = ~((dm.gallery_ids == dm.query_ids[i]) & (dm.gallery_cams == dm.query_cams[i]))
        correct = dm.gallery_ids[keep] == dm.query_ids[i]
        if not correct.any():
            excluded += 1
            continue
        order = np.argsort(dm.values[i, keep], kind="stable")
        hits = correct[order]
        ranks = np.flatnonzero(hits) + 1
        first_hit_counts[ranks[0] - 1] += 1
        precisions = np.arange(1, ranks.size + 1) / ranks
        aps.append(float(precisions.mean()))
    if not aps:
        raise ValidationError("every query was excluded; no valid gallery matches")
    if excluded:
        _warnings.warn(f"{excluded} of {n_q} queries had no valid gallery match "
                       f"and were excluded")
    cmc = np.cumsum(first_hit_counts) / len(aps)
    return cmc, float(math.fsum(aps) / len(aps))


def _apply_mapping(arr, mapping):
    out = arr.copy()
    for src, dst in mapping.items():
        out[arr == src] = dst
    return out


def parsing_iou(pred_maps, truth_maps, n_classes, label_mapping=None):
    """Per-part, mean, and foreground IoU between two sets of label maps.

    Maps pair by image_id.  Truth pixels equal to UNLABELED are ignored.
    ``label_mapping`` optionally renames truth labels (e.g. to merge
    planted parts into coarser groups) before comparison.  Per-part IoU is
    intersection over union of each label in 1..n_classes-1, pixel counts
    pooled over all images; labels absent from both sides are left out of
    the dict and the mean.  Foreground IoU compares the binarized label>0
    masks.  Returns (per_part_iou, mean_iou, fg_iou).
    """
    preds = {m.image_id: m for m in pred_maps}
    truths = {m.image_id: m for m in truth_maps}
    if set(preds) != set(truths):
        raise ValidationError("prediction and truth cover different image ids")
    if not preds:
        raise ValidationError("need at least one label map")
    inter = np.zeros(n_classes, dtype=np.int64)
    union = np.zeros(n_classes, dtype=np.int64)
    fg_inter = 0
    fg_union = 0
    for image_id, pm in preds.items():
        tm = truths[image_id]
        if (pm.h, pm.w) != (tm.h, tm.w):
            raise ValidationError(f"image {image_id}: prediction/truth shape mismatch")
        p = pm.labels
        t = tm.labels
        if label_mapping:
            t = _apply_mapping(t, label_mapping)
        valid = (t != UNLABELED) & (p != UNLABELED)
        p = p[valid].astype(np.int64)
        t = t[valid].astype(np.int64)
        for k in range(1, n_classes):
            pk = p == k
            tk = t == k
            inter[k] += int(np.count_nonzero(pk & tk))
            union[k] += int(np.count_nonzero(pk | tk))
        pf = p > 0
        tf = t > 0
        fg_inter += int(np.count_nonzero(pf & tf))
        fg_union += int(np.count_nonzero(pf | tf))
    per_part = {k: inter[k] / union[k] for k in range(1, n_classes) if union[k] > 0}
    mean_iou = float(np.mean(list(per_part.values()))) if per_part else 1.0
    fg_iou = fg_inter / fg_union if fg_union > 0 else 1.0
    return per_part, mean_iou, float(fg_iou)


@dataclass(frozen=True)
class MetricReport:
    """Bundle of whichever metrics a run produced.

    Retrieval fields (cmc, mean_ap, n_excluded_queries) and parsing fields
    (per_part_iou, mean_iou, fg_iou) are each optional.
    """

    cmc: tuple = None
    mean_ap: float = None
    n_excluded_queries: int = 0
    per_part_iou: dict = None
    mean_iou: float = None
    fg_iou: float = None

    def __post_init__(self):
        if self.cmc is not None:
            cmc = tuple(float(v) for v in self.cmc)
            if any(b < a for a, b in zip(cmc, cmc[1:])):
                raise ValidationError("cmc must be non-decreasing in rank")
            if cmc and not (0.0 <= cmc[0] and cmc[-1] <= 1.0):
                raise ValidationError("cmc values must lie in [0, 1]")
            object.__setattr__(self, "cmc", cmc)
        for name in ("mean_ap", "mean_iou", "fg_iou"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")
        if self.per_part_iou is not None:
            object.__setattr__(self, "per_part_iou",
                               dict(sorted(self.per_part_iou.items())))

    def to_kv_lines(self):
        """Serialize as deterministic key=value lines."""
        lines = []
        if self.mean_ap is not None:
            lines.append(f"map={self.mean_ap!r}")
            for r in (1, 5, 10):
                if r <= len(self.cmc):
                    lines.append(f"cmc_{r}={self.cmc[r - 1]!r}")
            lines.append(f"excluded_queries={self.n_excluded_queries}")
        if self.fg_iou is not None:
            lines.append(f"fg_iou={self.fg_iou!r}")
            lines.append(f"mean_iou={self.mean_iou!r}")
            for k, v in self.per_part_iou.items():
                lines.append(f"iou_{k}={v!r}")
        return lines

    def to_text(self):
        """Human-readable one-liner per metric."""
        lines = []
        if self.mean_ap is not None:
            ranks = ", ".join(f"rank-{r} {self.cmc[r - 1]:.4f}"
                              for r in (1, 5, 10) if r <= len(self.cmc))
            lines.append(f"retrieval: mAP {self.mean_ap:.4f}; CMC {ranks}")
            if self.n_excluded_queries:
                lines.append(f"  ({self.n_excluded_queries} queries excluded)")
        if self.fg_iou is not None:
            parts = ", ".join(f"part {k} {v:.4f}" for k, v in self.per_part_iou.items())
            lines.append(f"parsing: foreground IoU {self.fg_iou:.4f}; "
                         f"mean IoU {self.mean_iou:.4f}; {parts}")
        return "\n".join(lines)
