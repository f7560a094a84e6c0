"""Core data containers and per-pixel derived quantities.

A feature map is a dense ``(h, w, c)`` grid of per-pixel feature vectors for
one image, tagged with image/person/camera ids.  Everything downstream
(clustering, the part classifier, pooling, matching) consumes these
containers.  Pixel coordinates follow image convention: row 0 is the top of
the image, ``(x, y)`` means (column, row).

Storage is float32 (matching the on-disk payload); derived quantities are
computed in float64.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, ValidationError
from .validation import check_finite

UNLABELED = 255  # sentinel in label maps: pixel excluded from losses/metrics


@dataclass(frozen=True)
class FeatureMap:
    """One image's feature grid plus identity metadata.

    ``data`` has shape (h, w, c), float32, all finite.  Instances are
    immutable and safe to share across threads.
    """

    image_id: int
    person_id: int
    camera_id: int
    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 2 and arr.ndim != 3:
            raise ValidationError(f"feature data must be (h, w, c), got shape {arr.shape}")
        if arr.ndim == 2:
            arr = arr[:, :, None]
        h, w, c = arr.shape
        if h < 1 or w < 1 or c < 1:
            raise ValidationError(f"feature map dimensions must be >= 1, got {(c, h, w)}")
        check_finite(arr, "feature data")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        for name in ("image_id", "person_id", "camera_id"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValidationError(f"{name} must be a non-negative integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    @property
    def h(self):
        return self.data.shape[0]

    @property
    def w(self):
        return self.data.shape[1]

    @property
    def c(self):
        return self.data.shape[2]

    def pixel_norms(self):
        """Per-pixel Euclidean norms as an (h, w) float64 array."""
        d = self.data.astype(np.float64)
        return np.sqrt(np.einsum("hwc,hwc->hw", d, d))


@dataclass(frozen=True)
class FeatureMapSet:
    """A batch of feature maps sharing one (c, h, w) geometry.

    Image ids must be unique; at least one map is required.
    """

    maps: tuple

    def __post_init__(self):
        maps = tuple(self.maps)
        if len(maps) == 0:
            raise ValidationError("a feature-map set needs at least one map")
        shape0 = maps[0].data.shape
        ids = set()
        for m in maps:
            if m.data.shape != shape0:
                raise ValidationError(
                    f"all maps must share one (h, w, c); got {m.data.shape} vs {shape0}"
                )
            if m.image_id in ids:
                raise ValidationError(f"duplicate image_id {m.image_id}")
            ids.add(m.image_id)
        object.__setattr__(self, "maps", maps)

    @property
    def n(self):
        return len(self.maps)

    @property
    def n_id(self):
        return len({m.person_id for m in self.maps})

    @property
    def h(self):
        return self.maps[0].h

    @property
    def w(self):
        return self.maps[0].w

    @property
    def c(self):
        return self.maps[0].c

    def person_ids(self):
        """Distinct person ids, ascending."""
        return sorted({m.person_id for m in self.maps})

    def by_person(self, person_id):
        """Maps of one person, in set order."""
        picked = [m for m in self.maps if m.person_id == person_id]
        if not picked:
            raise ValidationError(f"person_id {person_id} not present in set")
        return picked


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel part labels for one image.

    Values are in {0..n_classes-1} (0 = background) or UNLABELED (255).
    """

    image_id: int
    person_id: int
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        arr = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if arr.ndim != 2:
            raise ValidationError(f"labels must be (h, w), got shape {arr.shape}")
        if self.n_classes < 1 or self.n_classes > 255:
            raise ValidationError(f"n_classes out of range: {self.n_classes}")
        bad = (arr >= self.n_classes) & (arr != UNLABELED)
        if np.any(bad):
            raise ValidationError(
                f"labels must be < {self.n_classes} or {UNLABELED}, found {arr[bad].max()}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "labels", arr)

    @property
    def h(self):
        return self.labels.shape[0]

    @property
    def w(self):
        return self.labels.shape[1]


@dataclass(frozen=True)
class Descriptor:
    """Pooled representation of one image: per-part vectors, a foreground
    vector, a global vector, and per-part visibility flags.

    A False visibility entry does not zero the corresponding part vector
    (pooling is soft); matching consults the flags, not vector magnitudes.
    """

    image_id: int
    person_id: int
    camera_id: int
    part_feats: np.ndarray  # (n_parts, c) = (K-1, c)
    fg_feat: np.ndarray     # (c,)
    global_feat: np.ndarray  # (c,)
    visibility: np.ndarray  # (n_parts,) bool

    def __post_init__(self):
        pf = np.ascontiguousarray(self.part_feats, dtype=np.float64)
        fg = np.ascontiguousarray(self.fg_feat, dtype=np.float64)
        gl = np.ascontiguousarray(self.global_feat, dtype=np.float64)
        vis = np.ascontiguousarray(self.visibility, dtype=bool)
        if pf.ndim != 2 or fg.ndim != 1 or gl.ndim != 1:
            raise ValidationError("descriptor vectors have wrong rank")
        if pf.shape[1] != fg.shape[0] or fg.shape[0] != gl.shape[0]:
            raise ValidationError("descriptor vectors disagree on channel count")
        if vis.shape != (pf.shape[0],):
            raise ValidationError("visibility length must match part count")
        for a, name in ((pf, "part_feats"), (fg, "fg_feat"), (gl, "global_feat")):
            check_finite(a, name)
            a.setflags(write=False)
        vis.setflags(write=False)
        object.__setattr__(self, "part_feats", pf)
        object.__setattr__(self, "fg_feat", fg)
        object.__setattr__(self, "global_feat", gl)
        object.__setattr__(self, "visibility", vis)

    @property
    def n_parts(self):
        return self.part_feats.shape[0]

    @property
    def c(self):
        return self.fg_feat.shape[0]


def activation_map(fmap):
    """Per-pixel activation: Euclidean norm normalized by the map's maximum.

    Returns an (h, w) float64 array with maximum exactly 1.  Pixels whose
    feature vector is all-zero get activation 0.  Raises
    DegenerateInputError when every pixel is all-zero.
    """
    norms = fmap.pixel_norms()
    peak = norms.max()
    if peak == 0.0:
        raise DegenerateInputError(
            f"image {fmap.image_id}: all pixels are zero, activation undefined"
        )
    return norms / peak


def direction_map(fmap):
    """Per-pixel unit feature directions.

    Returns (directions, degenerate): an (h, w, c) float64 array of
    unit vectors and an (h, w) bool mask of all-zero pixels, which map to
    the zero vector instead of a direction.
    """
    data = fmap.data.astype(np.float64)
    norms = np.sqrt(np.einsum("hwc,hwc->hw", data, data))
    degenerate = norms == 0.0
    safe = np.where(degenerate, 1.0, norms)
    directions = data / safe[:, :, None]
    directions[degenerate] = 0.0
    return directions, degenerate
