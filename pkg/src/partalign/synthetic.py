"""Synthetic feature-map generator with planted part structure.

Each identity owns one unit signature direction per part, shared across
all of its images.  An image is an elliptical silhouette split into
horizontal bands, one band per part, stacked top to bottom; pixels in part
p's band point along the identity's signature for p scaled by ``fg_gain``,
plus isotropic Gaussian noise.  Background pixels (and occluded bands)
carry a dataset-wide background direction scaled by ``bg_gain`` plus the
same noise.

The background direction departs from pure-noise background on purpose: a
bias-free linear classifier can only recognize "background" as a
direction, not as an offset, so some shared background structure is what
lets occluded regions be classified (and parts flagged invisible) at all.
Set ``bg_gain=0`` for structureless noise-only background.

Per-part signatures blend a dataset-wide per-part anchor with an
identity-specific residual, so the same part looks similar (not identical)
across identities, mirroring how body parts behave in real features.

Camera ids cycle 0..5 per identity, image ids count globally from 0, and
all randomness derives from the spec seed through named substreams, so a
spec generates bit-identical data every time.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .features import FeatureMap, FeatureMapSet, LabelMap

_N_CAMERAS = 6
_SUB_ANCHORS, _SUB_BACKGROUND, _SUB_IDENTITY, _SUB_IMAGE = 1, 2, 3, 4


@dataclass(frozen=True)
class SyntheticSpec:
    n_id: int = 8
    imgs_per_id: int = 6
    c: int = 16
    h: int = 64
    w: int = 32
    parts: int = 5
    occlusion_prob: float = 0.0
    noise_sigma: float = 0.5
    fg_gain: float = 4.0
    bg_gain: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("n_id", "imgs_per_id", "c", "h", "w", "parts"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.parts > self.h:
            raise ValidationError(
                f"{self.parts} part bands cannot fit in {self.h} rows"
            )
        if not 0.0 <= self.occlusion_prob < 1.0:
            raise ValidationError(f"occlusion_prob must lie in [0, 1), got {self.occlusion_prob}")
        if self.noise_sigma < 0:
            raise ValidationError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.fg_gain <= 1.0:
            raise ValidationError(f"fg_gain must exceed 1, got {self.fg_gain}")
        if self.bg_gain < 0:
            raise ValidationError(f"bg_gain must be >= 0, got {self.bg_gain}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValidationError(f"seed must be a non-negative integer, got {self.seed!r}")
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def n_classes(self):
        return self.parts + 1


def _rng(*entropy):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def _unit_rows(arr):
    norms = np.sqrt((arr * arr).sum(axis=-1, keepdims=True))
    if np.any(norms == 0.0):
        raise ValidationError("degenerate zero draw for a signature direction")
    return arr / norms


def silhouette_mask(h, w):
    """Elliptical body mask: full height, 70% of the width."""
    rows, cols = np.indices((h, w))
    rr = (rows - (h - 1) / 2.0) / (h / 2.0)
    cc = (cols - (w - 1) / 2.0) / (0.35 * w)
    return rr * rr + cc * cc <= 1.0


def part_bands(h, parts):
    """Row boundaries of the stacked part bands: band p is rows
    [bounds[p], bounds[p+1])."""
    return np.linspace(0, h, parts + 1).astype(int)


def generate(spec):
    """Build the synthetic dataset for a spec.

    Returns (FeatureMapSet, truth): truth holds one LabelMap per image
    with labels 0 (background) and 1..parts, occluded bands relabeled
    background.
    """
    sil = silhouette_mask(spec.h, spec.w)
    bounds = part_bands(spec.h, spec.parts)
    band_masks = []
    for p in range(spec.parts):
        band = np.zeros_like(sil)
        band[bounds[p]:bounds[p + 1]] = True
        band &= sil
        if not band.any():
            raise ValidationError(
                f"part band {p + 1} has no silhouette pixels; "
                f"too many parts for {spec.h}x{spec.w}"
            )
        band_masks.append(band)

    anchors = _unit_rows(_rng(spec.seed, _SUB_ANCHORS).standard_normal((spec.parts, spec.c)))
    bg_dir = _unit_rows(_rng(spec.seed, _SUB_BACKGROUND).standard_normal((1, spec.c)))[0]

    maps = []
    truth = []
    image_id = 0
    for pid in range(spec.n_id):
        residuals = _rng(spec.seed, _SUB_IDENTITY, pid).standard_normal((spec.parts, spec.c))
        signatures = _unit_rows(anchors + _unit_rows(residuals))
        for j in range(spec.imgs_per_id):
            rng = _rng(spec.seed, _SUB_IMAGE, pid, j)
            occluded = rng.random(spec.parts) < spec.occlusion_prob
            noise = rng.standard_normal((spec.h, spec.w, spec.c)) * spec.noise_sigma
            mean = np.tile(spec.bg_gain * bg_dir, (spec.h, spec.w, 1))
            labels = np.zeros((spec.h, spec.w), dtype=np.uint8)
            for p in range(spec.parts):
                if occluded[p]:
                    continue
                mean[band_masks[p]] = spec.fg_gain * signatures[p]
                labels[band_masks[p]] = p + 1
            maps.append(FeatureMap(image_id, pid, j % _N_CAMERAS, mean + noise))
            truth.append(LabelMap(image_id, pid, labels, spec.n_classes))
            image_id += 1
    return FeatureMapSet(tuple(maps)), truth
