"""Synthetic generator: determinism, planted structure, occlusion truth."""

import numpy as np
import pytest

from partalign import SyntheticSpec, ValidationError, generate
from partalign.synthetic import part_bands, silhouette_mask


def small(**kw):
    base = dict(n_id=2, imgs_per_id=3, c=8, h=16, w=8, parts=3, seed=1)
    base.update(kw)
    return SyntheticSpec(**base)


def test_deterministic():
    a_set, a_truth = generate(small(occlusion_prob=0.4))
    b_set, b_truth = generate(small(occlusion_prob=0.4))
    for ma, mb in zip(a_set.maps, b_set.maps):
        assert ma.data.tobytes() == mb.data.tobytes()
    for ta, tb in zip(a_truth, b_truth):
        assert np.array_equal(ta.labels, tb.labels)


def test_ids_and_geometry():
    spec = small(n_id=3, imgs_per_id=8)
    fset, truth = generate(spec)
    assert fset.n == 24 and fset.n_id == 3
    assert (fset.h, fset.w, fset.c) == (16, 8, 8)
    assert [m.image_id for m in fset.maps] == list(range(24))
    assert [m.camera_id for m in fset.maps[:8]] == [0, 1, 2, 3, 4, 5, 0, 1]
    assert all(t.n_classes == spec.n_classes for t in truth)
    assert [t.image_id for t in truth] == [m.image_id for m in fset.maps]


def test_noise_free_pixels_hit_planted_values():
    spec = small(noise_sigma=0.0, fg_gain=4.0, bg_gain=1.0)
    fset, truth = generate(spec)
    sil = silhouette_mask(spec.h, spec.w)
    bounds = part_bands(spec.h, spec.parts)
    m, t = fset.maps[0], truth[0]
    bg_pixels = m.data[~sil]
    assert np.allclose(np.linalg.norm(bg_pixels.astype(np.float64), axis=1), 1.0,
                       atol=1e-6)
    assert np.array_equal(t.labels > 0, sil)
    for p in range(spec.parts):
        band = np.zeros_like(sil)
        band[bounds[p]:bounds[p + 1]] = True
        band &= sil
        vals = m.data[band].astype(np.float64)
        assert np.allclose(np.linalg.norm(vals, axis=1), 4.0, atol=1e-5)
        assert np.allclose(vals, vals[0], atol=1e-6)
        assert np.all(t.labels[band] == p + 1)


def test_occluded_band_becomes_background():
    spec = small(noise_sigma=0.0, occlusion_prob=0.7, seed=5)
    fset, truth = generate(spec)
    sil = silhouette_mask(spec.h, spec.w)
    bounds = part_bands(spec.h, spec.parts)
    occluded_seen = False
    for m, t in zip(fset.maps, truth):
        for p in range(spec.parts):
            band = np.zeros_like(sil)
            band[bounds[p]:bounds[p + 1]] = True
            band &= sil
            if np.all(t.labels[band] == 0):
                occluded_seen = True
                norms = np.linalg.norm(m.data[band].astype(np.float64), axis=1)
                assert np.allclose(norms, spec.bg_gain, atol=1e-5)
            else:
                assert np.all(t.labels[band] == p + 1)
    assert occluded_seen


def test_same_part_signatures_correlate_across_identities():
    spec = small(n_id=4, noise_sigma=0.0)
    fset, truth = generate(spec)
    sil = silhouette_mask(spec.h, spec.w)
    bounds = part_bands(spec.h, spec.parts)
    band0 = np.zeros_like(sil)
    band0[bounds[0]:bounds[1]] = True
    band0 &= sil
    sigs = []
    for pid in range(4):
        m = fset.by_person(pid)[0]
        v = m.data[band0].astype(np.float64)[0]
        sigs.append(v / np.linalg.norm(v))
    for i in range(4):
        for j in range(i + 1, 4):
            assert 0.1 < float(sigs[i] @ sigs[j]) < 0.9


def test_silhouette_and_bands():
    sil = silhouette_mask(16, 8)
    assert not sil[0, 0] and not sil[15, 7]
    assert sil[8, 4]
    bounds = part_bands(16, 3)
    assert bounds[0] == 0 and bounds[-1] == 16
    assert len(bounds) == 4
    assert all(bounds[i] < bounds[i + 1] for i in range(3))


def test_spec_validation():
    with pytest.raises(ValidationError):
        SyntheticSpec(parts=80, h=16)
    with pytest.raises(ValidationError):
        SyntheticSpec(occlusion_prob=1.0)
    with pytest.raises(ValidationError):
        SyntheticSpec(fg_gain=1.0)
    with pytest.raises(ValidationError):
        SyntheticSpec(n_id=0)
    with pytest.raises(ValidationError):
        SyntheticSpec(bg_gain=-0.1)
    with pytest.raises(ValidationError):
        SyntheticSpec(seed=-1)


def test_seed_changes_data():
    a, _ = generate(small(seed=1))
    b, _ = generate(small(seed=2))
    assert not np.array_equal(a.maps[0].data, b.maps[0].data)
