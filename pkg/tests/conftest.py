"""Shared fixtures/helpers plus the acceptance-criteria summary printer."""

import numpy as np
import pytest

from partalign import Descriptor, FeatureMap, FeatureMapSet, LabelMap

ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)


def rand_fmap(rng, h=6, w=5, c=4, image_id=0, person_id=0, camera_id=0, scale=1.0):
    data = rng.standard_normal((h, w, c)) * scale
    return FeatureMap(image_id, person_id, camera_id, data)


def rand_label_map(rng, h=6, w=5, n_classes=4, image_id=0, person_id=0,
                   unlabeled_frac=0.0):
    labels = rng.integers(0, n_classes, size=(h, w)).astype(np.uint8)
    if unlabeled_frac > 0:
        mask = rng.random((h, w)) < unlabeled_frac
        labels[mask] = 255
    return LabelMap(image_id, person_id, labels, n_classes)


def make_descriptor(rng, n_parts=3, c=4, visibility=None, image_id=0,
                    person_id=0, camera_id=0):
    if visibility is None:
        visibility = np.ones(n_parts, dtype=bool)
    return Descriptor(image_id, person_id, camera_id,
                      rng.standard_normal((n_parts, c)),
                      rng.standard_normal(c), rng.standard_normal(c),
                      np.asarray(visibility, dtype=bool))


def small_set(rng, n_people=2, imgs_each=2, h=6, w=5, c=4):
    maps = []
    image_id = 0
    for pid in range(n_people):
        for j in range(imgs_each):
            maps.append(rand_fmap(rng, h, w, c, image_id=image_id,
                                  person_id=pid, camera_id=j))
            image_id += 1
    return FeatureMapSet(tuple(maps))


@pytest.fixture
def rng():
    return np.random.default_rng(20260818)
