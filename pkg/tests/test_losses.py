"""Triplet loss, smoothed CE, and the combined objective report."""

import math

import numpy as np
import pytest

from partalign import (DegenerateInputError, IdHead, LossReport,
                       ValidationError, reid_objective, smoothed_ce,
                       triplet_loss)

from conftest import make_descriptor
from oracles import brute_triplet, scalar_smoothed_ce


def test_triplet_zero_when_ids_far_apart():
    feats = np.array([[0.0], [0.0], [10.0], [10.0]])
    ids = [0, 0, 1, 1]
    assert triplet_loss(feats, ids, margin=0.3) == 0.0


def test_triplet_equals_margin_for_identical_feats():
    feats = np.zeros((4, 3))
    ids = [0, 0, 1, 1]
    assert triplet_loss(feats, ids, margin=0.3) == pytest.approx(0.3, abs=1e-12)


def test_triplet_needs_two_identities():
    with pytest.raises(DegenerateInputError):
        triplet_loss(np.zeros((3, 2)), [1, 1, 1])


def test_triplet_needs_an_anchor_with_positive():
    with pytest.raises(DegenerateInputError):
        triplet_loss(np.zeros((3, 2)), [0, 1, 2])


def test_triplet_matches_exhaustive_oracle(rng):
    for _ in range(30):
        n = int(rng.integers(4, 13))
        feats = rng.standard_normal((n, int(rng.integers(2, 5)))) * 3
        ids = rng.integers(0, max(2, n // 2), size=n).tolist()
        ids[1] = ids[0]
        if len(set(ids)) < 2:
            ids[-1] = ids[0] + 1
        assert triplet_loss(feats, ids, margin=0.3) == pytest.approx(
            brute_triplet(feats, ids, margin=0.3), abs=1e-9)


def test_smoothed_ce_zero_head_is_log_n_id(rng):
    head = IdHead.zeros(5, 3)
    feats = rng.standard_normal((8, 3))
    ids = rng.integers(0, 5, size=8)
    assert abs(smoothed_ce(head, feats, ids) - math.log(5)) < 1e-12


def test_smoothed_ce_epsilon_zero_is_plain_ce(rng):
    V = rng.standard_normal((4, 3))
    feats = rng.standard_normal((6, 3))
    ids = rng.integers(0, 4, size=6)
    got = smoothed_ce(IdHead(V), feats, ids, epsilon=0.0)
    logits = feats @ V.T
    shifted = logits - logits.max(axis=1, keepdims=True)
    lp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    want = float(np.mean(-lp[np.arange(6), ids]))
    assert got == pytest.approx(want, abs=1e-12)


def test_smoothed_ce_matches_scalar_oracle(rng):
    for _ in range(20):
        n_id = int(rng.integers(2, 6))
        dim = int(rng.integers(1, 5))
        n = int(rng.integers(1, 9))
        V = rng.standard_normal((n_id, dim)) * 2
        feats = rng.standard_normal((n, dim)) * 2
        ids = rng.integers(0, n_id, size=n).tolist()
        got = smoothed_ce(IdHead(V), feats, ids, epsilon=0.1)
        assert got == pytest.approx(scalar_smoothed_ce(V, feats, ids, 0.1), abs=1e-9)


def test_smoothed_ce_validation(rng):
    head = IdHead.zeros(3, 2)
    feats = rng.standard_normal((2, 2))
    with pytest.raises(ValidationError):
        smoothed_ce(head, feats, [0, 1], epsilon=1.0)
    with pytest.raises(ValidationError):
        smoothed_ce(head, feats, [0, 3])
    with pytest.raises(ValidationError):
        smoothed_ce(head, rng.standard_normal((2, 5)), [0, 1])


def test_smoothed_ce_rotation_invariant_at_zero_head(rng):
    # a zero head scores every identity equally regardless of features
    head = IdHead.zeros(4, 3)
    feats = rng.standard_normal((5, 3))
    a = smoothed_ce(head, feats, [0, 1, 2, 3, 0])
    b = smoothed_ce(head, feats * 100, [0, 1, 2, 3, 0])
    assert a == b


def test_loss_report_checks_total():
    LossReport(1.0, 2.0, 3.0, 4.0, 0.1, 6.4)
    with pytest.raises(ValidationError):
        LossReport(1.0, 2.0, 3.0, 4.0, 0.1, 7.0)


def test_reid_objective_composition(rng):
    descs = [make_descriptor(rng, n_parts=2, c=3, image_id=i, person_id=i % 2)
             for i in range(4)]
    heads = (IdHead.zeros(2, 6), IdHead.zeros(2, 3), IdHead.zeros(2, 3))
    report = reid_objective(descs, None, heads, alpha=0.1, l_parsing=2.0)
    feats_p = np.stack([d.part_feats.ravel() for d in descs])
    ids = [d.person_id for d in descs]
    want_p = triplet_loss(feats_p, ids) + smoothed_ce(heads[0], feats_p, ids)
    assert report.l_p == pytest.approx(want_p, abs=1e-12)
    assert report.alpha == 0.1 and report.l_parsing == 2.0
    assert report.total == pytest.approx(
        report.l_p + report.l_f + report.l_g + 0.2, abs=1e-9)


def test_reid_objective_needs_two_descriptors(rng):
    heads = (IdHead.zeros(2, 6), IdHead.zeros(2, 3), IdHead.zeros(2, 3))
    with pytest.raises(ValidationError):
        reid_objective([make_descriptor(rng, n_parts=2, c=3)], None, heads)
