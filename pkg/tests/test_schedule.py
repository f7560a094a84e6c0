"""Learning-rate schedule: exact anchors, warmup shape, validation."""

import pytest
from hypothesis import given, settings, strategies as st

from partalign import LrSchedule, ValidationError


def default_schedule():
    return LrSchedule(total_epochs=120)


def test_published_anchor_rates_exact():
    s = default_schedule()
    assert s.lr_at(0) == 3.5e-5
    assert s.lr_at(10) == 3.5e-4
    assert s.lr_at(40) == 3.5e-5
    assert s.lr_at(70) == 3.5e-6
    assert s.lr_at(119) == 3.5e-6


def test_warmup_is_linear():
    s = default_schedule()
    assert s.lr_at(5) == 3.5e-5 + (3.5e-4 - 3.5e-5) * 0.5
    mids = [s.lr_at(e) for e in range(10)]
    assert mids == sorted(mids)
    assert s.lr_at(9) < 3.5e-4


def test_plateau_between_warmup_and_decay():
    s = default_schedule()
    for e in range(10, 40):
        assert s.lr_at(e) == 3.5e-4


def test_no_warmup():
    s = LrSchedule(total_epochs=5, warmup_epochs=0, decay_epochs=())
    assert s.lr_at(0) == 3.5e-4


def test_decay_at_epoch_zero():
    s = LrSchedule(total_epochs=5, warmup_epochs=0, decay_epochs=(0,))
    assert s.lr_at(0) == 3.5e-5


def test_epoch_out_of_range():
    s = default_schedule()
    with pytest.raises(ValidationError):
        s.lr_at(-1)
    with pytest.raises(ValidationError):
        s.lr_at(120)


def test_validation_rejects_bad_fields():
    with pytest.raises(ValidationError):
        LrSchedule(total_epochs=0)
    with pytest.raises(ValidationError):
        LrSchedule(total_epochs=10, base_lr=-1.0)
    with pytest.raises(ValidationError):
        LrSchedule(total_epochs=10, decay_epochs=(5, 5))
    with pytest.raises(ValidationError):
        LrSchedule(total_epochs=10, decay_epochs=(12,))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 119))
def test_rates_positive_everywhere(epoch):
    assert default_schedule().lr_at(epoch) > 0.0


def test_decimal_decay_beats_float_product():
    s = default_schedule()
    assert s.lr_at(40) == 3.5e-5
    assert 3.5e-4 * 0.1 != 3.5e-5  # why the decimal path exists
