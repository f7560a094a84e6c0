"""Warmup-then-decay learning-rate schedule.

The rate grows linearly from ``warmup_start_lr`` at epoch 0 to ``base_lr``
at epoch ``warmup_epochs``, stays there, and is multiplied by
``decay_factor`` at each epoch in ``decay_epochs``.

Decayed values are computed in decimal arithmetic on the literal values of
base rate and factor, then rounded once to float.  Plain float
multiplication would miss published anchor rates: 3.5e-4 * 0.1 is not the
float 3.5e-5, but the decimal product rounds to exactly it.
"""

from dataclasses import dataclass
from decimal import Decimal

from .errors import ValidationError


@dataclass(frozen=True)
class LrSchedule:
    total_epochs: int
    warmup_epochs: int = 10
    base_lr: float = 3.5e-4
    warmup_start_lr: float = 3.5e-5
    decay_factor: float = 0.1
    decay_epochs: tuple = (40, 70)

    def __post_init__(self):
        if int(self.total_epochs) != self.total_epochs or self.total_epochs < 1:
            raise ValidationError(f"total_epochs must be >= 1, got {self.total_epochs!r}")
        if int(self.warmup_epochs) != self.warmup_epochs or self.warmup_epochs < 0:
            raise ValidationError(f"warmup_epochs must be >= 0, got {self.warmup_epochs!r}")
        if not (self.base_lr > 0 and self.warmup_start_lr > 0 and self.decay_factor > 0):
            raise ValidationError("rates and decay factor must be positive")
        decays = tuple(int(d) for d in self.decay_epochs)
        if any(b <= a for a, b in zip(decays, decays[1:])):
            raise ValidationError(f"decay epochs must be strictly increasing: {decays}")
        if decays and (decays[0] < 0 or decays[-1] >= self.total_epochs):
            raise ValidationError(
                f"decay epochs must lie in [0, {self.total_epochs}): {decays}"
            )
        object.__setattr__(self, "total_epochs", int(self.total_epochs))
        object.__setattr__(self, "warmup_epochs", int(self.warmup_epochs))
        object.__setattr__(self, "decay_epochs", decays)

    def lr_at(self, epoch):
        """Learning rate for one epoch index in [0, total_epochs)."""
        if int(epoch) != epoch or not 0 <= epoch < self.total_epochs:
            raise ValidationError(
                f"epoch must lie in [0, {self.total_epochs}), got {epoch!r}"
            )
        epoch = int(epoch)
        if epoch < self.warmup_epochs:
            frac = epoch / self.warmup_epochs
            return self.warmup_start_lr + (self.base_lr - self.warmup_start_lr) * frac
        n_decays = sum(1 for d in self.decay_epochs if d <= epoch)
        if n_decays == 0:
            return self.base_lr
        scale = Decimal(repr(self.decay_factor)) ** n_decays
        return float(Decimal(repr(self.base_lr)) * scale)
