"""Exception types shared across the package.

The CLI maps these onto distinct exit codes (see ``partalign.cli``).
"""


class ValidationError(ValueError):
    """An input violates a documented invariant (shape, range, consistency)."""


class FormatError(ValidationError):
    """A binary file does not start with the expected magic/version."""


class DegenerateInputError(ValidationError):
    """Input is structurally valid but carries no usable signal
    (all-zero feature map, fully unlabeled image, no valid triplet anchor).
    """


class DivergenceError(ArithmeticError):
    """Optimization produced a non-finite loss."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch
