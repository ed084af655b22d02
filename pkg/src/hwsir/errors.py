class DegenerateState(ArithmeticError):
    """A right-hand side was evaluated where a needed denominator vanishes."""


class StepSizeUnderflow(ArithmeticError):
    """The step-size controller could not meet the requested tolerance."""


class EmptySelection(ValueError):
    """No trajectory (or replicate) satisfied a selection criterion."""


class InsufficientSamples(ValueError):
    pass


class Extinct(Exception):
    """No infected individual remains; no further event can happen."""
