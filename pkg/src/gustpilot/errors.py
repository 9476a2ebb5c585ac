"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array or vector dimensions do not line up."""


class NumericError(ArithmeticError):
    """A simulation or training quantity became non-finite."""
