"""Exception types shared across the package.

ValidationError: the request itself is malformed (bad shapes, bad options,
unreadable files).  NumericalError: the request was well formed but the
computation cannot be completed reliably (resonances, pole proximity,
rank failures, blowup where a finite answer was required).
"""


class ValidationError(ValueError):
    pass


class NumericalError(RuntimeError):
    pass


class SmallDivisorError(NumericalError):
    """Near-zero cohomological divisor; carries the offending row and index."""

    def __init__(self, row: int, index, divisor: complex):
        self.row = row
        self.index = tuple(index)
        self.divisor = divisor
        super().__init__(
            f"near-resonant divisor {divisor:.3e} at row {row}, multi-index {self.index}")


class PoleProximityError(NumericalError):
    """Denominator magnitude fell below the floor during evaluation."""

    def __init__(self, point, value, floor):
        self.point = point
        self.value = value
        self.floor = floor
        super().__init__(
            f"denominator magnitude {abs(value):.3e} below floor {floor:.3e} at {point}")
