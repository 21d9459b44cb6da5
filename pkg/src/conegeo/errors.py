"""Exception types shared across the package."""


class InvalidInput(ValueError):
    """Malformed shapes, non-finite entries or out-of-range arguments."""


class NotPositiveDefinite(ValueError):
    """A matrix that must be positive definite failed its Cholesky factorization."""


class StepTooLarge(ArithmeticError):
    """A step would overflow the matrix exponential or leave the PD cone."""


class DegenerateVariance(ArithmeticError):
    """A ratio was requested whose denominator variance is (numerically) zero."""
