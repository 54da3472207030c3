"""Exception types raised by scalecp."""


class DomainError(ValueError):
    """Input outside the domain of an estimator, distribution or formula."""


class DegenerateDensityError(DomainError):
    """A kernel density estimate needed for studentization is not positive."""


class NumericError(RuntimeError):
    """A numerical routine (quadrature, root finding) failed to converge."""
