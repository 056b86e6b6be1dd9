"""Exception types shared across the library."""


class ParameterError(ValueError):
    """Invalid or unsatisfiable scheme/kernel parameters."""


class DomainError(ValueError):
    """Operation applied to a polynomial in the wrong domain (coeff vs ntt)."""


class BatchError(ValueError):
    """Heterogeneous or malformed batch input."""


class CapacityError(ValueError):
    """Resource budget too small (memory for B=1, or level budget exhausted)."""
