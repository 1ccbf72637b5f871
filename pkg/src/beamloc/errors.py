"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Inputs violate a documented precondition (shapes, ranges, enums)."""


class NumericError(RuntimeError):
    """A numerical routine failed (non-convergence, singular quantity)."""


class DegenerateSpectrumError(NumericError):
    """Two eigenvalues coincide within tolerance; modal derivatives undefined.

    Carries the offending pair of (sorted) mode indices and their values.
    """

    def __init__(self, index_a, index_b, value_a, value_b):
        self.pair = (index_a, index_b)
        self.values = (value_a, value_b)
        super().__init__(
            f"eigenvalues {index_a} and {index_b} coincide within tolerance: "
            f"{value_a:.12e} vs {value_b:.12e}"
        )


class TotalConflictError(NumericError):
    """Dempster combination attempted on totally conflicting evidence (K ~ 1)."""
