"""Exception hierarchy for tikhcond."""


__all__ = [
    "TikhcondError",
    "InputError",
    "DegenerateStructure",
    "UnsupportedForNonlinear",
    "NotInClass",
    "BasisMismatch",
    "RankDeficient",
    "PerturbedRankDeficient",
    "BadDimension",
    "MNotSingleRow",
    "UnknownExample",
    "ZeroDenominator",
    "SizeCapExceeded",
    "ZeroOperator",
    "DegenerateSamples",
]


class TikhcondError(Exception):
    """Base class for all errors raised by this package."""


class InputError(TikhcondError, ValueError):
    """Malformed or inconsistent user input."""


class DegenerateStructure(InputError):
    """Cauchy node sets are not separated (some u_i == v_j)."""


class UnsupportedForNonlinear(InputError):
    """Operation only makes sense for linearly structured matrices."""


class NotInClass(InputError):
    """A dense matrix does not belong to the requested structure class."""


class BasisMismatch(InputError):
    """The supplied linear basis does not reproduce the coefficient matrix."""


class RankDeficient(InputError):
    """rank(L) < p or rank([A; L]) < n."""


class PerturbedRankDeficient(RankDeficient):
    """A perturbed coefficient matrix lost the stacked rank condition."""


class BadDimension(InputError):
    """Requested dimensions are out of range."""


class MNotSingleRow(InputError):
    """A closed form that needs a single-row selector got l > 1."""


class UnknownExample(InputError):
    """No generator is registered under the requested example id."""


class ZeroDenominator(TikhcondError, ArithmeticError):
    """Componentwise quotient with a nonzero numerator over a zero entry."""

    def __init__(self, indices, message=None):
        self.indices = tuple(int(i) for i in indices)
        if message is None:
            message = f"solution components {list(self.indices)} are zero"
        super().__init__(message)


class SizeCapExceeded(TikhcondError, MemoryError):
    """The dense unstructured derivative would exceed the configured size cap."""


class ZeroOperator(TikhcondError, ArithmeticError):
    """A power iteration started on a numerically zero operator image."""


class DegenerateSamples(TikhcondError, ArithmeticError):
    """Random SCE samples were numerically rank deficient after resampling."""
