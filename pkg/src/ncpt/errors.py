"""Exception types shared across the package.

The CLI maps these onto exit codes: input/validation problems exit 2,
data-insufficiency problems exit 3.
"""


class NcptError(Exception):
    """Base class for all package errors."""


class NonHermitianInput(NcptError):
    """A matrix expected to be Hermitian violates symmetry beyond tolerance."""


class DimensionMismatch(NcptError):
    """Operands have incompatible dimensions."""


class OutOfDomain(NcptError):
    """A state lies outside the domain of the requested operation."""


class DegenerateSpec(NcptError):
    """An observer spec has an outcome with zero probability under both hypotheses."""


class EmptyTable(NcptError):
    """A count table has no runs for the requested hypothesis."""


class ZeroDenominator(NcptError):
    """A conditional estimate was requested on an unobserved branch."""


class InsufficientData(NcptError):
    """Not enough runs to build the requested distribution."""


class NotAPvm(NcptError):
    """A measurement passed where a projection-valued measure is required is not one."""


class NotConverged(NcptError):
    """An iterative solver hit its iteration cap before reaching tolerance."""
