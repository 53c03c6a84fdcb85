"""Exception hierarchy.

Input problems (bad documents, bad arguments) derive from :class:`InputError`;
numerical failures (non-convergence, divergence, instability) derive from
:class:`NumericalError`. The CLI maps the two families onto exit codes 2 and 1.
"""


class HeliLqrError(Exception):
    """Base class for every error raised by this package."""


class InputError(HeliLqrError, ValueError):
    """A configuration document or argument is malformed."""


class MissingFieldError(InputError, KeyError):
    """A required key is absent from a configuration document."""

    def __init__(self, field: str, section: str | None = None):
        self.field = field
        self.section = section
        where = f" in section '{section}'" if section else ""
        super().__init__(f"missing required field '{field}'{where}")

    def __str__(self) -> str:
        # KeyError quotes its argument; keep the plain message.
        return self.args[0]


class ValidationError(InputError):
    """A value is present but violates a physical or structural invariant."""


class DimensionError(InputError):
    """Matrix or vector shapes are not conformable."""


class NumericalError(HeliLqrError, ArithmeticError):
    """A numerical procedure failed."""


class ConvergenceError(NumericalError):
    """An iteration exhausted its step budget."""


class StabilizabilityError(NumericalError):
    """The converged closed loop is not Hurwitz."""


class IntegrationError(NumericalError):
    """A time integration produced non-finite or runaway values."""

    def __init__(self, message: str, step: int | None = None):
        self.step = step
        super().__init__(message)
