"""Exception types shared across the solver, CLI and service."""


class ConvexSegError(Exception):
    """Base class for package errors."""


class InputError(ConvexSegError):
    """Unreadable or malformed input data."""


class ValidationError(ConvexSegError):
    """Inputs parsed but violate a documented precondition."""


class MissingScribblesError(ValidationError):
    """A class required by the task has no scribbled pixels."""


class NumericalDivergenceError(ConvexSegError):
    """The inner solver produced a non-finite iterate."""

    def __init__(self, iteration: int, what: str = "iterate"):
        self.iteration = iteration
        super().__init__(f"non-finite {what} at inner iteration {iteration}")
