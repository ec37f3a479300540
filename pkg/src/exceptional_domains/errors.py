"""Exception hierarchy shared by all modules."""


class DomainError(ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class SingularityError(DomainError):
    """A coordinate function is evaluated at (or too close to) its singular set."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to converge or produced unusable output."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class ContractError(ValueError):
    """Inputs are individually valid but inconsistent with each other."""
