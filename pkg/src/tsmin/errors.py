"""Exception hierarchy shared by every tsmin module."""


class TsmError(Exception):
    """Base class for all tsmin errors."""


class InstanceFormatError(TsmError):
    """An instance file could not be parsed."""


class InstanceValidationError(TsmError):
    """An instance violates a structural invariant (non-binary entry, bad shape, duplicate id)."""


class InfeasibleInstanceError(TsmError):
    """Some statement or fault column is covered by no test, so no reduced suite can exist."""

    def __init__(self, kind, index, message=None):
        self.kind = kind
        self.index = index
        self.label = f"{'s' if kind == 'stmt' else 'f'}{index + 1}"
        super().__init__(
            message or f"{kind} column {index} ({self.label}) is not covered by any test"
        )


class OracleLimitError(TsmError):
    """Exhaustive search was requested for a suite larger than the configured limit."""


class SolverError(TsmError):
    """A solver could not produce a feasible selection."""


class ContractViolation(TsmError):
    """An API precondition was broken, e.g. stepping an environment with a masked action."""
