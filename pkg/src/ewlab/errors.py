"""Exception classes shared across the package."""


class EwlabError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(EwlabError):
    """A configuration is inconsistent (CFL violated, grid too small, ...)."""


class BlowUpError(EwlabError):
    """The explicit scheme produced non-finite values."""

    def __init__(self, step_index, message=None):
        self.step_index = step_index
        super().__init__(message or f"non-finite field values after step {step_index}")


class QualityError(EwlabError):
    """A result exists but fails a quality gate (negative cells, clamping)."""


class BudgetError(EwlabError):
    """An adaptive procedure could not meet its accuracy target in budget."""


class TruncationError(EwlabError):
    """A finite-horizon truncation diagnostic failed; a larger horizon is needed."""
