"""Exception hierarchy shared by the package."""


class PDMCTSError(Exception):
    """Base class for all package errors."""


class ContractViolation(PDMCTSError):
    """A caller broke an operation's precondition (infeasible action, bad length...)."""


class ConfigurationError(PDMCTSError, ValueError):
    """Invalid configuration values."""


class ResourceBudgetError(PDMCTSError):
    """A computation would exceed a configured node or trajectory budget."""

    def __init__(self, message: str, budget: int):
        super().__init__(f"{message} (budget={budget})")
        self.budget = budget


class NotReadyError(PDMCTSError):
    """The tree has nothing to recommend yet."""
