"""Exception hierarchy.

``ModelError`` covers anything a user can fix in a model file or request
(bad matrices, violated bounds, failed validation conditions); it maps to
exit code 1 in the CLI and HTTP 422 in the service.  ``ComputationError``
covers runtime failures of the numerics (quadrature non-convergence,
event-budget overflow); it maps to exit code 2 / HTTP 500.
"""


class MarkovJumpError(Exception):
    """Base class for all library errors."""


class ModelError(MarkovJumpError):
    """Invalid model specification or violated model-level condition."""


class ReducibleChainError(ModelError):
    """Switching chain is not irreducible; carries the communicating classes."""

    def __init__(self, message: str, components: list[list[int]]):
        super().__init__(message)
        self.components = components


class ComputationError(MarkovJumpError):
    """A numerical routine failed to meet its contract."""


class EventBudgetError(ComputationError):
    """Simulation exceeded its event budget."""
