"""Exception hierarchy shared by all modules."""


class AmenpoisError(Exception):
    """Base class for all package errors."""


class DomainError(AmenpoisError, ValueError):
    """An argument is outside the operation's domain (bad probability, negative rate, ...)."""


class ResourceBudgetError(AmenpoisError, RuntimeError):
    """An enumeration (BFS, set product) exceeded its configured node budget."""


class RegionError(AmenpoisError, LookupError):
    """A field sample was queried outside its sampled region."""


class EstimationError(AmenpoisError, RuntimeError):
    """A Monte-Carlo estimate is undefined (e.g. every conditioning event is empty)."""


class NumericError(AmenpoisError, ArithmeticError):
    """An iterative solver failed to reach its tolerance."""


class ConfigError(AmenpoisError, ValueError):
    """Experiment configuration failed validation.

    `fields` lists every offending field path (e.g. ``simulator.p``).
    """

    def __init__(self, fields_and_messages):
        self.errors = list(fields_and_messages)
        self.fields = [f for f, _ in self.errors]
        lines = [f"{field}: {msg}" for field, msg in self.errors]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
