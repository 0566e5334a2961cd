"""Exception types shared across the package."""


class SingularityError(ValueError):
    """Raised for queries at (or within the numerical guard disk of) the
    field's singular point, where the normalized field and the reference
    orientation are undefined."""


class NonConvergingStateError(ValueError):
    """Raised when a configuration lies in the measure-zero non-converging
    set for which the closed loop has no convergence guarantee."""


class FeasibilityError(ValueError):
    """Raised when parameters violate a feasibility inequality. The message
    names the violated inequality with its evaluated sides."""


class NoPassageError(RuntimeError):
    """Raised when a traced curve never passes within tolerance of the
    requested target point."""


class InsufficientDataError(ValueError):
    """Raised when a metric is requested on too little data (e.g. an empty
    batch or a single-sample trajectory)."""


class ScenarioFormatError(ValueError):
    """Raised when a scenario file cannot be parsed. Carries file/section
    context in the message."""
