"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value violates its documented constraints."""


class StabilityError(ValueError):
    """Offered load is at or above 1; the queue has no steady state."""


class InternalConsistencyError(RuntimeError):
    """A quantity that is provably non-negative came out meaningfully negative.

    Signals a parameter/precision bug rather than a user error.
    """


class StatisticalValidityError(RuntimeError):
    """Not enough observations for the requested statistic to be trustworthy."""


class StatisticalSetupError(ValueError):
    """Simulation budget is too small for the requested batch structure."""


class InfeasiblePlanError(ValueError):
    """The delay budget lies below the first-transmission baseline."""

    def __init__(self, budget: float, floor: float):
        self.budget = budget
        self.floor = floor
        super().__init__(
            f"delay budget {budget:.6g} us is below the FTR floor {floor:.6g} us"
        )


class PlanSearchError(RuntimeError):
    """The threshold search exceeded its hard bound without meeting the budget."""
