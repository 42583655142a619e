"""Exception types raised across the package."""


class UnstableQueueError(ValueError):
    """Arrival rate reaches or exceeds the service rate."""


class InvalidDistributionError(ValueError):
    """A service-time distribution cannot match the requested moments."""


class MissingAssignmentError(KeyError):
    """A point does not assign a value to a referenced variable."""


class InvalidInstanceError(ValueError):
    pass


class InfeasibleAssignmentError(ValueError):
    """An assignment violates one or more constraint families."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("infeasible assignment: " + "; ".join(self.violations))


class InstanceTooLargeError(ValueError):
    pass


class NoFeasibleAssignmentError(ValueError):
    pass


class NonIntegralPointError(ValueError):
    pass


class LpNumericalError(RuntimeError):
    """The LP core could not certify a status."""


class InvalidModelError(ValueError):
    """A ``ConicModel`` failed structural validation."""

    def __init__(self, defects):
        self.defects = list(defects)
        super().__init__("invalid model: " + "; ".join(self.defects))


class InvalidSpecError(ValueError):
    """A generator spec has an empty or inverted range."""
