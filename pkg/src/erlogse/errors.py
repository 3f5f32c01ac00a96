"""Exception types raised by the solver."""


class ConfigurationError(ValueError):
    """Inconsistent grids, field lengths, or configuration values."""


class DomainError(ValueError):
    """Argument outside the domain of a density function (e.g. rho < 0)."""


class SingularSolveError(ArithmeticError):
    """A diagonal implicit-stage solve hit a vanishing denominator."""


class TableauError(ValueError):
    """A Butcher tableau could not be parsed or failed validation."""


class RelaxationBreakdown(ArithmeticError):
    """The relaxation coefficient left its admissible interval."""

    def __init__(self, gamma, step_index):
        self.gamma = gamma
        self.step_index = step_index
        super().__init__(
            f"relaxation coefficient gamma={gamma!r} outside guard interval "
            f"at step {step_index}"
        )
