"""Exception hierarchy shared by every reofilm module."""


class ReofilmError(Exception):
    """Base class for all errors raised by reofilm."""


class DomainError(ReofilmError, ValueError):
    """An argument lies outside the admissible domain of an operation."""


class ExtrapolationError(DomainError):
    """A tabulated rheology was evaluated outside its sample range."""


class NonInvertibleRheologyError(DomainError):
    """The stress ``eps * nu(eps)`` is not increasing at the evaluated state."""


class ThinFilmError(DomainError):
    """Film thickness fell below the admissible floor."""

    def __init__(self, message, index=None, eta=None, vel=None):
        super().__init__(message)
        self.index = index
        self.eta = eta
        self.vel = vel


class NoEquilibriumError(ReofilmError):
    """A root bracket for a uniform-film equilibrium could not be found."""


class StiffnessError(ReofilmError):
    """The stable explicit time step fell below the configured minimum."""


class PositivityError(ReofilmError):
    """Repeated step rejection while keeping the film thickness positive."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class ConfigError(ReofilmError, ValueError):
    """A scenario configuration is missing a key or holds an invalid value."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
