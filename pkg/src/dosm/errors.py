"""Exception types shared across the package."""


class DosmError(Exception):
    """Base class for package errors."""


class ConfigError(DosmError, ValueError):
    """Invalid run configuration (bad keys, divisibility, unsupported set...)."""


class InvariantError(DosmError, ValueError):
    """A mathematical object violates one of its defining invariants."""


class DisconnectedGraphError(InvariantError):
    def __init__(self, components):
        self.components = [list(c) for c in components]
        listing = ", ".join("{" + ", ".join(map(str, c)) + "}" for c in self.components)
        super().__init__(f"topology is disconnected; components: {listing}")


class HorizonExhausted(DosmError, RuntimeError):
    """An online learner was asked to play past its horizon."""
