"""Decentralized online DR-submodular maximization toolkit."""

from .errors import ConfigError, DisconnectedGraphError, DosmError, HorizonExhausted, InvariantError

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DisconnectedGraphError",
    "DosmError",
    "HorizonExhausted",
    "InvariantError",
    "__version__",
]
