"""Exception types shared across the engine."""

from __future__ import annotations


class StbonError(Exception):
    """Base class for engine errors."""


class ConfigError(StbonError):
    """Invalid configuration or incompatible option combination."""


class ContextOverflowError(StbonError):
    """A prefix exceeded the model's maximum context length."""

    def __init__(self, length: int, max_context: int, index: int | None = None):
        self.length = length
        self.max_context = max_context
        self.index = index
        at = f" (batch index {index})" if index is not None else ""
        super().__init__(f"prefix length {length} exceeds max context {max_context}{at}")


class EmptySupportError(StbonError):
    """Logit transformation left no token with positive probability."""


class DegenerateChainError(StbonError):
    """An embedding chain cannot produce a finite consistency feature."""


class InsufficientSamplesError(StbonError):
    """An operation needs at least two candidate samples."""


class ReplayMissError(StbonError):
    """A replay model was asked for a prefix absent from its recording."""


class BridgeProtocolError(StbonError):
    """The out-of-process model bridge violated the wire protocol."""


class BridgeFailureError(StbonError):
    """The bridge process reported a fatal condition or died."""
