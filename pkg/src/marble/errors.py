"""Shared exception hierarchy."""


class MarbleError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(MarbleError):
    """Malformed or invalid run configuration."""


class SequenceError(MarbleError):
    """Event appended out of sequence."""


class UnknownAgentError(MarbleError):
    """An agent id was referenced that does not exist."""


class BackendError(MarbleError):
    """Completion backend failure."""


class ScriptExhaustedError(BackendError):
    """A scripted response queue ran dry; the fixture is missing a response."""


class MalformedToolCallError(BackendError):
    """The model emitted a tool call that could not be parsed."""


class PlanError(MarbleError):
    """Planner produced an unusable plan."""


class ProtocolError(MarbleError):
    """Run configuration is inconsistent with the selected protocol."""


class RuleError(MarbleError):
    """A game rule precondition was violated."""


class NegotiationError(MarbleError):
    """An invalid negotiation action was attempted."""


class JudgeError(MarbleError):
    """Judge output could not be parsed after retries."""


class MetricError(MarbleError):
    """Invalid input to a metric computation."""
