"""Exception types raised across the simulator."""


class BurstgateError(Exception):
    """Base class for every error raised by this package."""


class ScenarioError(BurstgateError, ValueError):
    """A scenario failed validation.

    ``violations`` holds one :class:`~burstgate.core.Violation` per broken
    invariant, each naming the offending field.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        msg = "; ".join(f"{v.code}({v.field}): {v.message}" for v in self.violations)
        super().__init__(msg or "invalid scenario")

    @property
    def codes(self):
        return [v.code for v in self.violations]


class UnresolvableRate(BurstgateError):
    pass


class UnknownTableEntry(BurstgateError, KeyError):
    pass


class TraceError(BurstgateError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class ParseError(TraceError):
    pass


class NonMonotonicTimestamp(TraceError):
    pass


class EmptyTrace(TraceError):
    pass


class NonPositiveFlows(BurstgateError, ValueError):
    pass


class OutOfTinyRange(BurstgateError, ValueError):
    pass


class InvalidCompletion(BurstgateError, RuntimeError):
    pass


class InvariantViolation(BurstgateError, AssertionError):
    """Raised by instrumented runs when a model invariant breaks."""


class NoVoipFlows(BurstgateError, ValueError):
    pass


class BadEdges(BurstgateError, ValueError):
    pass


class IterationError(BurstgateError):
    def __init__(self, index, cause):
        self.index = index
        self.cause = cause
        super().__init__(f"iteration {index} failed: {cause}")
