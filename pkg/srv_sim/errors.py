"""Exceptions raised by the simulator.

Library code raises these; only the command layer turns them into exit codes.
"""


class SrvSimError(Exception):
    """Base class for every error raised by srv_sim."""


class GadgetSyntaxError(SrvSimError, SyntaxError):
    """Malformed gadget DSL text, with the offending line and column."""

    def __init__(self, message, line, column):
        self.message = message
        self.line = line
        self.column = column
        super().__init__('{0} (line {1}, column {2})'.format(
            message, line, column))

    def __str__(self):
        return '{0} (line {1}, column {2})'.format(
            self.message, self.line, self.column)


class ValidationError(SrvSimError):
    """A well-formed program violates a structural invariant."""


class CapacityError(SrvSimError):
    """The requested footprint does not fit in simulated memory."""


class OutOfBounds(SrvSimError):
    """An architectural access indexed outside every permitted region."""

    def __init__(self, array, index):
        self.array = array
        self.index = index
        super().__init__(
            'index {0} is outside array {1}'.format(index, array))


class UnsupportedPattern(SrvSimError):
    """A statement or program cannot be lowered by the vectorizer."""


class ReplayBudgetExceeded(SrvSimError):
    """An SRV region was still tainted after replay_limit replays."""


class NoKnee(SrvSimError):
    """A latency table shows no capacity knee."""


class NoSymbol(SrvSimError):
    """A covert-channel reload found no cached entry."""


class ConfigError(SrvSimError):
    """Invalid scenario, override or command-line configuration."""
