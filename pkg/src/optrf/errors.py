"""Exception types shared across the library and mapped to CLI exit codes."""


class ConfigError(ValueError):
    """A configuration value violates its documented constraint."""


class CertificationError(RuntimeError):
    """A synthetic task failed its margin certificate."""


class SamplerAbort(RuntimeError):
    """Rejection sampling aborted because the acceptance rate fell below the floor."""

    def __init__(self, message, proposals=0, accepted=0, expected_acceptance=None):
        super().__init__(message)
        self.proposals = proposals
        self.accepted = accepted
        self.expected_acceptance = expected_acceptance


class OutOfBoxError(ValueError):
    """A point lies outside the grid box of a count tree."""


class StreamExhausted(RuntimeError):
    """A training stream ended before supplying the promised number of examples."""
