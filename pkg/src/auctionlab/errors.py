"""Exception types shared across the library."""


class AuctionLabError(Exception):
    """Base class for all library errors."""


class DomainError(AuctionLabError):
    """An argument lies outside the operation's domain."""


class PreconditionError(AuctionLabError):
    """A documented precondition was violated by the caller."""


class CapacityError(AuctionLabError):
    """Instance size exceeds the exhaustive-computation cap."""


class ParameterError(AuctionLabError):
    """Instance-generator parameters failed validation."""


class ConfigError(AuctionLabError):
    """Experiment configuration failed schema validation."""


class ValidationError(AuctionLabError):
    """A hypergraph edge list failed validation."""


class NegativeWeightError(ValidationError):
    """An edge carries a negative weight."""


class DuplicateEdgeError(ValidationError):
    """Two edges share the same member set."""


class EmptyEdgeError(ValidationError):
    """An edge has no members."""
