"""Exception hierarchy shared by all selfcore modules."""


class SelfcoreError(Exception):
    """Base class for every error raised by this package."""


# trace and weight files
class TraceFormatError(SelfcoreError, ValueError):
    pass


class BadMagic(TraceFormatError):
    pass


class VersionUnsupported(TraceFormatError):
    pass


class TruncatedPayload(TraceFormatError):
    pass


class NonFiniteValue(SelfcoreError, ValueError):
    pass


class DimensionMismatch(SelfcoreError, ValueError):
    pass


class PoolTooSmall(SelfcoreError, ValueError):
    pass


# graph construction
class TauOutOfRange(SelfcoreError, ValueError):
    pass


# matching
class ReferenceSetMismatch(SelfcoreError, ValueError):
    pass


class EmptyMatrix(SelfcoreError, ValueError):
    pass


class ChainTooShort(SelfcoreError, ValueError):
    pass


# persistence
class IncompleteFamily(SelfcoreError, ValueError):
    pass


class TooFewFamilies(SelfcoreError, ValueError):
    pass


# statistics
class NoSelfMembers(SelfcoreError, ValueError):
    pass


class NoTaskMembers(SelfcoreError, ValueError):
    pass


class TooFewSamples(SelfcoreError, ValueError):
    pass


# curriculum
class BadDirection(SelfcoreError, ValueError):
    pass


# oracles / generator
class TooLarge(SelfcoreError, ValueError):
    pass


class InfeasibleSpec(SelfcoreError, ValueError):
    pass


class ConfigError(SelfcoreError, ValueError):
    pass
