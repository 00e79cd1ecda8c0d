"""Exception types shared across the package."""


class CryomechError(Exception):
    """Base class for all package-specific errors."""


class PreconditionError(CryomechError):
    """A physical validity condition for a protocol or reduction is violated."""


class TruncationError(PreconditionError):
    """Population has leaked into the top levels of a truncated mode."""


class DegenerateSteadyStateError(CryomechError):
    """The Liouvillian null space is empty or not one-dimensional."""


class VerificationError(CryomechError):
    """An oracle cross-check failed outside its declared tolerance."""


class ConfigError(CryomechError):
    """A scenario configuration file is malformed or incomplete."""
