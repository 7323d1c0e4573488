"""Exception types shared across the package."""


class TorusSpdeError(Exception):
    """Base class for all package-specific errors."""


class InvalidFieldError(TorusSpdeError, ValueError):
    """A coefficient map violates the reality or mean-zero constraints."""


class AliasingError(TorusSpdeError, ValueError):
    """Requested grid resolution cannot hold every retained mode."""


class ContractViolationError(TorusSpdeError, ValueError):
    """An operator precondition (e.g. solenoidal input) does not hold."""


class ConfigError(TorusSpdeError, ValueError):
    """A configuration document is malformed or contains unknown keys."""


class SchemeMismatchError(TorusSpdeError, ValueError):
    """A record produced by one time-stepping scheme was fed to a
    postprocessor that is only valid for another."""
