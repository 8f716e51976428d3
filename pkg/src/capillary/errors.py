"""Exception types raised across the package."""


class DomainError(ValueError):
    """A point lies outside the model domain or off a required boundary."""


class GeometryError(ValueError):
    """Degenerate or inconsistent geometric input (immersion, frame, mesh)."""


class InfeasibleSurfaceError(ValueError):
    """A requested test surface cannot be constructed."""


class HypothesisError(ValueError):
    """An operation was applied outside the setting it is valid for."""


class ConfigError(ValueError):
    """Invalid scenario configuration; ``line`` points into the source file."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
