"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: usage problems exit 2, malformed or
stage-mismatched files exit 3, numerical/training failures exit 4.
"""


class ShapeError(ValueError):
    """An array has the wrong shape or dimension for the requested operation."""


class FormatError(ValueError):
    """A file does not conform to its declared on-disk format."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        loc = ""
        if path is not None:
            loc = f"{path}"
            if line is not None:
                loc += f":{line}"
            loc = f" [{loc}]"
        super().__init__(f"{message}{loc}")
        self.path = path
        self.line = line


class TrainingError(RuntimeError):
    """Training diverged or was asked to run on unusable data."""


class NumericalError(RuntimeError):
    """A numerical routine failed to converge or produced invalid values."""


class StateError(RuntimeError):
    """An operation was called out of order (e.g. backward before forward)."""
