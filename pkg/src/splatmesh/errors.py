"""Exception types shared across the package."""


class SplatMeshError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SplatMeshError, ValueError):
    """A numeric input violates an operation's precondition."""


class ConfigurationError(SplatMeshError, ValueError):
    """A configuration value or profile is missing or inconsistent."""


class CapacityError(SplatMeshError):
    """More feature-computation units were requested than the mesh has columns."""


class HeightError(SplatMeshError):
    """A task graph has more kernels than a mesh column can host."""


class ParseError(SplatMeshError):
    """A Gaussian file could not be decoded.

    ``offset`` is the byte position at which decoding failed.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset
