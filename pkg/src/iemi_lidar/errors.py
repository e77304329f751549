"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid sensor, scene, channel or profile configuration."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class OrderingError(ValueError):
    """Receive time precedes emit time."""


class ConflictError(ValueError):
    """Two spoof targets map onto the same ray."""


class InfeasibleError(ValueError):
    """An attack timing cannot be realized."""


class ComparisonError(ValueError):
    """Point clouds from different sensor configurations were compared."""


class UndefinedDistanceError(ValueError):
    """Hausdorff distance requested on an empty point set."""


class FormatError(ValueError):
    """Malformed point cloud file.

    Attributes:
        offset: byte offset of the offending record.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset
