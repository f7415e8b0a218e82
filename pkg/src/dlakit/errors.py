"""Exception and warning types shared across the toolkit."""


class DLAError(Exception):
    """Base class for data errors raised by dlakit."""


class MalformedXml(DLAError):
    pass


class UnsupportedSchema(DLAError):
    pass


class DimensionMismatch(DLAError, ValueError):
    pass


class LabelOutOfRange(DLAError, ValueError):
    pass


class NonPositiveAnchor(DLAError, ValueError):
    pass


class DegenerateBaseline(DLAError, ValueError):
    pass


class EmptyMask(DLAError, ValueError):
    pass


class EmptyInput(DLAError, ValueError):
    pass


class EmptyAccumulator(DLAError, ValueError):
    pass


class DegeneratePolygonWarning(UserWarning):
    """Emitted when a zero-area polygon is rasterized to an empty mask."""
