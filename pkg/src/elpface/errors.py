"""Exception types shared across the package."""


class ElpFaceError(Exception):
    """Base class for all library errors."""


class InputFormatError(ElpFaceError, ValueError):
    """Raster input has an unsupported channel count, dtype, or bit depth."""


class DimensionError(ElpFaceError, ValueError):
    """An image, region, or window does not fit the requested geometry."""


class BoundaryError(ElpFaceError, ValueError):
    """A sampling neighborhood extends outside the image."""


class CorpusFormatError(ElpFaceError, ValueError):
    """A serialized corpus or model file is malformed or mismatched."""
