"""Exception types shared across the pipeline."""


class FavmapError(Exception):
    """Base class for all pipeline errors."""


class InputFormatError(FavmapError):
    """A file does not conform to one of the documented formats."""


class DataError(FavmapError):
    """Inputs are well-formed but violate a contract (wrong shape, missing
    tiles, degenerate class distribution, ...)."""
