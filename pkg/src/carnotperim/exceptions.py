"""Exception types shared across the package."""


class CarnotPerimError(Exception):
    """Base class for all package errors."""


class ConformanceError(CarnotPerimError):
    """A point, direction or table does not conform to the group model."""


class UnsupportedModelError(CarnotPerimError):
    """The group model is outside the exact-arithmetic range (step > 2)."""


class GaugeDefinitionError(CarnotPerimError):
    """A gauge definition is inconsistent (bad oracle, bad parameters)."""


class CalibrationError(CarnotPerimError):
    """No candidate in a calibration grid passed validation."""


class RegularityError(CarnotPerimError):
    """A surface fails the horizontal-gradient regularity requirements."""


class BracketError(CarnotPerimError):
    """A root bracket could not be established for a 1-D solve."""


class RegionError(CarnotPerimError):
    """The adaptive parameter region for a surface patch is unusable."""
