"""Exception hierarchy shared by all modules."""


class ShapeCurrentsError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(ShapeCurrentsError, ValueError):
    """Input violates a documented invariant."""


class ParseError(ShapeCurrentsError):
    """A geometry file could not be parsed.

    ``line`` is 1-based when known.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class TooFewPoints(ValidationError):
    pass


class DegenerateSegment(ValidationError):
    pass


class DegenerateFace(ValidationError):
    pass


class IndexOutOfRange(ValidationError):
    pass


class NonOrthogonalRotation(ValidationError):
    pass


class OrientationError(ValidationError):
    """A mesh declared closed is not a consistently oriented closed surface."""


class DimensionMismatch(ShapeCurrentsError, ValueError):
    pass


class EmptySample(ShapeCurrentsError, ValueError):
    pass


class DegeneratePointCloud(ShapeCurrentsError, ValueError):
    pass


class EmptyCluster(ShapeCurrentsError, ValueError):
    pass


class InvalidK(ShapeCurrentsError, ValueError):
    pass


class EmptyGram(ShapeCurrentsError, ValueError):
    pass


class SingleCluster(ShapeCurrentsError, ValueError):
    pass


class LengthMismatch(ShapeCurrentsError, ValueError):
    pass


class BadFamilyParams(ValidationError):
    pass


class SpecError(ValidationError):
    """Scenario specification does not match the expected schema."""


class EmptyInput(ShapeCurrentsError):
    pass


class EmptyBand(ShapeCurrentsError):
    pass


class MissingMetadataKey(ShapeCurrentsError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "missing metadata key"
