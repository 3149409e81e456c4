"""Exception types shared across the library."""


class IllumLocError(Exception):
    """Base class for all library errors."""


class DegenerateProjection(IllumLocError):
    """Homogeneous scale too close to zero to divide by."""


class EmptyView(IllumLocError):
    """A rendered view hit no geometry at all."""


class BorderViolation(IllumLocError):
    """Keypoint too close to the image border to describe."""


class ClusterTooSmall(IllumLocError):
    """Cluster has too few members for the requested fit."""


class DimensionMismatch(IllumLocError):
    """Descriptor dimension does not match the model."""


class EmptyTrainingSet(IllumLocError):
    """No training data survived the filters."""


class TooFewClasses(IllumLocError):
    """Forest training needs at least two classes."""


class DegenerateConfiguration(IllumLocError):
    """2D-3D correspondences do not constrain a pose."""


class LengthMismatch(IllumLocError):
    """Paired sequences have different lengths."""


class ManifestError(IllumLocError):
    """Base class for external-dataset manifest problems."""


class ManifestParseError(ManifestError):
    """Manifest file is not valid JSON or has the wrong shape."""


class MissingImage(ManifestError):
    """Manifest references an image file that does not exist."""


class MalformedMatrix(ManifestError):
    """Manifest entry carries a projection matrix that is not 12 numbers."""


class ConfigError(IllumLocError):
    """Pipeline configuration is invalid; message names file and field."""
