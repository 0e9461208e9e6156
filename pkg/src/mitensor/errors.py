"""Exception hierarchy shared by every module."""


class MitensorError(Exception):
    """Base class for all errors raised by this package."""


class FileNotReadable(MitensorError):
    pass


class UnsupportedFormat(MitensorError):
    pass


class CorruptImage(MitensorError):
    pass


class EmptyDataset(MitensorError):
    pass


class InsufficientData(MitensorError):
    pass


class DimensionMismatch(MitensorError, ValueError):
    pass


class SingleClassData(MitensorError, ValueError):
    pass


class ClassTooSmall(MitensorError):
    pass


class EmptyTestSet(MitensorError):
    pass


class MissingClass(MitensorError):
    pass


class VersionMismatch(MitensorError):
    pass


class FeatureSelectionMismatch(MitensorError):
    pass
