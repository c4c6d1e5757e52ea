class ExporterError(Exception):
    """Base class for everything this package raises on purpose."""


class CheckpointUnavailable(ExporterError):
    """The encoder checkpoint could not be loaded."""


class ClipUnreadable(ExporterError):
    """One clip's audio could not be read or has the wrong format."""


class ManifestError(ExporterError):
    """The manifest file is malformed."""
