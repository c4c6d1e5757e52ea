"""Exception types raised across the package.

Everything derives from IntonationError so callers (and the CLI) can catch
one base class. The class name is the stable, machine-readable error kind;
the message carries context such as paths and line numbers.
"""

from __future__ import annotations


class IntonationError(Exception):
    """Base class for all errors raised by this package."""


# audio ingest and clip handling

class BadMagic(IntonationError):
    """File is not the container format it claims to be."""


class UnsupportedEncoding(IntonationError):
    """WAV payload is not 16-bit PCM."""


class ChannelsUnsupported(IntonationError):
    """Multi-channel audio without an explicit downmix request."""


class WrongSampleRate(IntonationError):
    """Sample rate differs from what the operation requires."""


class EmptyAudio(IntonationError):
    """Operation needs a non-empty signal."""


class InvalidClip(IntonationError):
    """Clip breaks its fixed-rate / fixed-length invariants."""


# framing and low-level features

class SignalTooShort(IntonationError):
    """Signal shorter than one analysis frame."""


class BadFrameLength(IntonationError):
    """Frame has the wrong number of samples for this operation."""


class EmptyFrame(IntonationError):
    pass


class FrameTooShortForPitch(IntonationError):
    """Frame cannot hold two periods of the lowest trackable pitch."""


# tensor container files

class NonFiniteValue(IntonationError):
    """NaN or infinity where only finite values are allowed."""


class UnsupportedVersion(IntonationError):
    pass


class UnsupportedDtype(IntonationError):
    pass


class TruncatedPayload(IntonationError):
    """File ends before the header-declared payload does."""


class ShapeError(IntonationError):
    """Array rank or dimensions outside what the operation accepts."""


class MissingEmbedding(IntonationError):
    """Record has no embedding path, or the file is absent."""


# model and layers

class DimMismatch(IntonationError):
    """Input width does not match the layer or model dimension."""


class LabelOutOfRange(IntonationError):
    pass


class NoForwardRecorded(IntonationError):
    """backward() called with no cached forward activations."""


class VariantInputMissing(IntonationError):
    """Model variant needs an input stream that was not provided."""


# training

class NonFiniteGradient(IntonationError):
    pass


class NonFiniteLoss(IntonationError):
    pass


class EmptyDataset(IntonationError):
    pass


# manifests, splits, evaluation

class MalformedRecord(IntonationError):
    """Manifest line that does not parse; message includes the line number."""


class DuplicateId(IntonationError):
    pass


class UnknownDiscipline(IntonationError):
    pass


class BadRatios(IntonationError):
    """Split ratios must be positive and sum to 1."""


class InsufficientRecords(IntonationError):
    pass


class MissingFeature(IntonationError):
    """Record lacks a feature stream the model variant requires."""
