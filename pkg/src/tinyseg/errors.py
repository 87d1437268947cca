"""Exception hierarchy for the toolkit.

Every failure mode callers are expected to branch on gets its own class;
generic misuse (wrong argument types etc.) raises the usual builtins.
"""


class TinysegError(Exception):
    """Base class for all toolkit errors."""


# --- FITS ---------------------------------------------------------------

class FitsError(TinysegError):
    pass


class MissingMagic(FitsError):
    """Input does not start with a 'SIMPLE  =' card."""


class MissingEnd(FitsError):
    """A header ran out of bytes before an END card."""


class UnsupportedBitpix(FitsError):
    pass


class TruncatedData(FitsError):
    """Data block shorter than the header-declared size."""


class NaxisNot2(FitsError):
    """Primary HDU is not a displayable 2-D image."""


# --- NPY ----------------------------------------------------------------

class NpyError(TinysegError):
    pass


class BadMagic(NpyError):
    pass


class UnsupportedDtype(NpyError):
    pass


class FortranOrderUnsupported(NpyError):
    pass


class ShapeNot2D(NpyError):
    pass


class TruncatedPayload(NpyError):
    pass


# --- statistics / scaling -----------------------------------------------

class AllNonFinite(TinysegError):
    """No finite pixel to compute statistics from."""


class TooFewPixels(TinysegError):
    """Fewer finite samples than the algorithm's minimum."""


# --- mask operations ------------------------------------------------------

class ThresholdOutOfRange(TinysegError):
    pass


class DimensionMismatch(TinysegError):
    pass


class OutOfBounds(TinysegError):
    pass


# --- pipeline -------------------------------------------------------------

class UnknownStage(TinysegError):
    pass


class ValueOutOfDomain(TinysegError):
    pass


class NoSourceLoaded(TinysegError):
    pass


# --- detectors ------------------------------------------------------------

class DetectorError(TinysegError):
    pass


class WindowTooLarge(DetectorError):
    pass


class PrecomputedMissing(DetectorError):
    pass


class RemoteUnreachable(DetectorError):
    pass


class RemoteBadResponse(DetectorError):
    pass


# --- wire formats ----------------------------------------------------------

class FrameError(TinysegError):
    pass


class MalformedRle(TinysegError):
    pass


class UnparsableFile(TinysegError):
    """Upload is neither a readable FITS nor a readable NPY image."""
