"""Exception taxonomy shared across the codec.

Exit-code mapping used by the CLI:
  2 -> UnsupportedMode
  3 -> data corruption (MalformedStream, HuffmanDecodeError, CorruptPayload,
       CorruptTableSet, VersionMismatch, TableSetMismatch)
  4 -> verification failure
"""


class RompError(Exception):
    """Base class for all errors raised by this package."""


class UnsupportedMode(RompError):
    """Input is a JPEG mode outside baseline sequential 8-bit Huffman scope.

    Callers should pass such files through unrecompressed.
    """


class MalformedStream(RompError):
    """Input bytes are not a well-formed JPEG (truncated marker, bad length...)."""


class HuffmanDecodeError(MalformedStream):
    """A bit pattern in an entropy-coded segment matches no code in its table."""


class CoefficientOutOfRange(RompError):
    """A coefficient (or DC difference) cannot be represented: amplitude needs
    more than 15 bits, or its runsize has no code in the file's own table."""


class TableSetMismatch(RompError):
    """Container references a table set id different from the loaded set."""


class CorruptPayload(RompError):
    """A ROMP container payload cannot be decoded consistently."""


class VersionMismatch(RompError):
    """Serialized table-set version is not supported by this build."""


class CorruptTableSet(RompError):
    """Table-set file failed its content hash or structural validation."""


class InsufficientSamples(RompError):
    """Not enough (or degenerate) energy samples to fit bucket boundaries."""


class NotCandidate(RompError):
    """Coefficient is not a thresholding candidate (SIZE != 1)."""


class ZeroBaseline(RompError):
    """Compression ratio requested with a zero-byte baseline size."""


class DimensionMismatch(RompError):
    """Metric inputs have different shapes."""


class VerificationFailure(RompError):
    """A --verify style check found a mismatch."""
