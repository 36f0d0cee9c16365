"""Exception types shared across the codecs."""


class CodecError(Exception):
    """Base class for encode/decode failures."""


class TruncatedStreamError(CodecError):
    """A stream ended before the decoder could finish."""


class DeserializationError(CodecError):
    """A serialized blob has a malformed header or inconsistent framing."""


class CorruptionError(CodecError):
    """Decoded content violates an integrity check (e.g. final-state mismatch)."""


class CapabilityError(CodecError):
    """The requested operation is not supported by this backend."""
