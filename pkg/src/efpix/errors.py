"""Exception hierarchy.

Everything raised by the package derives from :class:`EfpixError`. Input
validation failures additionally derive from :class:`ValueError` so callers
that only care about "bad argument" can catch that.
"""


class EfpixError(Exception):
    """Base class for all package errors."""


# crypto

class KeyGenError(EfpixError):
    pass


class PlaintextTooLong(EfpixError, ValueError):
    pass


class PlaintextTooShort(EfpixError, ValueError):
    pass


class InvalidLength(EfpixError, ValueError):
    """A fixed-size field had the wrong number of bytes."""


class SignError(EfpixError):
    pass


class NonceExhausted(EfpixError):
    pass


# codec

class CodecError(EfpixError, ValueError):
    pass


class InvalidAlias(CodecError):
    pass


class AliasTooLong(InvalidAlias):
    pass


class MessageTooLong(CodecError):
    pass


class MalformedPayload(CodecError):
    pass


class MalformedMessage(CodecError):
    pass


class UnsupportedVersion(CodecError):
    pass


# identity

class _LookupMessage(KeyError):
    # KeyError.__str__ would repr() the message
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class DuplicateAlias(EfpixError, _LookupMessage):
    pass


class KeystoreCorrupt(EfpixError):
    pass


class KeystoreNotFound(EfpixError, FileNotFoundError):
    pass


# relay

class UnknownRecipient(EfpixError, _LookupMessage):
    pass


# simulator

class ScenarioError(EfpixError, ValueError):
    pass


# transport

class FramingError(EfpixError, ConnectionError):
    """Protocol violation or short read on a framed stream."""
