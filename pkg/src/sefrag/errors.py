"""Exception types shared across the package.

Grouped here because most of them cross module boundaries: the container
layer re-raises engine errors, the CLI maps every class onto a stable
exit code, and tests assert on exact types.
"""


class SefragError(Exception):
    """Base class for all sefrag errors."""


class FormatError(SefragError):
    """Malformed container, wire frame, or stream structure."""


class NotDicom(FormatError):
    """Input lacks the DICM marker expected at offset 128."""


class TooShort(FormatError):
    """Input shorter than the requested fixed-length header."""


class LengthMismatch(FormatError):
    """Public/private stream lengths are mutually inconsistent."""


class IntegrityFailure(SefragError):
    """Recovered content does not match its stored digest.

    ``attempted`` holds the reconstructed byte stream so callers can
    inspect what a failed recovery would have produced.
    """

    def __init__(self, message: str, attempted: bytes | None = None):
        super().__init__(message)
        self.attempted = attempted


class BadPadding(SefragError):
    """Private-stream decryption produced invalid padding (wrong key or
    corrupted ciphertext)."""


class PairMismatch(SefragError):
    """Public and private containers carry different file ids."""


class EmptyPassphrase(SefragError):
    """Key derivation was given an empty passphrase."""


class EmptyInput(SefragError):
    """Entropy is undefined for zero-length input."""


class NotFound(SefragError):
    """No blob stored under the requested id."""


class CorruptBlob(SefragError):
    """Stored blob bytes no longer hash to their id."""


class BackendUnavailable(SefragError):
    """Storage backend cannot be reached."""


class SameBackend(SefragError):
    """Public and private fragments may not share a backend."""


class BindError(SefragError):
    """Blob server could not bind its address."""


class NotOwner(SefragError):
    """Policy mutation attempted by a party other than the owner."""


class UnknownRecord(SefragError):
    """No placement exists for the requested record id."""
