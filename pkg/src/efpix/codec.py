"""Byte layouts for the pre-encryption payload and the 580-byte wire message.

Payload (29 to 245 bytes)::

    created_at        9 bytes   big-endian microseconds since the Unix epoch
    sender_alias     16 bytes   UTF-8, right-padded with zero bytes
    internal_address  4 bytes   big-endian
    message        0-216 bytes  raw

Wire message (580 bytes)::

    version 1 | hash 64 | nonce 3 | encrypted blob 256 | signature 256

The payload carries no length field. The message length comes back from the
length-preserving decryption.
"""

from __future__ import annotations

from dataclasses import dataclass

from .crypto_suite import BLOB_SIZE, HASH_SIZE, NONCE_SIZE, SIGNATURE_SIZE
from .errors import (
    AliasTooLong,
    InvalidAlias,
    MalformedMessage,
    MalformedPayload,
    MessageTooLong,
    UnsupportedVersion,
)

VERSION = 0x01

TIMESTAMP_SIZE = 9
ALIAS_SIZE = 16
ADDRESS_SIZE = 4
HEADER_SIZE = TIMESTAMP_SIZE + ALIAS_SIZE + ADDRESS_SIZE
MAX_MESSAGE = 216
MAX_PAYLOAD = HEADER_SIZE + MAX_MESSAGE

HASH_OFFSET = 1
NONCE_OFFSET = HASH_OFFSET + HASH_SIZE
BLOB_OFFSET = NONCE_OFFSET + NONCE_SIZE
SIGNATURE_OFFSET = BLOB_OFFSET + BLOB_SIZE
MESSAGE_SIZE = SIGNATURE_OFFSET + SIGNATURE_SIZE

MAX_TIMESTAMP = (1 << (8 * TIMESTAMP_SIZE)) - 1
MAX_ADDRESS = (1 << (8 * ADDRESS_SIZE)) - 1

assert (HEADER_SIZE, MAX_PAYLOAD, MESSAGE_SIZE) == (29, 245, 580)


def encode_alias(alias: str) -> bytes:
    """UTF-8 bytes of a valid alias (1-16 bytes, no zero byte)."""
    if not isinstance(alias, str):
        raise InvalidAlias(f"alias must be str, not {type(alias).__name__}")
    raw = alias.encode("utf-8")
    if len(raw) > ALIAS_SIZE:
        raise AliasTooLong(f"alias {alias!r} is {len(raw)} bytes, limit {ALIAS_SIZE}")
    if not raw:
        raise InvalidAlias("alias must not be empty")
    if b"\x00" in raw:
        raise InvalidAlias("alias must not contain a zero byte")
    return raw


def is_valid_alias(alias: object) -> bool:
    try:
        encode_alias(alias)  # type: ignore[arg-type]
    except InvalidAlias:
        return False
    return True


@dataclass(frozen=True)
class PlainPayload:
    created_at: int
    sender_alias: str
    internal_address: int
    message: bytes


def serialize_payload(p: PlainPayload) -> bytes:
    alias = encode_alias(p.sender_alias)
    if len(p.message) > MAX_MESSAGE:
        raise MessageTooLong(f"message is {len(p.message)} bytes, limit {MAX_MESSAGE}")
    if not 0 <= p.created_at <= MAX_TIMESTAMP:
        raise ValueError(f"created_at out of 72-bit range: {p.created_at}")
    if not 0 <= p.internal_address <= MAX_ADDRESS:
        raise ValueError(f"internal_address out of 32-bit range: {p.internal_address}")
    return (
        p.created_at.to_bytes(TIMESTAMP_SIZE, "big")
        + alias.ljust(ALIAS_SIZE, b"\x00")
        + p.internal_address.to_bytes(ADDRESS_SIZE, "big")
        + bytes(p.message)
    )


def parse_payload(b: bytes) -> PlainPayload:
    if not HEADER_SIZE <= len(b) <= MAX_PAYLOAD:
        raise MalformedPayload(f"payload is {len(b)} bytes, expected {HEADER_SIZE}-{MAX_PAYLOAD}")
    b = bytes(b)
    alias_field = b[TIMESTAMP_SIZE:TIMESTAMP_SIZE + ALIAS_SIZE]
    raw_alias = alias_field.rstrip(b"\x00")
    if not raw_alias or b"\x00" in raw_alias:
        raise MalformedPayload("alias field is empty or has an embedded zero byte")
    try:
        alias = raw_alias.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedPayload(f"alias is not UTF-8: {exc}") from None
    addr_at = TIMESTAMP_SIZE + ALIAS_SIZE
    return PlainPayload(
        created_at=int.from_bytes(b[:TIMESTAMP_SIZE], "big"),
        sender_alias=alias,
        internal_address=int.from_bytes(b[addr_at:HEADER_SIZE], "big"),
        message=b[HEADER_SIZE:],
    )


@dataclass(frozen=True)
class EncodedMessage:
    hash: bytes
    nonce: bytes
    encrypted_blob: bytes
    signature: bytes
    version: int = VERSION

    def __post_init__(self):
        sizes = (
            ("hash", self.hash, HASH_SIZE),
            ("nonce", self.nonce, NONCE_SIZE),
            ("encrypted_blob", self.encrypted_blob, BLOB_SIZE),
            ("signature", self.signature, SIGNATURE_SIZE),
        )
        for name, value, size in sizes:
            if len(value) != size:
                raise MalformedMessage(f"{name} must be {size} bytes, got {len(value)}")
        if not 0 <= self.version <= 0xFF:
            raise MalformedMessage(f"version must fit one byte, got {self.version}")

    def to_bytes(self) -> bytes:
        return serialize_message(self)


def serialize_message(m: EncodedMessage) -> bytes:
    out = bytes([m.version]) + m.hash + m.nonce + m.encrypted_blob + m.signature
    assert len(out) == MESSAGE_SIZE
    return out


def parse_message(b: bytes) -> EncodedMessage:
    """Structural parse only; hash, PoW and content are checked by the relay."""
    if len(b) != MESSAGE_SIZE:
        raise MalformedMessage(f"message is {len(b)} bytes, expected {MESSAGE_SIZE}")
    b = bytes(b)
    if b[0] != VERSION:
        raise UnsupportedVersion(f"version {b[0]:#04x} is not supported")
    return EncodedMessage(
        version=b[0],
        hash=b[HASH_OFFSET:NONCE_OFFSET],
        nonce=b[NONCE_OFFSET:BLOB_OFFSET],
        encrypted_blob=b[BLOB_OFFSET:SIGNATURE_OFFSET],
        signature=b[SIGNATURE_OFFSET:MESSAGE_SIZE],
    )
