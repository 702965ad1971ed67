"""Sender pipeline and the receive / relay / decode state machine.

All durations and timestamps are integer microseconds.
"""

from __future__ import annotations

import enum
import random
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Optional

from . import crypto_suite as cs
from .codec import (
    MAX_MESSAGE,
    EncodedMessage,
    PlainPayload,
    parse_message,
    parse_payload,
    serialize_payload,
)
from .crypto_suite import PowParams
from .errors import CodecError, MessageTooLong, UnknownRecipient, UnsupportedVersion
from .identity import ContactBook

MICROSECOND = 1
MILLISECOND = 1_000
SECOND = 1_000_000
MINUTE = 60 * SECOND
HOUR = 60 * MINUTE


def now_us() -> int:
    return time.time_ns() // 1_000


@dataclass(frozen=True)
class NodeConfig:
    pow: PowParams = field(default_factory=PowParams)
    max_message_age: int = 24 * HOUR
    future_skew_tolerance: int = 120 * SECOND
    seen_capacity: int = 1 << 20
    seen_retention: int = 24 * HOUR
    relay_delay_max: int = 0
    # dummy messages per second of (simulated or wall) time; 0 disables
    dummy_rate: float = 0.0
    echo_suppression: bool = True

    def __post_init__(self):
        if self.seen_capacity <= 0:
            raise ValueError("seen_capacity must be positive")
        if self.max_message_age <= 0:
            raise ValueError("max_message_age must be positive")
        if self.max_message_age > self.seen_retention:
            raise ValueError("max_message_age must not exceed seen_retention")
        if self.future_skew_tolerance < 0 or self.relay_delay_max < 0 or self.dummy_rate < 0:
            raise ValueError("durations and rates must be non-negative")


class SeenHashStore:
    """Bounded FIFO record of message hashes with time-based expiry."""

    def __init__(self, capacity: int = 1 << 20, retention: int = 24 * HOUR):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.retention = retention
        self._entries: OrderedDict[bytes, int] = OrderedDict()

    def __len__(self):
        return len(self._entries)

    def __contains__(self, h: bytes) -> bool:
        return h in self._entries

    def contains(self, h: bytes) -> bool:
        return h in self._entries

    def insert(self, h: bytes, now: int) -> None:
        if h in self._entries:
            return
        self._entries[h] = now
        while len(self._entries) > self.capacity:
            self._entries.popitem(last=False)

    def evict(self, now: int) -> int:
        """Drop entries whose age has reached the retention period."""
        evicted = 0
        entries = self._entries
        while entries:
            h, first_seen = next(iter(entries.items()))
            if now - first_seen < self.retention:
                break
            entries.popitem(last=False)
            evicted += 1
        return evicted


class Action(enum.Enum):
    RELAY = "RELAY"
    DROP = "DROP"


class DropReason(enum.Enum):
    MALFORMED = "MALFORMED"
    BAD_VERSION = "BAD_VERSION"
    BAD_HASH = "BAD_HASH"
    BAD_POW = "BAD_POW"
    DUPLICATE = "DUPLICATE"


@dataclass(frozen=True)
class RelayDecision:
    action: Action
    drop_reason: Optional[DropReason] = None

    def __post_init__(self):
        if (self.action is Action.DROP) != (self.drop_reason is not None):
            raise ValueError("DROP needs exactly one reason and RELAY none")

    @property
    def relayed(self) -> bool:
        return self.action is Action.RELAY

    def __str__(self):
        return self.action.value if self.drop_reason is None else f"DROP/{self.drop_reason.value}"


RELAY = RelayDecision(Action.RELAY)


def _drop(reason: DropReason) -> RelayDecision:
    return RelayDecision(Action.DROP, reason)


class Authenticity(enum.Enum):
    VERIFIED = "VERIFIED"
    ANONYMOUS = "ANONYMOUS"


class OutcomeKind(enum.Enum):
    NOT_FOR_ME = "NOT_FOR_ME"
    DELIVERED = "DELIVERED"
    REJECTED = "REJECTED"


class RejectReason(enum.Enum):
    BAD_SIGNATURE = "BAD_SIGNATURE"
    TOO_OLD = "TOO_OLD"
    FROM_FUTURE = "FROM_FUTURE"
    # opened with our key but the plaintext is not a valid payload
    MALFORMED_PAYLOAD = "MALFORMED_PAYLOAD"


@dataclass(frozen=True)
class DecodedResult:
    message: bytes
    received_at: int
    created_at: int
    sender_alias: str
    internal_address: int
    authenticity: Authenticity

    def to_json(self) -> dict:
        """Line-oriented JSON form; the message is UTF-8 text when possible, else hex."""
        try:
            text, encoding = self.message.decode("utf-8"), "utf-8"
        except UnicodeDecodeError:
            text, encoding = self.message.hex(), "hex"
        return {
            "message": text,
            "message_encoding": encoding,
            "received_at": self.received_at,
            "created_at": self.created_at,
            "sender_alias": self.sender_alias,
            "internal_address": self.internal_address,
            "authenticity": self.authenticity.value,
        }


@dataclass(frozen=True)
class DecodeOutcome:
    kind: OutcomeKind
    result: Optional[DecodedResult] = None
    reason: Optional[RejectReason] = None

    @property
    def delivered(self) -> bool:
        return self.kind is OutcomeKind.DELIVERED

    def __str__(self):
        if self.kind is OutcomeKind.REJECTED:
            return f"REJECTED({self.reason.value})"
        return self.kind.value


NOT_FOR_ME = DecodeOutcome(OutcomeKind.NOT_FOR_ME)


def _rejected(reason: RejectReason) -> DecodeOutcome:
    return DecodeOutcome(OutcomeKind.REJECTED, reason=reason)


def create_message(
    book: ContactBook,
    recipient_alias: str,
    internal_address: int,
    message: bytes,
    created_at: int,
    pow: PowParams,
    randbytes=None,
) -> EncodedMessage:
    """Build a wire message: payload, sign, encrypt, hash, mine, assemble.

    ``randbytes`` feeds the encryption padding; leave it ``None`` outside of
    simulations and fixtures.
    """
    contact = book.lookup_sender(recipient_alias)
    if contact is None:
        raise UnknownRecipient(f"no contact with alias {recipient_alias!r}")
    if len(message) > MAX_MESSAGE:
        raise MessageTooLong(f"message is {len(message)} bytes, limit {MAX_MESSAGE}")
    payload = serialize_payload(
        PlainPayload(created_at, contact.my_alias_for_them, internal_address, bytes(message))
    )
    signature = cs.sign(book.own_keypair.private_key, payload)
    blob = cs.encrypt(contact.their_public_key, payload, randbytes)
    h = cs.hash_message(blob, signature)
    nonce = cs.mine_nonce(h, pow)
    return EncodedMessage(hash=h, nonce=nonce, encrypted_blob=blob, signature=signature)


class RelayNode:
    """One node's protocol state: contact book, config, neighbours and seen store.

    ``on_receive`` calls are serialised by an internal lock, so the node can
    be shared between threads.
    """

    def __init__(
        self,
        book: ContactBook,
        config: Optional[NodeConfig] = None,
        neighbors: Iterable[Hashable] = (),
        rng: Optional[random.Random] = None,
    ):
        self.book = book
        self.config = config or NodeConfig()
        self.neighbors = set(neighbors)
        self.rng = rng or random.Random()
        self.seen = SeenHashStore(self.config.seen_capacity, self.config.seen_retention)
        self._lock = threading.RLock()

    def on_receive(self, wire: bytes, received_at: int) -> tuple[RelayDecision, Optional[DecodeOutcome]]:
        try:
            msg = parse_message(wire)
        except UnsupportedVersion:
            return _drop(DropReason.BAD_VERSION), None
        except Exception:
            return _drop(DropReason.MALFORMED), None

        if cs.hash_message(msg.encrypted_blob, msg.signature) != msg.hash:
            return _drop(DropReason.BAD_HASH), None
        if not cs.pow_check(msg.hash, msg.nonce, self.config.pow):
            return _drop(DropReason.BAD_POW), None

        with self._lock:
            self.seen.evict(received_at)
            if self.seen.contains(msg.hash):
                return _drop(DropReason.DUPLICATE), None
            self.seen.insert(msg.hash, received_at)

        return RELAY, self._decode(msg, received_at)

    def _decode(self, msg: EncodedMessage, received_at: int) -> DecodeOutcome:
        book = self.book
        try:
            plaintext = cs.decrypt(book.own_keypair.private_key, msg.encrypted_blob)
        except Exception:
            plaintext = None
        if plaintext is None:
            return NOT_FOR_ME
        try:
            payload = parse_payload(plaintext)
        except CodecError:
            return _rejected(RejectReason.MALFORMED_PAYLOAD)

        contact = book.lookup_sender(payload.sender_alias)
        if contact is None:
            authenticity = Authenticity.ANONYMOUS
        elif cs.verify(contact.their_public_key, plaintext, msg.signature):
            authenticity = Authenticity.VERIFIED
        else:
            return _rejected(RejectReason.BAD_SIGNATURE)

        cfg = self.config
        if received_at - payload.created_at >= cfg.max_message_age:
            return _rejected(RejectReason.TOO_OLD)
        if payload.created_at > received_at + cfg.future_skew_tolerance:
            return _rejected(RejectReason.FROM_FUTURE)

        return DecodeOutcome(
            OutcomeKind.DELIVERED,
            DecodedResult(
                message=payload.message,
                received_at=received_at,
                created_at=payload.created_at,
                sender_alias=payload.sender_alias,
                internal_address=payload.internal_address,
                authenticity=authenticity,
            ),
        )

    def relay_targets(self, arrival_link: Optional[Hashable] = None) -> set:
        targets = set(self.neighbors)
        if arrival_link is not None and self.config.echo_suppression:
            targets.discard(arrival_link)
        return targets

    def mark_originated(self, message_hash: bytes, now: int) -> None:
        """Record a locally emitted message so its echoes are dropped as duplicates."""
        with self._lock:
            self.seen.evict(now)
            self.seen.insert(message_hash, now)

    def originate(
        self,
        recipient_alias: str,
        internal_address: int,
        message: bytes,
        created_at: int,
        randbytes=None,
    ) -> EncodedMessage:
        msg = create_message(
            self.book, recipient_alias, internal_address, message, created_at, self.config.pow, randbytes
        )
        self.mark_originated(msg.hash, created_at)
        return msg

    def make_dummy(self, now: int, pow: Optional[PowParams] = None) -> EncodedMessage:
        """A wire-valid message encrypted to a throwaway key nobody holds.

        Does not touch the seen store; call :meth:`mark_originated` when
        the dummy is actually sent.
        """
        if self.config.dummy_rate <= 0:
            raise ValueError("dummy traffic is disabled (dummy_rate is 0)")
        rng = self.rng
        throwaway = cs.generate_keypair(self.book.own_keypair.suite, rng.randbytes(cs.SEED_SIZE))
        alias = rng.randbytes(rng.randint(4, 8)).hex()
        body = rng.randbytes(rng.randint(0, MAX_MESSAGE))
        payload = serialize_payload(PlainPayload(now, alias, rng.getrandbits(32), body))
        signature = cs.sign(throwaway.private_key, payload)
        blob = cs.encrypt(throwaway.public_key, payload, rng.randbytes)
        h = cs.hash_message(blob, signature)
        nonce = cs.mine_nonce(h, pow or self.config.pow)
        return EncodedMessage(hash=h, nonce=nonce, encrypted_blob=blob, signature=signature)

    def sample_relay_delay(self) -> int:
        if self.config.relay_delay_max <= 0:
            return 0
        return self.rng.randint(0, self.config.relay_delay_max)
