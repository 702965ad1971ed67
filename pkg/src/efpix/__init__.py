"""Encrypted flood relay protocol: codec, crypto suites, relay node, simulator and daemon."""

from .codec import EncodedMessage, PlainPayload, parse_message, parse_payload, serialize_message, serialize_payload
from .crypto_suite import CipherSuiteId, KeyPair, PowParams, generate_keypair
from .identity import Contact, ContactBook, load_book, save_book
from .relay import (
    Authenticity,
    DecodedResult,
    DecodeOutcome,
    DropReason,
    NodeConfig,
    OutcomeKind,
    RejectReason,
    RelayDecision,
    RelayNode,
    SeenHashStore,
    create_message,
)
from .simulator import (
    NodeRole,
    ScenarioEvent,
    SimConfig,
    Topology,
    assert_observer_blindness,
    run_choke_point,
    run_replay_attack,
    run_simulation,
)

__version__ = "0.1.0"
