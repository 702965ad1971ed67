"""Seeded discrete-event simulator for flood relaying.

Every node is a :class:`~efpix.relay.RelayNode`; the simulator only moves
frames along links and keeps score. A run is a pure function of
``(topology, events, seed, config)``: all randomness comes from one
``random.Random(seed)``, neighbour sets are iterated in sorted order, and
ties in the event queue break on insertion sequence.

Time is integer microseconds on the simulated clock.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import heapq
import io
import itertools
import json
import random
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

from . import crypto_suite as cs
from .codec import MESSAGE_SIZE, is_valid_alias, parse_message
from .config import node_config_from_json, node_config_to_json
from .crypto_suite import CipherSuiteId, PowParams
from .errors import CodecError, ScenarioError
from .identity import Contact, ContactBook
from .relay import (
    MILLISECOND,
    SECOND,
    NodeConfig,
    OutcomeKind,
    RejectReason,
    RelayNode,
)


class NodeRole(enum.Enum):
    HONEST = "honest"
    # processes traffic but relays nothing
    DROPPER = "dropper"
    # relays honestly and re-broadcasts every new message after replay_delays
    REPLAYER = "replayer"
    # relays honestly and logs every frame on its links
    OBSERVER = "observer"


@dataclass(frozen=True)
class Latency:
    """Per-transmission link latency, uniform on ``[low, high]`` microseconds."""

    low: int = MILLISECOND
    high: Optional[int] = None

    def __post_init__(self):
        if self.high is None:
            object.__setattr__(self, "high", self.low)
        if not 0 <= self.low <= self.high:
            raise ScenarioError(f"bad latency range [{self.low}, {self.high}]")

    def sample(self, rng: random.Random) -> int:
        if self.low == self.high:
            return self.low
        return rng.randint(self.low, self.high)


@dataclass(frozen=True)
class NodeSpec:
    id: str
    role: NodeRole = NodeRole.HONEST
    # NodeConfig field overrides, e.g. {"max_message_age": 60 * SECOND}
    config: Mapping[str, Any] = field(default_factory=dict)
    replay_delays: tuple[int, ...] = ()
    online: bool = True


@dataclass(frozen=True)
class Edge:
    a: str
    b: str
    latency: Latency = Latency()

    @property
    def key(self) -> frozenset:
        return frozenset((self.a, self.b))


@dataclass
class Topology:
    nodes: list[NodeSpec]
    edges: list[Edge]
    # "all": every node knows every other node, alias = node id.
    # Otherwise a list of (a, b) pairs that know each other.
    contacts: Union[str, list[tuple[str, str]]] = "all"

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate node ids")
        for node_id in ids:
            if not is_valid_alias(node_id):
                raise ScenarioError(f"node id {node_id!r} is not a valid alias (1-16 UTF-8 bytes)")
        known = set(ids)
        seen_edges = set()
        for e in self.edges:
            if e.a == e.b:
                raise ScenarioError(f"self-loop on {e.a!r}")
            if e.a not in known or e.b not in known:
                raise ScenarioError(f"edge {e.a!r}-{e.b!r} references an unknown node")
            if e.key in seen_edges:
                raise ScenarioError(f"duplicate edge {e.a!r}-{e.b!r}")
            seen_edges.add(e.key)
        if self.contacts != "all":
            for a, b in self.contacts:
                if a not in known or b not in known:
                    raise ScenarioError(f"contact pair {a!r}-{b!r} references an unknown node")

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[tuple[Any, Any]],
        nodes: Iterable[Any] = (),
        latency: Latency = Latency(),
        roles: Optional[Mapping[str, NodeRole]] = None,
    ) -> "Topology":
        """Build from plain pairs; node ids are converted with ``str``."""
        roles = roles or {}
        pairs = [(str(a), str(b)) for a, b in edges]
        order = list(dict.fromkeys([str(n) for n in nodes] + [x for p in pairs for x in p]))
        return cls(
            nodes=[NodeSpec(n, roles.get(n, NodeRole.HONEST)) for n in order],
            edges=[Edge(a, b, latency) for a, b in pairs],
        )

    @property
    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    def spec(self, node_id: str) -> NodeSpec:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise ScenarioError(f"unknown node {node_id!r}")

    def with_role(self, node_id: str, role: NodeRole, **changes) -> "Topology":
        self.spec(node_id)
        nodes = [dataclasses.replace(n, role=role, **changes) if n.id == node_id else n for n in self.nodes]
        return Topology(nodes, list(self.edges), self.contacts)

    def adjacency(self, exclude: Iterable[str] = ()) -> dict[str, set[str]]:
        skip = set(exclude)
        adj: dict[str, set[str]] = {n: set() for n in self.node_ids if n not in skip}
        for e in self.edges:
            if e.a in skip or e.b in skip:
                continue
            adj[e.a].add(e.b)
            adj[e.b].add(e.a)
        return adj


def reachable(topology: Topology, source: str, exclude: Iterable[str] = ()) -> set[str]:
    """Nodes reachable from ``source`` over static edges, skipping ``exclude``."""
    adj = topology.adjacency(exclude)
    if source not in adj:
        return set()
    seen = {source}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


class EventKind(enum.Enum):
    SEND = "send"
    LINK_DOWN = "link_down"
    LINK_UP = "link_up"
    NODE_JOIN = "node_join"
    NODE_LEAVE = "node_leave"


@dataclass(frozen=True)
class ScenarioEvent:
    at: int
    kind: EventKind
    node: str
    # SEND: recipient alias; LINK_*: other endpoint
    peer: Optional[str] = None
    message: bytes = b""
    internal_address: int = 0

    @classmethod
    def send(cls, at: int, src: str, to_alias: str, message: bytes, internal_address: int = 0):
        return cls(at, EventKind.SEND, src, to_alias, bytes(message), internal_address)

    @classmethod
    def link_down(cls, at: int, a: str, b: str):
        return cls(at, EventKind.LINK_DOWN, a, b)

    @classmethod
    def link_up(cls, at: int, a: str, b: str):
        return cls(at, EventKind.LINK_UP, a, b)

    @classmethod
    def node_join(cls, at: int, node: str):
        return cls(at, EventKind.NODE_JOIN, node)

    @classmethod
    def node_leave(cls, at: int, node: str):
        return cls(at, EventKind.NODE_LEAVE, node)


def _default_sim_node_config() -> NodeConfig:
    return NodeConfig(pow=PowParams(8))


@dataclass(frozen=True)
class SimConfig:
    suite: CipherSuiteId = CipherSuiteId.MOCK_FIXED_SIZE
    # applied to every node before per-node overrides; PoW is 8 bits to keep runs quick
    node: NodeConfig = field(default_factory=_default_sim_node_config)
    # nodes with dummy_rate > 0 emit dummies while the clock is below this
    dummy_until: int = 0
    record_receipts: bool = False
    max_events: int = 10_000_000


@dataclass
class MessageRecord:
    index: int
    sender: str
    recipient: str
    sent_at: int
    hash: str
    delivered: bool = False
    delivered_at: Optional[int] = None
    transmissions: int = 0
    # RELAY decisions per node; the sender's origination counts as its relay
    relays: dict[str, int] = field(default_factory=dict)
    # first decode outcome per node
    outcomes: dict[str, str] = field(default_factory=dict)

    @property
    def latency(self) -> Optional[int]:
        return None if self.delivered_at is None else self.delivered_at - self.sent_at

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["latency"] = self.latency
        return d


@dataclass
class Receipt:
    time: int
    node: str
    link: Optional[str]
    hash: str
    decision: str
    outcome: Optional[str]


@dataclass
class ObservedFrame:
    time: int
    sender: str
    receiver: str
    direction: str
    frame: bytes

    def to_dict(self) -> dict:
        return {
            "time": self.time,
            "link": [self.sender, self.receiver],
            "direction": self.direction,
            "frame": self.frame.hex(),
        }


@dataclass
class ReplayRecord:
    at: int
    node: str
    hash: str
    targets: list[str]


@dataclass
class SimMetrics:
    messages: list[MessageRecord] = field(default_factory=list)
    transmissions: int = 0
    duplicate_drops: int = 0
    drops: dict[str, int] = field(default_factory=dict)
    relay_count: dict[str, int] = field(default_factory=dict)
    observer_log: dict[str, list[ObservedFrame]] = field(default_factory=dict)
    dummies_sent: int = 0
    dummy_transmissions: int = 0
    frames_lost: int = 0
    misdeliveries: int = 0
    replays: list[ReplayRecord] = field(default_factory=list)
    receipts: list[Receipt] = field(default_factory=list)
    events_processed: int = 0
    end_time: int = 0

    def message_by_hash(self, h: str) -> Optional[MessageRecord]:
        for m in self.messages:
            if m.hash == h:
                return m
        return None

    def to_dict(self) -> dict:
        return {
            "messages": [m.to_dict() for m in self.messages],
            "transmissions": self.transmissions,
            "duplicate_drops": self.duplicate_drops,
            "drops": dict(sorted(self.drops.items())),
            "relay_count": dict(sorted(self.relay_count.items())),
            "observer_log": {
                k: [f.to_dict() for f in v] for k, v in sorted(self.observer_log.items())
            },
            "dummies_sent": self.dummies_sent,
            "dummy_transmissions": self.dummy_transmissions,
            "frames_lost": self.frames_lost,
            "misdeliveries": self.misdeliveries,
            "replays": [dataclasses.asdict(r) for r in self.replays],
            "receipts": [dataclasses.asdict(r) for r in self.receipts],
            "events_processed": self.events_processed,
            "end_time": self.end_time,
        }

    def to_json(self, **extra) -> str:
        doc = self.to_dict()
        doc.update(extra)
        return json.dumps(doc, sort_keys=True, indent=2)

    def to_csv(self) -> str:
        """One row per scripted message."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "sender", "recipient", "sent_at", "hash", "delivered",
                    "delivered_at", "latency", "transmissions", "relaying_nodes"])
        for m in self.messages:
            w.writerow([m.index, m.sender, m.recipient, m.sent_at, m.hash, int(m.delivered),
                        "" if m.delivered_at is None else m.delivered_at,
                        "" if m.latency is None else m.latency,
                        m.transmissions, len(m.relays)])
        return buf.getvalue()


# internal queue entries
_ARRIVE, _FORWARD, _REPLAY, _DUMMY, _SCRIPT = range(5)


class Simulation:
    def __init__(
        self,
        topology: Topology,
        events: Sequence[ScenarioEvent] = (),
        seed: int = 0,
        config: Optional[SimConfig] = None,
    ):
        self.topology = topology
        self.config = config or SimConfig()
        self.rng = random.Random(seed)
        self.events = list(events)
        self._check_events()

        self.specs = {n.id: n for n in topology.nodes}
        self.roles = {n.id: n.role for n in topology.nodes}
        self.online = {n.id for n in topology.nodes if n.online}
        self.edges = {e.key: e for e in topology.edges}
        self.links_up = set(self.edges)

        keypairs = {
            n: cs.generate_keypair(self.config.suite, self.rng.randbytes(cs.SEED_SIZE))
            for n in topology.node_ids
        }
        self.nodes: dict[str, RelayNode] = {}
        for spec in topology.nodes:
            book = ContactBook(keypairs[spec.id])
            for other in self._contacts_of(spec.id):
                book.add_contact(Contact(other, keypairs[other].public_key, spec.id))
            cfg = dataclasses.replace(self.config.node, **dict(spec.config)) if spec.config else self.config.node
            self.nodes[spec.id] = RelayNode(book, cfg, rng=random.Random(self.rng.getrandbits(64)))
        for n in self.nodes:
            self._refresh_neighbors(n)

        self.metrics = SimMetrics(
            relay_count={n: 0 for n in topology.node_ids},
            observer_log={n: [] for n, r in self.roles.items() if r is NodeRole.OBSERVER},
        )
        self._queue: list = []
        self._seq = itertools.count()
        self._by_hash: dict[bytes, MessageRecord] = {}
        self._dummy_hashes: set[bytes] = set()
        self._replayed: set[tuple[str, bytes]] = set()
        self.now = 0

    def _contacts_of(self, node_id: str) -> list[str]:
        if self.topology.contacts == "all":
            return [n for n in self.topology.node_ids if n != node_id]
        out = []
        for a, b in self.topology.contacts:
            if a == node_id and b not in out:
                out.append(b)
            elif b == node_id and a not in out:
                out.append(a)
        return out

    def _check_events(self) -> None:
        ids = set(self.topology.node_ids)
        edge_keys = {e.key for e in self.topology.edges}
        for ev in self.events:
            if ev.at < 0:
                raise ScenarioError(f"event at negative time {ev.at}")
            if ev.node not in ids:
                raise ScenarioError(f"event references unknown node {ev.node!r}")
            if ev.kind in (EventKind.LINK_DOWN, EventKind.LINK_UP):
                if ev.peer not in ids:
                    raise ScenarioError(f"event references unknown node {ev.peer!r}")
                if frozenset((ev.node, ev.peer)) not in edge_keys:
                    raise ScenarioError(f"no edge {ev.node!r}-{ev.peer!r}")
            if ev.kind is EventKind.SEND:
                if ev.peer not in self._contacts_of(ev.node):
                    raise ScenarioError(f"{ev.node!r} has no contact {ev.peer!r}")

    # -- topology state ---------------------------------------------------

    def _active(self, a: str, b: str) -> bool:
        return frozenset((a, b)) in self.links_up and a in self.online and b in self.online

    def _refresh_neighbors(self, node_id: str) -> None:
        nbrs = set()
        for key in self.edges:
            if node_id in key:
                (other,) = key - {node_id}
                if self._active(node_id, other):
                    nbrs.add(other)
        self.nodes[node_id].neighbors = nbrs

    # -- queue --------------------------------------------------------------

    def _push(self, at: int, kind: int, *data) -> None:
        heapq.heappush(self._queue, (at, next(self._seq), kind, data))

    def run(self) -> SimMetrics:
        for ev in self.events:
            self._push(ev.at, _SCRIPT, ev)
        for n in self.topology.node_ids:
            if self.nodes[n].config.dummy_rate > 0:
                self._schedule_dummy(n, 0)

        budget = self.config.max_events
        while self._queue:
            at, _, kind, data = heapq.heappop(self._queue)
            assert at >= self.now
            self.now = at
            self.metrics.events_processed += 1
            if self.metrics.events_processed > budget:
                raise ScenarioError(f"event budget of {budget} exhausted")
            if kind == _ARRIVE:
                self._arrive(*data)
            elif kind == _FORWARD:
                self._forward(*data)
            elif kind == _REPLAY:
                self._replay(*data)
            elif kind == _DUMMY:
                self._dummy(*data)
            else:
                self._script(*data)
        self.metrics.end_time = self.now
        return self.metrics

    # -- handlers ---------------------------------------------------------

    def _script(self, ev: ScenarioEvent) -> None:
        if ev.kind is EventKind.SEND:
            node = self.nodes[ev.node]
            msg = node.originate(ev.peer, ev.internal_address, ev.message, self.now, self.rng.randbytes)
            record = MessageRecord(
                index=len(self.metrics.messages),
                sender=ev.node,
                recipient=ev.peer,
                sent_at=self.now,
                hash=msg.hash.hex(),
                relays={ev.node: 1},
            )
            self.metrics.messages.append(record)
            self._by_hash[msg.hash] = record
            self.metrics.relay_count[ev.node] += 1
            self._push(self.now + node.sample_relay_delay(), _FORWARD, ev.node, msg.to_bytes(), None)
            return

        if ev.kind in (EventKind.LINK_DOWN, EventKind.LINK_UP):
            key = frozenset((ev.node, ev.peer))
            if ev.kind is EventKind.LINK_DOWN:
                self.links_up.discard(key)
            else:
                self.links_up.add(key)
            touched = [ev.node, ev.peer]
        else:
            if ev.kind is EventKind.NODE_LEAVE:
                self.online.discard(ev.node)
            else:
                self.online.add(ev.node)
            touched = [ev.node] + [other for key in self.edges if ev.node in key for other in key - {ev.node}]
        for n in touched:
            self._refresh_neighbors(n)

    def _transmit(self, src: str, dst: str, frame: bytes, h: bytes) -> None:
        m = self.metrics
        m.transmissions += 1
        record = self._by_hash.get(h)
        if record is not None:
            record.transmissions += 1
        elif h in self._dummy_hashes:
            m.dummy_transmissions += 1
        if self.roles[src] is NodeRole.OBSERVER:
            m.observer_log[src].append(ObservedFrame(self.now, src, dst, "out", frame))
        latency = self.edges[frozenset((src, dst))].latency.sample(self.rng)
        self._push(self.now + latency, _ARRIVE, dst, src, frame)

    def _forward(self, node_id: str, frame: bytes, arrival: Optional[str]) -> None:
        if node_id not in self.online:
            return
        h = frame[1:65]
        for dst in sorted(self.nodes[node_id].relay_targets(arrival)):
            self._transmit(node_id, dst, frame, h)

    def _arrive(self, node_id: str, src: str, frame: bytes) -> None:
        m = self.metrics
        if not self._active(node_id, src):
            m.frames_lost += 1
            return
        if self.roles[node_id] is NodeRole.OBSERVER:
            m.observer_log[node_id].append(ObservedFrame(self.now, src, node_id, "in", frame))

        node = self.nodes[node_id]
        decision, outcome = node.on_receive(frame, self.now)
        h = frame[1:65] if len(frame) == MESSAGE_SIZE else b""
        record = self._by_hash.get(h)

        if self.config.record_receipts:
            m.receipts.append(Receipt(self.now, node_id, src, h.hex(), str(decision),
                                      None if outcome is None else str(outcome)))

        if not decision.relayed:
            reason = decision.drop_reason.value
            m.drops[reason] = m.drops.get(reason, 0) + 1
            if reason == "DUPLICATE":
                m.duplicate_drops += 1
            return

        m.relay_count[node_id] += 1
        if record is not None:
            record.relays[node_id] = record.relays.get(node_id, 0) + 1
            record.outcomes.setdefault(node_id, str(outcome))
            if outcome.kind is OutcomeKind.DELIVERED:
                if node_id == record.recipient:
                    if not record.delivered:
                        record.delivered = True
                        record.delivered_at = self.now
                else:
                    m.misdeliveries += 1

        role = self.roles[node_id]
        if role is not NodeRole.DROPPER:
            self._push(self.now + node.sample_relay_delay(), _FORWARD, node_id, frame, src)
        if role is NodeRole.REPLAYER and (node_id, h) not in self._replayed:
            self._replayed.add((node_id, h))
            for delay in self.specs[node_id].replay_delays:
                self._push(self.now + delay, _REPLAY, node_id, frame)

    def _replay(self, node_id: str, frame: bytes) -> None:
        if node_id not in self.online:
            return
        node = self.nodes[node_id]
        h = frame[1:65]
        # keep our own echoes of the replay from re-arming it
        node.mark_originated(h, self.now)
        targets = sorted(node.neighbors)
        self.metrics.replays.append(ReplayRecord(self.now, node_id, h.hex(), targets))
        for dst in targets:
            self._transmit(node_id, dst, frame, h)

    def _schedule_dummy(self, node_id: str, after: int) -> None:
        rate = self.nodes[node_id].config.dummy_rate
        gap = max(1, int(self.rng.expovariate(rate) * SECOND))
        at = after + gap
        if at < self.config.dummy_until:
            self._push(at, _DUMMY, node_id)

    def _dummy(self, node_id: str) -> None:
        if node_id in self.online:
            node = self.nodes[node_id]
            msg = node.make_dummy(self.now)
            node.mark_originated(msg.hash, self.now)
            self._dummy_hashes.add(msg.hash)
            self.metrics.dummies_sent += 1
            self._push(self.now + node.sample_relay_delay(), _FORWARD, node_id, msg.to_bytes(), None)
        self._schedule_dummy(node_id, self.now)


def run_simulation(
    topology: Topology,
    events: Sequence[ScenarioEvent] = (),
    seed: int = 0,
    config: Optional[SimConfig] = None,
) -> SimMetrics:
    return Simulation(topology, events, seed, config).run()


# ---------------------------------------------------------------------------
# threat-model scenarios

@dataclass
class BlindnessReport:
    frames_checked: int = 0
    observers: list[str] = field(default_factory=list)
    pairs: list[tuple[str, str]] = field(default_factory=list)
    # traffic class ("sender->recipient" or "dummy") -> {frame size: count}
    size_histogram: dict[str, dict[int, int]] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def assert_observer_blindness(
    metrics: SimMetrics, events: Iterable[ScenarioEvent], window: int = 4
) -> BlindnessReport:
    """Check what passive observers captured against the plaintexts that were sent.

    Every frame must be a well-formed 580-byte message with a valid hash,
    all traffic classes must share one frame size, and no run of ``window``
    bytes from any sent message body or alias may appear in any frame.
    """
    report = BlindnessReport(observers=sorted(k for k, v in metrics.observer_log.items()))
    sends = [ev for ev in events if ev.kind is EventKind.SEND]
    report.pairs = sorted({(ev.node, ev.peer) for ev in sends})
    if not report.observers:
        report.failures.append("scenario has no OBSERVER node")
    if len(report.pairs) < 2:
        report.failures.append("need at least two distinct (sender, recipient) pairs")

    frames = [f.frame for log in metrics.observer_log.values() for f in log]
    report.frames_checked = len(frames)
    if report.observers and not frames:
        report.failures.append("observers captured no traffic")

    by_hash = {bytes.fromhex(m.hash): f"{m.sender}->{m.recipient}" for m in metrics.messages}
    hist: dict[str, Counter] = defaultdict(Counter)
    grams: set[bytes] = set()
    for i, frame in enumerate(frames):
        if len(frame) != MESSAGE_SIZE:
            report.failures.append(f"frame {i} is {len(frame)} bytes")
            hist["malformed"][len(frame)] += 1
            continue
        try:
            msg = parse_message(frame)
        except CodecError as exc:
            report.failures.append(f"frame {i} does not parse: {exc}")
            continue
        if cs.hash_message(msg.encrypted_blob, msg.signature) != msg.hash:
            report.failures.append(f"frame {i} has an invalid hash")
        hist[by_hash.get(msg.hash, "dummy")][len(frame)] += 1
        grams.update(frame[j:j + window] for j in range(len(frame) - window + 1))
    report.size_histogram = {k: dict(v) for k, v in sorted(hist.items())}

    sizes = {size for counts in report.size_histogram.values() for size in counts}
    if len(sizes) > 1:
        report.failures.append(f"traffic classes differ in frame size: {sorted(sizes)}")

    for n, ev in enumerate(sends):
        secrets = [ev.message, ev.node.encode(), ev.peer.encode()]
        for secret in secrets:
            for j in range(len(secret) - window + 1):
                if secret[j:j + window] in grams:
                    report.failures.append(
                        f"message {n}: plaintext bytes {secret[j:j + window]!r} visible on the wire"
                    )
                    break
    return report


@dataclass
class ReplayPhase:
    at: int
    replayer: str
    phase: str  # "in_window" or "post_window"
    neighbor_receipts: int
    neighbor_duplicate_drops: int
    deliveries: int
    recipient_outcomes: list[str]

    @property
    def ok(self) -> bool:
        if self.deliveries:
            return False
        if self.phase == "in_window":
            return self.neighbor_receipts > 0 and self.neighbor_duplicate_drops == self.neighbor_receipts
        return "REJECTED(TOO_OLD)" in self.recipient_outcomes


@dataclass
class ReplayReport:
    sender: Optional[str] = None
    recipient: Optional[str] = None
    original_delivered: bool = False
    phases: list[ReplayPhase] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(p.ok for p in self.phases)

    @property
    def duplicate_deliveries(self) -> int:
        return sum(p.deliveries for p in self.phases)


def run_replay_attack(
    topology: Topology,
    seed: int = 0,
    config: Optional[SimConfig] = None,
    sender: Optional[str] = None,
    recipient: Optional[str] = None,
    max_message_age: int = 60 * SECOND,
    message: bytes = b"meet at the usual place",
) -> ReplayReport:
    """Send one message and let every REPLAYER re-broadcast it.

    Replayers without explicit ``replay_delays`` replay once after 1 s
    (inside the dedup window) and once after ``max_message_age + 1 s``
    (hash evicted, message too old).
    """
    replayers = [n.id for n in topology.nodes if n.role is NodeRole.REPLAYER]
    if not replayers:
        return ReplayReport()

    honest = [n for n in topology.node_ids if n not in replayers]
    sender = sender or honest[0]
    recipient = recipient or honest[-1]

    base = config or SimConfig()
    node_cfg = dataclasses.replace(base.node, max_message_age=max_message_age, seen_retention=max_message_age)
    cfg = dataclasses.replace(base, node=node_cfg, record_receipts=True)
    default_delays = (SECOND, max_message_age + SECOND)
    nodes = [
        dataclasses.replace(n, replay_delays=n.replay_delays or default_delays)
        if n.role is NodeRole.REPLAYER else n
        for n in topology.nodes
    ]
    topo = Topology(nodes, list(topology.edges), topology.contacts)
    events = [ScenarioEvent.send(0, sender, recipient, message)]
    metrics = run_simulation(topo, events, seed, cfg)

    record = metrics.messages[0]
    report = ReplayReport(sender, recipient, record.delivered)
    replays = sorted(metrics.replays, key=lambda r: r.at)
    for i, rep in enumerate(replays):
        end = replays[i + 1].at if i + 1 < len(replays) else None
        window = [
            r for r in metrics.receipts
            if r.hash == rep.hash and r.time >= rep.at and (end is None or r.time < end)
        ]
        from_replayer = [r for r in window if r.link == rep.node]
        report.phases.append(ReplayPhase(
            at=rep.at,
            replayer=rep.node,
            phase="in_window" if rep.at - record.sent_at < max_message_age else "post_window",
            neighbor_receipts=len(from_replayer),
            neighbor_duplicate_drops=sum(r.decision == "DROP/DUPLICATE" for r in from_replayer),
            deliveries=sum(r.outcome == "DELIVERED" for r in window),
            recipient_outcomes=[r.outcome for r in window if r.node == recipient and r.outcome],
        ))
    return report


@dataclass
class ChokePointReport:
    dropper: str
    sender: str
    recipient: str
    dropper_separates: bool
    delivered_with_dropper: bool
    delivered_control: bool

    @property
    def ok(self) -> bool:
        return self.delivered_control and self.delivered_with_dropper == (not self.dropper_separates)


def run_choke_point(
    topology: Topology,
    dropper: str,
    sender: str,
    recipient: str,
    seed: int = 0,
    config: Optional[SimConfig] = None,
) -> ChokePointReport:
    """Run once with ``dropper`` compromised and once with it honest."""
    if dropper in (sender, recipient):
        raise ScenarioError("the dropper must be distinct from sender and recipient")
    events = [ScenarioEvent.send(0, sender, recipient, b"are you still there?")]
    attacked = run_simulation(topology.with_role(dropper, NodeRole.DROPPER), events, seed, config)
    control = run_simulation(topology.with_role(dropper, NodeRole.HONEST), events, seed, config)
    return ChokePointReport(
        dropper=dropper,
        sender=sender,
        recipient=recipient,
        dropper_separates=recipient not in reachable(topology, sender, exclude=[dropper]),
        delivered_with_dropper=attacked.messages[0].delivered,
        delivered_control=control.messages[0].delivered,
    )


# ---------------------------------------------------------------------------
# scenario files

@dataclass
class Scenario:
    topology: Topology
    events: list[ScenarioEvent]
    seed: int = 0
    config: SimConfig = field(default_factory=SimConfig)
    # [{"message": index, "delivered": bool}, ...]
    expect: list[dict] = field(default_factory=list)

    def run(self, seed: Optional[int] = None) -> SimMetrics:
        return run_simulation(self.topology, self.events, self.seed if seed is None else seed, self.config)

    def check(self, metrics: SimMetrics) -> list[dict]:
        results = []
        for exp in self.expect:
            idx = exp["message"]
            actual = metrics.messages[idx].delivered if idx < len(metrics.messages) else None
            results.append({
                "message": idx,
                "expected_delivered": exp["delivered"],
                "delivered": actual,
                "passed": actual == exp["delivered"],
            })
        return results


def _ms(value) -> int:
    return int(round(float(value) * MILLISECOND))


def _latency(doc) -> Latency:
    if doc is None:
        return Latency()
    if isinstance(doc, (list, tuple)):
        if len(doc) != 2:
            raise ScenarioError("latency_ms range must be [low, high]")
        return Latency(_ms(doc[0]), _ms(doc[1]))
    return Latency(_ms(doc))


def _message_bytes(doc) -> bytes:
    if isinstance(doc, str):
        return doc.encode("utf-8")
    if isinstance(doc, Mapping) and "hex" in doc:
        return bytes.fromhex(doc["hex"])
    raise ScenarioError("message must be a string or {\"hex\": ...}")


def scenario_from_dict(doc: Mapping[str, Any]) -> Scenario:
    try:
        node_cfg = node_config_from_json(doc.get("node_defaults"), _default_sim_node_config())
        nodes = []
        for nd in doc["nodes"]:
            if isinstance(nd, str):
                nd = {"id": nd}
            overrides = node_config_from_json(nd.get("config"), node_cfg) if nd.get("config") else None
            nodes.append(NodeSpec(
                id=nd["id"],
                role=NodeRole(nd.get("role", "honest")),
                config={} if overrides is None else {
                    f.name: getattr(overrides, f.name) for f in dataclasses.fields(NodeConfig)
                    if getattr(overrides, f.name) != getattr(node_cfg, f.name)
                },
                replay_delays=tuple(_ms(d) for d in nd.get("replay_delays_ms", ())),
                online=bool(nd.get("online", True)),
            ))
        edges = [Edge(e["a"], e["b"], _latency(e.get("latency_ms"))) for e in doc.get("edges", [])]
        contacts = doc.get("contacts", "all")
        if contacts != "all":
            contacts = [tuple(p) for p in contacts]
        topology = Topology(nodes, edges, contacts)

        events = []
        for ev in doc.get("events", []):
            kind = EventKind(ev["kind"])
            at = _ms(ev.get("at_ms", 0))
            if kind is EventKind.SEND:
                events.append(ScenarioEvent.send(
                    at, ev["from"], ev["to"], _message_bytes(ev.get("message", "")),
                    int(ev.get("internal_address", 0)),
                ))
            elif kind in (EventKind.LINK_DOWN, EventKind.LINK_UP):
                events.append(ScenarioEvent(at, kind, ev["a"], ev["b"]))
            else:
                events.append(ScenarioEvent(at, kind, ev["node"]))

        config = SimConfig(
            suite=CipherSuiteId.parse(doc.get("suite", "mock")),
            node=node_cfg,
            dummy_until=_ms(doc.get("dummy_until_ms", 0)),
            record_receipts=bool(doc.get("record_receipts", False)),
        )
        expect = [{"message": int(e["message"]), "delivered": bool(e["delivered"])} for e in doc.get("expect", [])]
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid scenario: {exc!r}") from None
    return Scenario(topology, events, int(doc.get("seed", 0)), config, expect)


def load_scenario(path: Union[str, Path]) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(doc, Mapping):
        raise ScenarioError(f"{path}: scenario must be a JSON object")
    return scenario_from_dict(doc)


def scenario_to_dict(s: Scenario) -> dict:
    """Inverse of :func:`scenario_from_dict` (durations in milliseconds)."""
    def ms(us: int):
        return us / MILLISECOND

    def latency(lat: Latency):
        return ms(lat.low) if lat.low == lat.high else [ms(lat.low), ms(lat.high)]

    nodes = []
    for n in s.topology.nodes:
        entry: dict[str, Any] = {"id": n.id, "role": n.role.value}
        if n.config:
            full = node_config_to_json(dataclasses.replace(s.config.node, **dict(n.config)))
            base = node_config_to_json(s.config.node)
            entry["config"] = {k: v for k, v in full.items() if base[k] != v}
        if n.replay_delays:
            entry["replay_delays_ms"] = [ms(d) for d in n.replay_delays]
        if not n.online:
            entry["online"] = False
        nodes.append(entry)

    events = []
    for ev in s.events:
        e: dict[str, Any] = {"at_ms": ms(ev.at), "kind": ev.kind.value}
        if ev.kind is EventKind.SEND:
            try:
                msg: Any = ev.message.decode("utf-8")
            except UnicodeDecodeError:
                msg = {"hex": ev.message.hex()}
            e.update({"from": ev.node, "to": ev.peer, "message": msg, "internal_address": ev.internal_address})
        elif ev.kind in (EventKind.LINK_DOWN, EventKind.LINK_UP):
            e.update({"a": ev.node, "b": ev.peer})
        else:
            e["node"] = ev.node
        events.append(e)

    return {
        "seed": s.seed,
        "suite": s.config.suite.value,
        "node_defaults": node_config_to_json(s.config.node),
        "nodes": nodes,
        "edges": [{"a": e.a, "b": e.b, "latency_ms": latency(e.latency)} for e in s.topology.edges],
        "contacts": s.topology.contacts if s.topology.contacts == "all" else [list(p) for p in s.topology.contacts],
        "events": events,
        "dummy_until_ms": ms(s.config.dummy_until),
        "record_receipts": s.config.record_receipts,
        "expect": s.expect,
    }
