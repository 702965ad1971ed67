"""Live relay node over TCP.

Every TCP connection, accepted or dialled, is one link. Frames read from a
link go through :meth:`RelayNode.on_receive` on the event loop thread, which
serialises access to the node state. Accepted messages are queued to every
other link after the node's random relay delay. Each link has a bounded
outbound queue, and frames that overflow it are dropped and counted.

Delivered messages are written to ``out`` as one JSON object per line.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import logging
import os
import random
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, TextIO

from .config import node_config_from_json
from .errors import FramingError
from .framing import encode_frame, parse_hostport, read_frame
from .identity import ContactBook, load_book
from .relay import MILLISECOND, SECOND, NodeConfig, OutcomeKind, RelayNode, now_us

log = logging.getLogger(__name__)

KEYSTORE_ENV = "EFPIX_KEYSTORE"


def default_daemon_node_config() -> NodeConfig:
    return NodeConfig(relay_delay_max=500 * MILLISECOND)


@dataclass
class PeerConfig:
    listen: Optional[tuple[str, int]] = None
    peers: list[tuple[str, int]] = field(default_factory=list)
    node: NodeConfig = field(default_factory=default_daemon_node_config)
    keystore: Optional[Path] = None
    outbound_queue: int = 256
    reconnect_interval: float = 0.5

    def __post_init__(self):
        if self.listen is None and not self.peers:
            raise ValueError("configure a listen address or at least one peer")

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Optional[Path] = None) -> "PeerConfig":
        base_dir = base_dir or Path.cwd()
        keystore = os.environ.get(KEYSTORE_ENV) or doc.get("keystore")
        if keystore is not None:
            keystore = Path(keystore)
            if not keystore.is_absolute():
                keystore = base_dir / keystore
        return cls(
            listen=parse_hostport(doc["listen"]) if doc.get("listen") else None,
            peers=[parse_hostport(p) for p in doc.get("peers", [])],
            node=node_config_from_json(doc.get("node"), default_daemon_node_config()),
            keystore=keystore,
            outbound_queue=int(doc.get("outbound_queue", 256)),
            reconnect_interval=float(doc.get("reconnect_interval_s", 0.5)),
        )

    @classmethod
    def load(cls, path) -> "PeerConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")), path.parent)


@dataclass
class _Link:
    id: int
    name: str
    writer: asyncio.StreamWriter
    queue: asyncio.Queue
    sender: Optional[asyncio.Task] = None


class Daemon:
    def __init__(self, config: PeerConfig, book: Optional[ContactBook] = None, out: TextIO = None):
        if book is None:
            if config.keystore is None:
                raise ValueError("no keystore configured")
            book = load_book(config.keystore)
        self.config = config
        self.node = RelayNode(book, config.node, rng=random.Random())
        # dummies are mined off the loop thread, so they get their own rng
        self._dummies = RelayNode(book, config.node, rng=random.Random())
        self.out = out or sys.stdout
        self.links: dict[int, _Link] = {}
        self.dropped_frames = 0
        self.closed_for_violation = 0
        self.delivered = 0
        self._ids = itertools.count(1)
        self._server: Optional[asyncio.base_events.Server] = None
        self._tasks: set[asyncio.Task] = set()
        self._stopping = False

    @property
    def listen_address(self) -> Optional[tuple[str, int]]:
        if self._server is None or not self._server.sockets:
            return None
        return self._server.sockets[0].getsockname()[:2]

    async def start(self) -> None:
        if self.config.listen:
            host, port = self.config.listen
            self._server = await asyncio.start_server(self._accept, host, port)
            log.info("listening on %s:%s", *self.listen_address)
        for host, port in self.config.peers:
            self._spawn(self._dial_forever(host, port))
        if self.config.node.dummy_rate > 0:
            self._spawn(self._dummy_loop())

    async def serve_forever(self) -> None:
        await self.start()
        try:
            while not self._stopping:
                await asyncio.sleep(3600)
        finally:
            await self.stop()

    async def stop(self) -> None:
        self._stopping = True
        if self._server is not None:
            self._server.close()
        for task in list(self._tasks):
            task.cancel()
        for link in list(self.links.values()):
            link.writer.close()
        await asyncio.gather(*self._tasks, return_exceptions=True)

    def _spawn(self, coro) -> asyncio.Task:
        task = asyncio.ensure_future(coro)
        self._tasks.add(task)
        task.add_done_callback(self._tasks.discard)
        return task

    async def _accept(self, reader, writer) -> None:
        peer = writer.get_extra_info("peername")
        await self._run_link(reader, writer, f"in:{peer}")

    async def _dial_forever(self, host: str, port: int) -> None:
        while not self._stopping:
            try:
                reader, writer = await asyncio.open_connection(host, port)
            except OSError:
                await asyncio.sleep(self.config.reconnect_interval)
                continue
            await self._run_link(reader, writer, f"out:{host}:{port}")
            await asyncio.sleep(self.config.reconnect_interval)

    async def _run_link(self, reader, writer, name: str) -> None:
        link = _Link(next(self._ids), name, writer, asyncio.Queue(self.config.outbound_queue))
        self.links[link.id] = link
        self.node.neighbors.add(link.id)
        link.sender = self._spawn(self._send_loop(link))
        log.info("link %d up (%s)", link.id, name)
        try:
            while True:
                frame = await read_frame(reader)
                if frame is None:
                    break
                self._process(frame, link.id)
        except FramingError as exc:
            self.closed_for_violation += 1
            log.warning("closing link %d: %s", link.id, exc)
        except (ConnectionError, OSError):
            pass
        finally:
            self.node.neighbors.discard(link.id)
            self.links.pop(link.id, None)
            link.sender.cancel()
            writer.close()
            log.info("link %d down", link.id)

    async def _send_loop(self, link: _Link) -> None:
        try:
            while True:
                frame = await link.queue.get()
                link.writer.write(encode_frame(frame))
                await link.writer.drain()
        except (ConnectionError, OSError):
            link.writer.close()

    def _process(self, frame: bytes, link_id: Optional[int]) -> None:
        try:
            decision, outcome = self.node.on_receive(frame, now_us())
        except Exception:  # on_receive is total; this guards the daemon regardless
            log.exception("on_receive raised")
            return
        if not decision.relayed:
            log.debug("drop from link %s: %s", link_id, decision)
            return
        self._schedule_relay(frame, link_id)
        if outcome.kind is OutcomeKind.DELIVERED:
            self.delivered += 1
            self.emit(outcome.result.to_json())
        elif outcome.kind is OutcomeKind.REJECTED:
            log.info("rejected message: %s", outcome)

    def emit(self, record: dict) -> None:
        self.out.write(json.dumps(record, sort_keys=True) + "\n")
        self.out.flush()

    def _schedule_relay(self, frame: bytes, arrival: Optional[int]) -> None:
        delay = self.node.sample_relay_delay() / SECOND
        loop = asyncio.get_running_loop()
        if delay:
            loop.call_later(delay, self._fanout, frame, arrival)
        else:
            self._fanout(frame, arrival)

    def _fanout(self, frame: bytes, arrival: Optional[int]) -> None:
        for link_id in sorted(self.node.relay_targets(arrival)):
            link = self.links.get(link_id)
            if link is None:
                continue
            try:
                link.queue.put_nowait(frame)
            except asyncio.QueueFull:
                self.dropped_frames += 1

    def inject(self, frame: bytes) -> None:
        """Send a locally created frame to every link."""
        msg_hash = frame[1:65]
        self.node.mark_originated(msg_hash, now_us())
        self._schedule_relay(frame, None)

    async def _dummy_loop(self) -> None:
        loop = asyncio.get_running_loop()
        rate = self.config.node.dummy_rate
        while not self._stopping:
            await asyncio.sleep(self._dummies.rng.expovariate(rate))
            msg = await loop.run_in_executor(None, self._dummies.make_dummy, now_us())
            self.inject(msg.to_bytes())


def run_daemon(config: PeerConfig, out: TextIO = None) -> None:
    daemon = Daemon(config, out=out)
    try:
        asyncio.run(daemon.serve_forever())
    except KeyboardInterrupt:
        pass
