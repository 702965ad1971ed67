"""Length-prefixed framing: 4-byte big-endian length, then one 580-byte message.

Any length other than 580 is a protocol violation; the caller should close
the connection.
"""

from __future__ import annotations

import asyncio
import socket
import struct
from typing import Optional

from .codec import MESSAGE_SIZE
from .errors import FramingError

_LENGTH = struct.Struct("!I")
HEADER_SIZE = _LENGTH.size


def encode_frame(wire: bytes) -> bytes:
    if len(wire) != MESSAGE_SIZE:
        raise FramingError(f"refusing to frame {len(wire)} bytes; messages are {MESSAGE_SIZE}")
    return _LENGTH.pack(len(wire)) + bytes(wire)


def _check_length(header: bytes) -> int:
    (length,) = _LENGTH.unpack(header)
    if length != MESSAGE_SIZE:
        raise FramingError(f"frame length {length}, expected {MESSAGE_SIZE}")
    return length


def _recv_exactly(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            break
        buf.extend(chunk)
    return bytes(buf)


def frame_write(sock: socket.socket, wire: bytes) -> None:
    sock.sendall(encode_frame(wire))


def frame_read(sock: socket.socket) -> Optional[bytes]:
    """Next message from a blocking socket, or ``None`` on clean EOF.

    Raises :class:`FramingError` on a bad length field or a short read.
    """
    header = _recv_exactly(sock, HEADER_SIZE)
    if not header:
        return None
    if len(header) < HEADER_SIZE:
        raise FramingError("connection closed inside a frame header")
    length = _check_length(header)
    body = _recv_exactly(sock, length)
    if len(body) != length:
        raise FramingError(f"short read: {len(body)} of {length} bytes")
    return body


async def read_frame(reader: asyncio.StreamReader) -> Optional[bytes]:
    """Asyncio counterpart of :func:`frame_read`."""
    try:
        header = await reader.readexactly(HEADER_SIZE)
    except asyncio.IncompleteReadError as exc:
        if not exc.partial:
            return None
        raise FramingError("connection closed inside a frame header") from None
    length = _check_length(header)
    try:
        return await reader.readexactly(length)
    except asyncio.IncompleteReadError as exc:
        raise FramingError(f"short read: {len(exc.partial)} of {length} bytes") from None


def parse_hostport(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host or not port.isdigit():
        raise ValueError(f"expected host:port, got {text!r}")
    return host.strip("[]"), int(port)
