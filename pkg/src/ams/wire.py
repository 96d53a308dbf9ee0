"""Length-prefixed JSON framing for peer exchange.

Each message is a 4-byte big-endian payload length followed by a UTF-8
JSON object. The same framing is used on live channels and in state
files written for offline merge.
"""

from __future__ import annotations

import json
import struct
from typing import Any

from .errors import TransportFailure

_HEADER = struct.Struct("!I")

# Class-sized attendance data is tiny; anything near this is garbage.
MAX_FRAME_BYTES = 16 * 1024 * 1024


def encode_frame(message: dict[str, Any]) -> bytes:
    payload = json.dumps(
        message, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")
    return _HEADER.pack(len(payload)) + payload


def encode_frames(messages: list[dict[str, Any]]) -> bytes:
    return b"".join(encode_frame(m) for m in messages)


def decode_frames(data: bytes) -> list[dict[str, Any]]:
    """Split a byte string into its framed messages; rejects trailing junk."""
    messages = []
    offset = 0
    while offset < len(data):
        if offset + _HEADER.size > len(data):
            raise TransportFailure("truncated frame header")
        (length,) = _HEADER.unpack_from(data, offset)
        if length > MAX_FRAME_BYTES:
            raise TransportFailure(f"frame of {length} bytes exceeds limit")
        offset += _HEADER.size
        if offset + length > len(data):
            raise TransportFailure("truncated frame payload")
        try:
            message = json.loads(data[offset : offset + length].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise TransportFailure(f"undecodable frame: {exc}") from None
        if not isinstance(message, dict):
            raise TransportFailure("frame payload is not a JSON object")
        messages.append(message)
        offset += length
    return messages
