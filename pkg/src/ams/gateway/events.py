"""Per-session event streams consumed by the live console.

Frames are kept in an append-only buffer per session, numbered from 0
with no gaps, so a client can reconnect and resume from any sequence
number without loss.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from typing import Any, Iterator

TAP = "Tap"
ALERT = "Alert"
SESSION_OPENED = "SessionOpened"
SESSION_CLOSED = "SessionClosed"
MERGE_COMPLETED = "MergeCompleted"


@dataclass(frozen=True)
class EventFrame:
    seq: int
    kind: str
    payload: dict[str, Any]

    def to_json(self) -> str:
        return json.dumps(
            {"seq": self.seq, "kind": self.kind, "payload": self.payload},
            sort_keys=True,
            separators=(",", ":"),
        )


class EventLog:
    """Append-only frame buffer for one session stream."""

    def __init__(self) -> None:
        self._frames: list[EventFrame] = []
        self._cond = threading.Condition()
        self.finished = False  # no further frames will arrive

    def append(self, kind: str, payload: dict[str, Any]) -> EventFrame:
        with self._cond:
            frame = EventFrame(len(self._frames), kind, payload)
            self._frames.append(frame)
            if kind == SESSION_CLOSED:
                self.finished = True
            self._cond.notify_all()
            return frame

    def since(self, seq: int = -1) -> list[EventFrame]:
        """All frames with sequence number strictly greater than ``seq``."""
        with self._cond:
            return self._frames[seq + 1 :]

    def follow(self, seq: int = -1, poll_timeout: float = 0.5) -> Iterator[EventFrame]:
        """Yield frames as they arrive, ending once the session closes."""
        next_seq = seq + 1
        while True:
            with self._cond:
                while next_seq >= len(self._frames) and not self.finished:
                    self._cond.wait(timeout=poll_timeout)
                batch = self._frames[next_seq:]
                done = self.finished and next_seq + len(batch) >= len(self._frames)
            for frame in batch:
                yield frame
                next_seq = frame.seq + 1
            if done:
                return
