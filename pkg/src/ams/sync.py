"""State-based replica merge and the pairwise exchange protocol.

Attendance records form a join-semilattice: ``join_record`` is a total
order maximum, so ``merge_state`` is commutative, associative, and
idempotent, and any exchange pattern that eventually delivers every pair
converges.
"""

from __future__ import annotations

import queue
from dataclasses import dataclass, field
from typing import Any, Protocol

from .errors import KeyMismatch, TokenMismatch, TransportFailure, VersionMismatch
from .ledger import AttendanceRecord, PRESENT, Session, SessionStatus
from .wire import decode_frames, encode_frame

PROTOCOL_VERSION = 1

RecordKey = tuple[str, str, str]
SessionKey = tuple[str, str, str]


@dataclass
class ReplicaState:
    """One device's record set; an element of the merge semilattice."""

    device_id: str
    records: dict[RecordKey, AttendanceRecord] = field(default_factory=dict)
    sessions: dict[SessionKey, Session] = field(default_factory=dict)

    def record_set(self) -> frozenset[AttendanceRecord]:
        return frozenset(self.records.values())


@dataclass(frozen=True)
class Hello:
    protocol_version: int
    device_id: str
    pairing_token: str


@dataclass(frozen=True)
class Ack:
    merged_count: int


@dataclass(frozen=True)
class PairingAccepted:
    local_device_id: str
    peer_device_id: str


def empty_replica(device_id: str = "") -> ReplicaState:
    return ReplicaState(device_id)


def _code_rank(code: str) -> int:
    return 1 if code == PRESENT else 0


def _record_wins(a: AttendanceRecord, b: AttendanceRecord) -> bool:
    """True when a is the join of {a, b}.

    Presence beats absence (the device that saw the tap has positive
    evidence), then the earlier timestamp, then the smaller device id.
    Records that tie on all three are identical, so this is a total order
    and the maximum is associative.
    """
    if a.code != b.code:
        return _code_rank(a.code) > _code_rank(b.code)
    if a.recorded_at != b.recorded_at:
        return a.recorded_at < b.recorded_at
    return a.device_id <= b.device_id


def join_record(a: AttendanceRecord, b: AttendanceRecord) -> AttendanceRecord:
    """Deterministically pick one of two records for the same key."""
    if a.key != b.key:
        raise KeyMismatch(f"cannot join records for {a.key} and {b.key}")
    return a if _record_wins(a, b) else b


def _session_order(s: Session) -> tuple:
    closed_rank = 0 if s.status is SessionStatus.CLOSED else 1
    closed_at = s.closed_at if s.closed_at is not None else 2**63
    return (s.opened_at, closed_rank, closed_at)


def join_session(a: Session, b: Session) -> Session:
    """Keep the earliest-opened copy of one session; closed beats open."""
    return a if _session_order(a) <= _session_order(b) else b


def merge_state(a: ReplicaState, b: ReplicaState) -> ReplicaState:
    """Key-wise union of two replicas; overlaps resolved by join_record."""
    records = dict(a.records)
    for key, record in b.records.items():
        current = records.get(key)
        records[key] = record if current is None else join_record(current, record)
    sessions = dict(a.sessions)
    for key, session in b.sessions.items():
        current = sessions.get(key)
        sessions[key] = session if current is None else join_session(current, session)
    return ReplicaState(a.device_id, records, sessions)


def merge_counts(local: ReplicaState, merged: ReplicaState) -> tuple[int, int]:
    """(added, replaced) record counts going from local to merged."""
    added = replaced = 0
    for key, record in merged.records.items():
        current = local.records.get(key)
        if current is None:
            added += 1
        elif current != record:
            replaced += 1
    return added, replaced


def handshake(local: Hello, remote: Hello) -> PairingAccepted:
    """Gate the exchange on the shared pairing token.

    The token stands in for the physical touch-to-pair authentication;
    equality only, no cryptography.
    """
    if (
        local.protocol_version != PROTOCOL_VERSION
        or remote.protocol_version != PROTOCOL_VERSION
    ):
        raise VersionMismatch(
            f"protocol versions {local.protocol_version} vs {remote.protocol_version}"
        )
    if local.pairing_token != remote.pairing_token:
        raise TokenMismatch("pairing tokens differ")
    return PairingAccepted(local.device_id, remote.device_id)


# --- message codecs (dict form ready for wire framing) ---


def hello_message(device_id: str, token: str) -> dict[str, Any]:
    return {
        "type": "hello",
        "protocol_version": PROTOCOL_VERSION,
        "device_id": device_id,
        "pairing_token": token,
    }


def state_message(replica: ReplicaState) -> dict[str, Any]:
    return {
        "type": "state",
        "device_id": replica.device_id,
        "records": [
            [r.lecture_id, r.date, r.student_id, r.code, r.recorded_at, r.device_id]
            for r in sorted(replica.records.values(), key=lambda r: r.key)
        ],
        "sessions": [
            [
                s.lecture_id,
                s.date,
                s.device_id,
                s.opened_at,
                s.closed_at,
                s.status.value,
            ]
            for s in sorted(replica.sessions.values(), key=lambda s: s.key)
        ],
    }


def ack_message(merged_count: int) -> dict[str, Any]:
    return {"type": "ack", "merged_count": merged_count}


def parse_hello(message: dict[str, Any]) -> Hello:
    try:
        return Hello(
            int(message["protocol_version"]),
            str(message["device_id"]),
            str(message["pairing_token"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise TransportFailure(f"malformed hello: {exc}") from None


def parse_state(message: dict[str, Any]) -> ReplicaState:
    try:
        records = {}
        for lecture_id, date, student_id, code, recorded_at, device_id in message["records"]:
            record = AttendanceRecord(
                str(lecture_id),
                str(date),
                str(student_id),
                str(code),
                int(recorded_at),
                str(device_id),
            )
            records[record.key] = record
        sessions = {}
        for lecture_id, date, device_id, opened_at, closed_at, status in message["sessions"]:
            session = Session(
                str(lecture_id),
                str(date),
                str(device_id),
                int(opened_at),
                None if closed_at is None else int(closed_at),
                SessionStatus(status),
            )
            sessions[session.key] = session
        return ReplicaState(str(message["device_id"]), records, sessions)
    except (KeyError, TypeError, ValueError) as exc:
        raise TransportFailure(f"malformed state: {exc}") from None


def parse_ack(message: dict[str, Any]) -> Ack:
    try:
        return Ack(int(message["merged_count"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise TransportFailure(f"malformed ack: {exc}") from None


# --- exchange protocol ---


class ExchangeEndpoint:
    """One side of the pairwise exchange, as an event-driven machine.

    Message flow per endpoint: send hello; on peer hello, send state; on
    peer state, send ack. The merged result is applied only after hello,
    state, and ack have all arrived, so a failed exchange leaves the
    local replica untouched. Duplicate and reordered messages are
    tolerated: each message type is consumed at most once.
    """

    def __init__(self, local: ReplicaState, token: str):
        self.local = local
        self.token = token
        self._hello = Hello(PROTOCOL_VERSION, local.device_id, token)
        self._peer_hello: Hello | None = None
        self._peer_state: ReplicaState | None = None
        self._peer_ack: Ack | None = None
        self._early_state: dict[str, Any] | None = None
        self._sent_state = False
        self._sent_ack = False
        self._pending: ReplicaState | None = None
        self.result: ReplicaState | None = None
        self.merged_count: int | None = None

    @property
    def done(self) -> bool:
        return self.result is not None

    def start(self) -> list[dict[str, Any]]:
        return [hello_message(self.local.device_id, self.token)]

    def on_message(self, message: dict[str, Any]) -> list[dict[str, Any]]:
        kind = message.get("type")
        if kind == "hello":
            if self._peer_hello is None:
                self._peer_hello = parse_hello(message)
                handshake(self._hello, self._peer_hello)
                if self._early_state is not None:
                    self._peer_state = parse_state(self._early_state)
                    self._early_state = None
        elif kind == "state":
            if self._peer_hello is None:
                # reordered delivery: hold until the handshake clears it
                self._early_state = message
            elif self._peer_state is None:
                self._peer_state = parse_state(message)
        elif kind == "ack":
            if self._peer_ack is None:
                self._peer_ack = parse_ack(message)
        else:
            raise TransportFailure(f"unexpected message type {kind!r}")
        return self._advance()

    def _advance(self) -> list[dict[str, Any]]:
        out: list[dict[str, Any]] = []
        if self._peer_hello is not None and not self._sent_state:
            out.append(state_message(self.local))
            self._sent_state = True
        if self._peer_state is not None and not self._sent_ack:
            merged = merge_state(self.local, self._peer_state)
            added, replaced = merge_counts(self.local, merged)
            self._pending = merged
            self.merged_count = added + replaced
            out.append(ack_message(self.merged_count))
            self._sent_ack = True
        if (
            self.result is None
            and self._peer_state is not None
            and self._peer_ack is not None
            and self._sent_ack
        ):
            self.result = self._pending
        return out


class Transport(Protocol):
    """Whole-message channel carrying wire-framed bytes."""

    def send(self, frame: bytes) -> None: ...

    def recv(self) -> bytes: ...


class QueueTransport:
    """One side of an in-process duplex channel built on two queues."""

    def __init__(self, inbox: queue.Queue, outbox: queue.Queue, timeout: float = 1.0):
        self.inbox = inbox
        self.outbox = outbox
        self.timeout = timeout

    def send(self, frame: bytes) -> None:
        self.outbox.put(frame)

    def recv(self) -> bytes:
        try:
            return self.inbox.get(timeout=self.timeout)
        except queue.Empty:
            raise TransportFailure("timed out waiting for peer message") from None


def transport_pair(timeout: float = 1.0) -> tuple[QueueTransport, QueueTransport]:
    a_to_b: queue.Queue = queue.Queue()
    b_to_a: queue.Queue = queue.Queue()
    return (
        QueueTransport(b_to_a, a_to_b, timeout),
        QueueTransport(a_to_b, b_to_a, timeout),
    )


def run_exchange(transport: Transport, local: ReplicaState, token: str) -> ReplicaState:
    """Drive one endpoint over a transport until the merge completes.

    Raises TokenMismatch / VersionMismatch on a failed handshake and
    TransportFailure on loss or garbage; in every failure case the
    caller's replica is unchanged.
    """
    endpoint = ExchangeEndpoint(local, token)
    for message in endpoint.start():
        transport.send(encode_frame(message))
    while not endpoint.done:
        frame = transport.recv()
        for message in decode_frames(frame):
            for reply in endpoint.on_message(message):
                transport.send(encode_frame(reply))
    assert endpoint.result is not None
    return endpoint.result


def write_state_file(replica: ReplicaState, path, token: str = "") -> None:
    """State payload written to a file for offline merge, wire-framed."""
    frames = encode_frame(hello_message(replica.device_id, token)) + encode_frame(
        state_message(replica)
    )
    with open(path, "wb") as fh:
        fh.write(frames)


def read_state_file(path) -> ReplicaState:
    with open(path, "rb") as fh:
        data = fh.read()
    for message in decode_frames(data):
        if message.get("type") == "state":
            return parse_state(message)
    raise TransportFailure(f"no state message in {path}")
