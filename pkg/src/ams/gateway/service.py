"""Application service: one device's state plus persistence, events,
and configuration, shared by the HTTP API and the CLI.

All mutations run under one lock and persist a snapshot before
returning, so every CLI invocation and API call sees durable state.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .. import errors, ledger, outreach, roster, store
from ..errors import (
    MalformedInput,
    TokenMismatch,
    TransportFailure,
    UnknownSession,
)
from ..ledger import AlertConfig, ClosureReport, Session, TapOutcome
from ..roster import IngestReport, Lecture
from ..state import AppState
from ..sync import (
    PROTOCOL_VERSION,
    Hello,
    ReplicaState,
    ack_message,
    handshake,
    hello_message,
    merge_counts,
    merge_state,
    parse_hello,
    parse_state,
    state_message,
)
from ..tagid import CanonicalTagId, parse_canonical
from ..wire import decode_frames, encode_frames
from . import events


@dataclass
class ServiceConfig:
    data_dir: Path
    device_id: str = "device-1"
    outbox_dir: Path | None = None  # default: <data_dir>/outbox
    base_form_url: str = "http://forms.local/absence"
    pairing_token: str = ""
    default_alert: AlertConfig = field(default_factory=AlertConfig)
    port: int = 8000

    def __post_init__(self) -> None:
        self.data_dir = Path(self.data_dir)
        if self.outbox_dir is None:
            self.outbox_dir = self.data_dir / "outbox"
        self.outbox_dir = Path(self.outbox_dir)

    @classmethod
    def from_env(cls, data_dir: str | Path | None = None) -> "ServiceConfig":
        env = os.environ
        directory = Path(data_dir or env.get("AMS_DATA_DIR", "./ams-data"))
        alert = AlertConfig(
            consecutive_yellow=int(env.get("AMS_ALERT_CONSECUTIVE", "2")),
            many_yellow=int(env.get("AMS_ALERT_MANY", "3")),
            red_absence_limit=(
                int(env["AMS_ALERT_RED"]) if env.get("AMS_ALERT_RED") else None
            ),
        )
        return cls(
            data_dir=directory,
            device_id=env.get("AMS_DEVICE_ID", "device-1"),
            outbox_dir=Path(env["AMS_OUTBOX_DIR"]) if env.get("AMS_OUTBOX_DIR") else None,
            base_form_url=env.get("AMS_BASE_FORM_URL", "http://forms.local/absence"),
            pairing_token=env.get("AMS_PAIRING_TOKEN", ""),
            default_alert=alert,
            port=int(env.get("AMS_PORT", "8000")),
        )


def session_key_str(lecture_id: str, date: str, device_id: str) -> str:
    return f"{lecture_id}:{date}:{device_id}"


def parse_session_key(key: str) -> tuple[str, str, str]:
    parts = key.split(":")
    if len(parts) != 3:
        raise MalformedInput(f"bad session key {key!r}, expected lecture:date:device")
    return parts[0], parts[1], parts[2]


class AttendanceService:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self._lock = threading.RLock()
        self._event_logs: dict[str, events.EventLog] = {}
        try:
            self.state = store.load(config.data_dir)
            # the snapshot's device identity wins over config defaults
            self.state.device_id = self.state.device_id or config.device_id
        except errors.NoSnapshot:
            self.state = AppState(device_id=config.device_id)

    # --- plumbing ---

    def _persist(self) -> None:
        store.save(self.state, self.config.data_dir)

    def event_log(self, key: str) -> events.EventLog:
        parse_session_key(key)
        with self._lock:
            if key not in self._event_logs:
                raise UnknownSession(f"no event stream for session {key!r}")
            return self._event_logs[key]

    def _emit(self, key: str, kind: str, payload: dict[str, Any]) -> None:
        log = self._event_logs.setdefault(key, events.EventLog())
        log.append(kind, payload)

    def _session(self, key: str) -> Session:
        lecture_id, date, device_id = parse_session_key(key)
        session = self.state.sessions.get((lecture_id, date, device_id))
        if session is None:
            raise UnknownSession(f"no session {key!r}")
        return session

    # --- lecture / roster ---

    def add_lecture(
        self,
        lecture_id: str,
        title: str,
        teacher: str,
        planned_sessions: int,
        alert: AlertConfig | None = None,
    ) -> Lecture:
        with self._lock:
            try:
                lecture = Lecture(lecture_id, title, teacher, planned_sessions)
            except ValueError as exc:
                raise MalformedInput(str(exc)) from None
            roster.add_lecture(self.state, lecture)
            self.state.alert_configs[lecture_id] = alert or self.config.default_alert
            self._persist()
            return lecture

    def ingest_roster(self, lecture_id: str, csv_text: str) -> IngestReport:
        with self._lock:
            report = roster.ingest_roster_csv(self.state, lecture_id, csv_text)
            self._persist()
            return report

    def bind_card(self, student_id: str, tag: CanonicalTagId, overwrite: bool = False):
        with self._lock:
            binding = roster.bind_card(self.state, student_id, tag, overwrite)
            self._persist()
            return binding

    def set_photo(self, student_id: str, photo_ref: str | None):
        with self._lock:
            student = roster.set_photo(self.state, student_id, photo_ref)
            self._persist()
            return student

    # --- sessions ---

    def open_session(
        self, lecture_id: str, date: str, at: int | None = None
    ) -> tuple[str, Session]:
        with self._lock:
            session = ledger.open_session(
                self.state, lecture_id, date, self.state.device_id, at
            )
            key = session_key_str(*session.key)
            self._emit(
                key,
                events.SESSION_OPENED,
                {
                    "lecture_id": session.lecture_id,
                    "date": session.date,
                    "device_id": session.device_id,
                    "opened_at": session.opened_at,
                },
            )
            self._persist()
            return key, session

    def record_tap(self, key: str, tag: CanonicalTagId, at: int | None = None) -> TapOutcome:
        with self._lock:
            session = self._session(key)
            outcome = ledger.record_tap(self.state, session, tag, at)
            payload: dict[str, Any] = {
                "tag": tag.canonical(),
                "duplicate": outcome.duplicate,
            }
            if outcome.unknown_tag:
                payload["outcome"] = "unknown_tag"
            else:
                payload["outcome"] = "ok"
                payload["student_id"] = outcome.student.student_id
                payload["display_name"] = outcome.student.display_name
                payload["photo_ref"] = outcome.student.photo_ref
                payload["alert"] = outcome.alert.label
            self._emit(key, events.TAP, payload)
            if outcome.alert is not None and outcome.alert is not ledger.AlertLevel.NORMAL:
                self._emit(
                    key,
                    events.ALERT,
                    {
                        "student_id": outcome.student.student_id,
                        "alert": outcome.alert.label,
                    },
                )
            self._persist()
            return outcome

    def close_session(self, key: str, at: int | None = None) -> dict[str, Any]:
        """Close roll call and write follow-up messages for absentees."""
        with self._lock:
            session = self._session(key)
            closure = ledger.close_session(self.state, session, at)
            composed = outreach.compose_followups(
                self.state, closure, self.config.outbox_dir, self.config.base_form_url
            )
            self._emit(
                key,
                events.SESSION_CLOSED,
                {
                    "lecture_id": closure.lecture_id,
                    "date": closure.date,
                    "absentees": list(closure.absentees),
                    "followups_written": composed.sent,
                    "followups_skipped": list(composed.skipped),
                    "closed_at": closure.closed_at,
                },
            )
            self._persist()
            return {
                "closure": closure,
                "followups": composed,
            }

    # --- reporting ---

    def tabulation(self, lecture_id: str) -> ledger.Tabulation:
        with self._lock:
            return ledger.tabulate(self.state, lecture_id)

    def report(self, lecture_id: str, min_absences: int = 1) -> list[store.ReportRow]:
        with self._lock:
            return store.absentee_report(self.state, lecture_id, min_absences)

    def unexplained(self, lecture_id: str) -> list[tuple[str, str]]:
        with self._lock:
            return outreach.unexplained_absences(self.state, lecture_id)

    def ingest_reason(
        self, lecture_id: str, student_id: str, date: str, reason_text: str
    ) -> outreach.ReasonRecord:
        with self._lock:
            reason = outreach.ingest_reason(
                self.state, lecture_id, student_id, date, reason_text
            )
            self._persist()
            return reason

    # --- merge ---

    def _apply_replica(self, merged: ReplicaState) -> tuple[int, int]:
        local = self.state.replica()
        added, replaced = merge_counts(local, merged)
        self.state.records = dict(merged.records)
        self.state.sessions = dict(merged.sessions)
        return added, replaced

    def _emit_merge(self, added: int, replaced: int, source: str) -> None:
        for log in self._event_logs.values():
            log.append(
                events.MERGE_COMPLETED,
                {"added": added, "replaced": replaced, "source": source},
            )

    def merge_file(self, path: str | Path) -> dict[str, int]:
        """Merge a peer's exchange or state file into this device."""
        with self._lock:
            try:
                data = Path(path).read_bytes()
            except OSError as exc:
                raise MalformedInput(f"cannot read {path}: {exc}") from None
            if data.startswith(store.EXCHANGE_MAGIC.encode("ascii")):
                exchange = store.parse_exchange_bytes(data)
                peer = exchange.replica
                for student_id, student in exchange.students.items():
                    self.state.students.setdefault(student_id, student)
            else:
                peer = None
                for message in decode_frames(data):
                    if message.get("type") == "state":
                        peer = parse_state(message)
                if peer is None:
                    raise TransportFailure(f"no state message in {path}")
            merged = merge_state(self.state.replica(), peer)
            added, replaced = self._apply_replica(merged)
            self._persist()
            self._emit_merge(added, replaced, str(path))
            return {"added": added, "replaced": replaced}

    def merge_with_peer(self, peer_url: str, token: str) -> dict[str, int]:
        """Exchange states with another gateway over HTTP.

        The request body carries wire-framed hello and state messages;
        the response carries the peer's hello, post-merge state, and ack.
        The local replica is only touched once the peer's state has been
        received and validated in full.
        """
        import httpx

        local = self.state.replica()
        body = encode_frames(
            [
                hello_message(local.device_id, token),
                state_message(local),
            ]
        )
        try:
            response = httpx.post(
                peer_url.rstrip("/") + "/sync",
                content=body,
                headers={"content-type": "application/octet-stream"},
                timeout=10.0,
            )
        except httpx.HTTPError as exc:
            raise TransportFailure(f"peer unreachable: {exc}") from None
        if response.status_code == 403:
            raise TokenMismatch("peer refused pairing token")
        if response.status_code != 200:
            raise TransportFailure(f"peer returned HTTP {response.status_code}")
        peer_hello = peer_state = None
        for message in decode_frames(response.content):
            if message.get("type") == "hello":
                peer_hello = parse_hello(message)
            elif message.get("type") == "state":
                peer_state = parse_state(message)
        if peer_hello is None or peer_state is None:
            raise TransportFailure("peer response missing hello or state")
        handshake(Hello(PROTOCOL_VERSION, local.device_id, token), peer_hello)
        with self._lock:
            merged = merge_state(self.state.replica(), peer_state)
            added, replaced = self._apply_replica(merged)
            self._persist()
            self._emit_merge(added, replaced, peer_url)
            return {"added": added, "replaced": replaced}

    def handle_sync_request(self, body: bytes) -> bytes:
        """Responder side of the HTTP exchange; returns response frames."""
        peer_hello = peer_state = None
        for message in decode_frames(body):
            if message.get("type") == "hello":
                peer_hello = parse_hello(message)
            elif message.get("type") == "state":
                peer_state = parse_state(message)
        if peer_hello is None or peer_state is None:
            raise TransportFailure("sync request missing hello or state")
        with self._lock:
            local_hello = Hello(
                PROTOCOL_VERSION, self.state.device_id, self.config.pairing_token
            )
            handshake(local_hello, peer_hello)
            merged = merge_state(self.state.replica(), peer_state)
            added, replaced = self._apply_replica(merged)
            self._persist()
            self._emit_merge(added, replaced, peer_hello.device_id)
            return encode_frames(
                [
                    hello_message(self.state.device_id, self.config.pairing_token),
                    state_message(self.state.replica()),
                    ack_message(added + replaced),
                ]
            )

    # --- files ---

    def export_exchange(self, destination: str | Path) -> Path:
        with self._lock:
            return store.export_exchange_file(self.state, destination)

    def backup_to(self, destination: str | Path) -> Path:
        with self._lock:
            store.write_backup(store.backup(self.state), destination)
            return Path(destination)

    def restore_from(self, source: str | Path) -> None:
        with self._lock:
            self.state = store.restore(store.read_backup(source))
            self._persist()
