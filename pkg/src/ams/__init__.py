"""Attendance ledger for card-tap roll call.

Teachers run live sessions from card taps, chronic non-attenders are
flagged as they tap in, several devices covering one class converge via
a peer-to-peer state merge, and absentee reports plus follow-up messages
come out the other end.
"""

from .errors import AmsError
from .ledger import (
    ABSENT,
    PRESENT,
    AlertConfig,
    AlertLevel,
    AttendanceRecord,
    Session,
    classify_alert,
    close_session,
    open_session,
    record_tap,
    tabulate,
)
from .roster import (
    Binding,
    IngestReport,
    Lecture,
    Student,
    add_lecture,
    bind_card,
    ingest_roster_csv,
    lookup_by_tag,
)
from .state import AppState
from .sync import ReplicaState, join_record, merge_state, run_exchange
from .tagid import CanonicalTagId, TagKind, canonical_hex, from_hex, parse_tag

__all__ = [
    "ABSENT",
    "PRESENT",
    "AlertConfig",
    "AlertLevel",
    "AmsError",
    "AppState",
    "AttendanceRecord",
    "Binding",
    "CanonicalTagId",
    "IngestReport",
    "Lecture",
    "ReplicaState",
    "Session",
    "Student",
    "TagKind",
    "add_lecture",
    "bind_card",
    "canonical_hex",
    "classify_alert",
    "close_session",
    "from_hex",
    "ingest_roster_csv",
    "join_record",
    "lookup_by_tag",
    "merge_state",
    "open_session",
    "parse_tag",
    "record_tap",
    "run_exchange",
    "tabulate",
]
