"""Roll-call sessions: tap events to attendance records, live alert
classification, session closure, and tabulation."""

from __future__ import annotations

import datetime as dt
import enum
import time
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

from .errors import (
    MalformedInput,
    SessionAlreadyOpen,
    SessionClosed,
    UnknownLecture,
)
from .roster import Student
from .tagid import CanonicalTagId

if TYPE_CHECKING:
    from .state import AppState

# Attendance codes as stored and reported; absent is '0', present is '1'.
PRESENT = "1"
ABSENT = "0"


def now_ms() -> int:
    """Current UTC time in epoch milliseconds."""
    return int(time.time() * 1000)


def check_date(date: str) -> str:
    """Validate a YYYY-MM-DD calendar date and return it unchanged."""
    try:
        parsed = dt.date.fromisoformat(date)
    except (ValueError, TypeError):
        raise MalformedInput(f"bad date {date!r}, expected YYYY-MM-DD") from None
    if parsed.isoformat() != date:
        raise MalformedInput(f"bad date {date!r}, expected YYYY-MM-DD")
    return date


class SessionStatus(enum.Enum):
    OPEN = "Open"
    CLOSED = "Closed"


@enum.unique
class AlertLevel(enum.IntEnum):
    """Chronic non-attendance levels, ordered by display precedence."""

    NORMAL = 0
    YELLOW_MANY = 1
    YELLOW_CONSECUTIVE = 2
    RED_NO_ACCREDITATION = 3

    @property
    def label(self) -> str:
        return _ALERT_LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "AlertLevel":
        for level, name in _ALERT_LABELS.items():
            if name == label:
                return level
        raise MalformedInput(f"unknown alert level {label!r}")


_ALERT_LABELS = {
    AlertLevel.NORMAL: "Normal",
    AlertLevel.YELLOW_MANY: "YellowMany",
    AlertLevel.YELLOW_CONSECUTIVE: "YellowConsecutive",
    AlertLevel.RED_NO_ACCREDITATION: "RedNoAccreditation",
}


@dataclass(frozen=True)
class AlertConfig:
    """Per-lecture alert thresholds.

    ``red_absence_limit=None`` means the credit-loss limit defaults to
    one third of the planned meetings plus one.
    """

    consecutive_yellow: int = 2
    many_yellow: int = 3
    red_absence_limit: int | None = None

    def __post_init__(self) -> None:
        if self.consecutive_yellow < 1 or self.many_yellow < 1:
            raise ValueError("alert thresholds must be >= 1")
        if self.red_absence_limit is not None and self.red_absence_limit < 1:
            raise ValueError("red_absence_limit must be >= 1")

    def red_limit(self, planned_sessions: int) -> int:
        if self.red_absence_limit is not None:
            return self.red_absence_limit
        return planned_sessions // 3 + 1


@dataclass
class Session:
    """One dated class meeting as seen by one device."""

    lecture_id: str
    date: str
    device_id: str
    opened_at: int
    closed_at: int | None = None
    status: SessionStatus = SessionStatus.OPEN

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.lecture_id, self.date, self.device_id)


@dataclass(frozen=True)
class AttendanceRecord:
    """The unit of merge: one student's attendance at one class meeting."""

    lecture_id: str
    date: str
    student_id: str
    code: str  # PRESENT or ABSENT
    recorded_at: int  # epoch ms
    device_id: str

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.lecture_id, self.date, self.student_id)


@dataclass(frozen=True)
class TapOutcome:
    student: Student | None
    alert: AlertLevel | None
    duplicate: bool = False

    @property
    def unknown_tag(self) -> bool:
        return self.student is None


@dataclass(frozen=True)
class ClosureReport:
    lecture_id: str
    date: str
    device_id: str
    absentees: tuple[str, ...]  # sorted student ids
    closed_at: int


@dataclass(frozen=True)
class TabulationRow:
    student_id: str
    cells: tuple[str, ...]  # PRESENT, ABSENT, or "" for no record
    present: int


@dataclass(frozen=True)
class Tabulation:
    lecture_id: str
    dates: tuple[str, ...]
    rows: tuple[TabulationRow, ...]
    date_totals: tuple[int, ...]  # presents per date
    total_present: int

    def to_csv(self) -> str:
        lines = ["student_id," + ",".join(self.dates) + ",present"]
        for row in self.rows:
            lines.append(row.student_id + "," + ",".join(row.cells) + f",{row.present}")
        totals = ",".join(str(n) for n in self.date_totals)
        lines.append(f"present,{totals},{self.total_present}")
        return "".join(line + "\n" for line in lines)


def open_session(
    state: AppState,
    lecture_id: str,
    date: str,
    device_id: str | None = None,
    at: int | None = None,
) -> Session:
    """Start roll call for one (lecture, date) on this device."""
    if lecture_id not in state.lectures:
        raise UnknownLecture(f"unknown lecture {lecture_id!r}")
    check_date(date)
    device_id = device_id or state.device_id
    key = (lecture_id, date, device_id)
    if key in state.sessions:
        raise SessionAlreadyOpen(f"session {key} already exists")
    session = Session(lecture_id, date, device_id, opened_at=now_ms() if at is None else at)
    state.sessions[key] = session
    return session


def student_history(
    state: AppState, lecture_id: str, student_id: str, before: str | None = None
) -> list[AttendanceRecord]:
    """This student's records for one lecture, sorted by date ascending.

    ``before`` keeps only records dated strictly earlier, which is how
    tap-time alerts ignore the still-open session.
    """
    records = [
        r
        for r in state.records.values()
        if r.lecture_id == lecture_id
        and r.student_id == student_id
        and (before is None or r.date < before)
    ]
    records.sort(key=lambda r: r.date)
    return records


def classify_alert(
    history: Sequence[AttendanceRecord],
    planned_sessions: int,
    config: AlertConfig | None = None,
) -> AlertLevel:
    """Alert level from one student's history (dates ascending, distinct).

    Red when total absences reach the credit-loss limit; otherwise yellow
    for a long-enough trailing run of absences, then for many absences in
    total. Pure function.
    """
    config = config or AlertConfig()
    absences = sum(1 for r in history if r.code == ABSENT)
    if absences >= config.red_limit(planned_sessions):
        return AlertLevel.RED_NO_ACCREDITATION
    trailing = 0
    for record in reversed(history):
        if record.code != ABSENT:
            break
        trailing += 1
    if trailing >= config.consecutive_yellow:
        return AlertLevel.YELLOW_CONSECUTIVE
    if absences >= config.many_yellow:
        return AlertLevel.YELLOW_MANY
    return AlertLevel.NORMAL


def record_tap(
    state: AppState,
    session: Session,
    tag: CanonicalTagId,
    at: int | None = None,
) -> TapOutcome:
    """Turn a card tap into a Present record plus a live alert.

    Unknown cards are a reportable outcome, not an error: roll call must
    keep flowing while the teacher deals with the card. The alert is
    computed from records dated strictly before the session date.
    """
    if session.status is SessionStatus.CLOSED:
        raise SessionClosed(f"session {session.key} is closed")
    student_id = state.tag_index.get(tag)
    if student_id is None:
        return TapOutcome(student=None, alert=None)
    student = state.students[student_id]

    history = student_history(state, session.lecture_id, student_id, before=session.date)
    planned = state.lectures[session.lecture_id].planned_sessions
    alert = classify_alert(history, planned, state.alert_config(session.lecture_id))

    key = (session.lecture_id, session.date, student_id)
    existing = state.records.get(key)
    if existing is not None and existing.code == PRESENT:
        return TapOutcome(student, alert, duplicate=True)
    state.records[key] = AttendanceRecord(
        session.lecture_id,
        session.date,
        student_id,
        PRESENT,
        now_ms() if at is None else at,
        session.device_id,
    )
    return TapOutcome(student, alert, duplicate=False)


def close_session(state: AppState, session: Session, at: int | None = None) -> ClosureReport:
    """End roll call: materialize Absent records for everyone who never
    tapped, so the merge protocol has explicit elements to reconcile."""
    if session.status is SessionStatus.CLOSED:
        raise SessionClosed(f"session {session.key} is already closed")
    closed_at = now_ms() if at is None else at
    absentees = []
    for student_id in sorted(state.rosters.get(session.lecture_id, ())):
        key = (session.lecture_id, session.date, student_id)
        record = state.records.get(key)
        if record is None:
            record = AttendanceRecord(
                session.lecture_id,
                session.date,
                student_id,
                ABSENT,
                closed_at,
                session.device_id,
            )
            state.records[key] = record
        if record.code == ABSENT:
            absentees.append(student_id)
    session.status = SessionStatus.CLOSED
    session.closed_at = closed_at
    return ClosureReport(
        session.lecture_id, session.date, session.device_id, tuple(absentees), closed_at
    )


def tabulate(state: AppState, lecture_id: str) -> Tabulation:
    """Attendance matrix: students by rows, session dates by columns."""
    if lecture_id not in state.lectures:
        raise UnknownLecture(f"unknown lecture {lecture_id!r}")
    dates = sorted(
        {s.date for s in state.sessions.values() if s.lecture_id == lecture_id}
        | {r.date for r in state.records.values() if r.lecture_id == lecture_id}
    )
    student_ids = sorted(
        set(state.rosters.get(lecture_id, ()))
        | {r.student_id for r in state.records.values() if r.lecture_id == lecture_id}
    )
    rows = []
    date_totals = [0] * len(dates)
    for student_id in student_ids:
        cells = []
        for i, date in enumerate(dates):
            record = state.records.get((lecture_id, date, student_id))
            cells.append("" if record is None else record.code)
            if record is not None and record.code == PRESENT:
                date_totals[i] += 1
        rows.append(
            TabulationRow(student_id, tuple(cells), sum(1 for c in cells if c == PRESENT))
        )
    return Tabulation(
        lecture_id,
        tuple(dates),
        tuple(rows),
        tuple(date_totals),
        sum(date_totals),
    )
