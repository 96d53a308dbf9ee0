"""Follow-up messages for absentees and absence-reason intake.

There is no mail transport: messages become files in an outbox directory,
and the reason form is a local intake endpoint with the same fields.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING
from urllib.parse import urlencode

from .errors import NoMatchingAbsence, UnknownLecture
from .ledger import ABSENT, ClosureReport, now_ms

if TYPE_CHECKING:
    from .state import AppState


@dataclass(frozen=True)
class FollowupMessage:
    to_email: str
    subject: str
    body: str
    url: str
    created_at: int
    filename: str

    def render(self) -> str:
        """Outbox file format: To and Subject headers, blank line, body."""
        return f"To: {self.to_email}\nSubject: {self.subject}\n\n{self.body}"


@dataclass(frozen=True)
class ComposeResult:
    messages: tuple[FollowupMessage, ...]
    skipped: tuple[str, ...]  # absentees with no usable email address

    @property
    def sent(self) -> int:
        return len(self.messages)


@dataclass(frozen=True)
class ReasonRecord:
    lecture_id: str
    student_id: str
    date: str
    reason_text: str
    submitted_at: int

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.lecture_id, self.student_id, self.date)


def followup_url(lecture_id: str, student_id: str, date: str, base: str) -> str:
    """Individualized confirmation-form URL; injective over its inputs."""
    query = urlencode([("class", lecture_id), ("sid", student_id), ("date", date)])
    return f"{base}?{query}"


def _absence_count(state: AppState, lecture_id: str, student_id: str) -> int:
    return sum(
        1
        for r in state.records.values()
        if r.lecture_id == lecture_id
        and r.student_id == student_id
        and r.code == ABSENT
    )


def compose_followups(
    state: AppState,
    closure: ClosureReport,
    outbox_dir: str | Path,
    base_url: str,
) -> ComposeResult:
    """Write one follow-up message per absentee of a closed session.

    Absentees without an email address are skipped and reported rather
    than failing the whole closure.
    """
    outbox = Path(outbox_dir)
    outbox.mkdir(parents=True, exist_ok=True)
    lecture = state.lectures[closure.lecture_id]

    messages: list[FollowupMessage] = []
    skipped: list[str] = []
    for student_id in closure.absentees:
        student = state.students.get(student_id)
        if student is None or not student.email:
            skipped.append(student_id)
            continue
        url = followup_url(closure.lecture_id, student_id, closure.date, base_url)
        count = _absence_count(state, closure.lecture_id, student_id)
        subject = f"[{lecture.title}] Absence on {closure.date}"
        body = (
            f"{student.display_name},\n"
            f"\n"
            f"You were recorded absent from {lecture.title} on {closure.date}.\n"
            f"Your recorded absences for this class so far: {count}.\n"
            f"\n"
            f"Please confirm this absence and send the reason here:\n"
            f"{url}\n"
        )
        message = FollowupMessage(
            to_email=student.email,
            subject=subject,
            body=body,
            url=url,
            created_at=closure.closed_at,
            filename=f"{closure.date}_{closure.lecture_id}_{student_id}.eml",
        )
        (outbox / message.filename).write_text(message.render(), encoding="utf-8")
        messages.append(message)
    return ComposeResult(tuple(messages), tuple(skipped))


def ingest_reason(
    state: AppState,
    lecture_id: str,
    student_id: str,
    date: str,
    reason_text: str,
    at: int | None = None,
) -> ReasonRecord:
    """Store a student's absence reason; latest submission wins, every
    submission is kept in the audit list."""
    record = state.records.get((lecture_id, date, student_id))
    if record is None or record.code != ABSENT:
        raise NoMatchingAbsence(
            f"no absent record for student {student_id!r} in {lecture_id!r} on {date}"
        )
    reason = ReasonRecord(
        lecture_id, student_id, date, reason_text, now_ms() if at is None else at
    )
    state.reasons[reason.key] = reason
    state.reason_audit.append(reason)
    return reason


def unexplained_absences(state: AppState, lecture_id: str) -> list[tuple[str, str]]:
    """(student_id, date) pairs of absences with no reason yet, sorted."""
    if lecture_id not in state.lectures:
        raise UnknownLecture(f"unknown lecture {lecture_id!r}")
    absent_keys = {
        (r.student_id, r.date)
        for r in state.records.values()
        if r.lecture_id == lecture_id and r.code == ABSENT
    }
    explained = {
        (reason.student_id, reason.date)
        for reason in state.reasons.values()
        if reason.lecture_id == lecture_id
    }
    return sorted(absent_keys - explained)
