"""HTTP API for the live console and batch clients.

Thin wrappers over the domain modules: every state change goes through
the same operations the CLI uses, and module errors map 1:1 onto HTTP
statuses (400 malformed, 404 unknown entity, 409 state conflicts, 403
refused pairing).
"""

from __future__ import annotations

from typing import Any, Optional

from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse
from pydantic import BaseModel

from .. import errors
from ..ledger import TapOutcome
from ..tagid import parse_canonical
from .service import AttendanceService

_STATUS_BY_ERROR: list[tuple[type[Exception], int]] = [
    (errors.MalformedCsv, 400),
    (errors.MalformedInput, 400),
    (errors.InvalidHex, 400),
    (errors.InvalidLength, 400),
    (errors.MalformedScenario, 400),
    (errors.CorruptFile, 400),
    (errors.CorruptSnapshot, 400),
    (errors.ChecksumMismatch, 400),
    (errors.UnknownLecture, 404),
    (errors.UnknownStudent, 404),
    (errors.UnknownSession, 404),
    (errors.NoMatchingAbsence, 404),
    (errors.NoSnapshot, 404),
    (errors.SessionAlreadyOpen, 409),
    (errors.SessionClosed, 409),
    (errors.TagAlreadyBound, 409),
    (errors.StudentAlreadyBound, 409),
    (errors.DuplicateLecture, 409),
    (errors.TokenMismatch, 403),
    (errors.VersionMismatch, 403),
    (errors.TransportFailure, 502),
    (errors.IoFailure, 500),
]


def _status_for(exc: Exception) -> int:
    for err_type, status in _STATUS_BY_ERROR:
        if isinstance(exc, err_type):
            return status
    return 500


class LectureIn(BaseModel):
    lecture_id: str
    title: str = ""
    teacher: str = ""
    planned_sessions: int = 15
    consecutive_yellow: Optional[int] = None
    many_yellow: Optional[int] = None
    red_absence_limit: Optional[int] = None


class SessionIn(BaseModel):
    lecture_id: str
    date: str
    at: Optional[int] = None


class TapIn(BaseModel):
    tag: str
    at: Optional[int] = None


class BindIn(BaseModel):
    student_id: str
    tag: str
    overwrite: bool = False


class MergeIn(BaseModel):
    peer_file: Optional[str] = None
    peer_address: Optional[str] = None
    token: str = ""


class ReasonIn(BaseModel):
    lecture_id: str
    student_id: str
    date: str
    reason_text: str


class CloseIn(BaseModel):
    at: Optional[int] = None


def _tap_outcome_json(outcome: TapOutcome) -> dict[str, Any]:
    if outcome.unknown_tag:
        return {"outcome": "unknown_tag", "duplicate": False}
    return {
        "outcome": "ok",
        "student_id": outcome.student.student_id,
        "display_name": outcome.student.display_name,
        "alert": outcome.alert.label,
        "duplicate": outcome.duplicate,
    }


def create_app(service: AttendanceService) -> FastAPI:
    app = FastAPI(title="attendance gateway", version="1")

    @app.exception_handler(errors.AmsError)
    async def _ams_error(request: Request, exc: errors.AmsError) -> JSONResponse:
        return JSONResponse(
            status_code=_status_for(exc),
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.post("/lectures")
    def add_lecture(body: LectureIn) -> dict[str, Any]:
        alert = None
        if any(
            v is not None
            for v in (body.consecutive_yellow, body.many_yellow, body.red_absence_limit)
        ):
            from ..ledger import AlertConfig

            alert = AlertConfig(
                body.consecutive_yellow or 2,
                body.many_yellow or 3,
                body.red_absence_limit,
            )
        lecture = service.add_lecture(
            body.lecture_id, body.title, body.teacher, body.planned_sessions, alert
        )
        return {
            "lecture_id": lecture.lecture_id,
            "title": lecture.title,
            "teacher": lecture.teacher,
            "planned_sessions": lecture.planned_sessions,
        }

    @app.post("/lectures/{lecture_id}/roster")
    async def ingest_roster(lecture_id: str, request: Request) -> dict[str, Any]:
        csv_text = (await request.body()).decode("utf-8")
        report = service.ingest_roster(lecture_id, csv_text)
        return {
            "accepted": report.accepted,
            "rejected": [
                {"row": r.row, "student_id": r.student_id, "reason": r.reason}
                for r in report.rejected
            ],
        }

    @app.post("/bindings")
    def bind(body: BindIn) -> dict[str, Any]:
        binding = service.bind_card(
            body.student_id, parse_canonical(body.tag), body.overwrite
        )
        return {"student_id": binding.student_id, "tag": binding.tag.canonical()}

    @app.post("/sessions")
    def open_session(body: SessionIn) -> dict[str, Any]:
        key, session = service.open_session(body.lecture_id, body.date, body.at)
        return {
            "key": key,
            "lecture_id": session.lecture_id,
            "date": session.date,
            "device_id": session.device_id,
            "opened_at": session.opened_at,
            "status": session.status.value,
        }

    @app.post("/sessions/{key}/taps")
    def tap(key: str, body: TapIn) -> dict[str, Any]:
        outcome = service.record_tap(key, parse_canonical(body.tag), body.at)
        return _tap_outcome_json(outcome)

    @app.post("/sessions/{key}/close")
    def close(key: str, body: Optional[CloseIn] = None) -> dict[str, Any]:
        result = service.close_session(key, body.at if body else None)
        closure = result["closure"]
        composed = result["followups"]
        return {
            "lecture_id": closure.lecture_id,
            "date": closure.date,
            "absentees": list(closure.absentees),
            "followups_written": composed.sent,
            "followups_skipped": list(composed.skipped),
            "closed_at": closure.closed_at,
        }

    @app.get("/sessions/{key}/events")
    def event_stream(
        key: str,
        since: int = Query(-1),
        follow: bool = Query(False),
    ) -> Response:
        log = service.event_log(key)
        if not follow:
            body = "".join(frame.to_json() + "\n" for frame in log.since(since))
            return PlainTextResponse(body, media_type="application/x-ndjson")

        def generate():
            for frame in log.follow(since):
                yield frame.to_json() + "\n"

        return StreamingResponse(generate(), media_type="application/x-ndjson")

    @app.post("/merge")
    def merge(body: MergeIn) -> dict[str, int]:
        if body.peer_file:
            return service.merge_file(body.peer_file)
        if body.peer_address:
            return service.merge_with_peer(body.peer_address, body.token)
        raise errors.MalformedInput("merge needs peer_file or peer_address")

    @app.post("/sync")
    async def sync(request: Request) -> Response:
        frames = service.handle_sync_request(await request.body())
        return Response(content=frames, media_type="application/octet-stream")

    @app.get("/lectures/{lecture_id}/report")
    def report(lecture_id: str, min: int = Query(1, ge=1)) -> list[dict[str, Any]]:
        rows = service.report(lecture_id, min)
        return [
            {
                "student_id": row.student_id,
                "name1": row.name1,
                "name2": row.name2,
                "absent_count": row.absent_count,
            }
            for row in rows
        ]

    @app.get("/lectures/{lecture_id}/tabulation")
    def tabulation(lecture_id: str) -> Response:
        return PlainTextResponse(
            service.tabulation(lecture_id).to_csv(), media_type="text/csv"
        )

    @app.post("/absence-reasons")
    async def absence_reason(request: Request) -> dict[str, Any]:
        # the intake form may submit either JSON or a form-encoded body
        content_type = request.headers.get("content-type", "")
        if "json" in content_type:
            fields = await request.json()
        else:
            fields = dict(await request.form())
        try:
            body = ReasonIn(**fields)
        except Exception as exc:
            raise errors.MalformedInput(f"bad reason submission: {exc}") from None
        reason = service.ingest_reason(
            body.lecture_id, body.student_id, body.date, body.reason_text
        )
        return {
            "lecture_id": reason.lecture_id,
            "student_id": reason.student_id,
            "date": reason.date,
            "reason_text": reason.reason_text,
            "submitted_at": reason.submitted_at,
        }

    @app.get("/lectures/{lecture_id}/unexplained")
    def unexplained(lecture_id: str) -> list[dict[str, str]]:
        return [
            {"student_id": student_id, "date": date}
            for student_id, date in service.unexplained(lecture_id)
        ]

    @app.get("/lectures/{lecture_id}/roster")
    def roster_rows(lecture_id: str) -> list[dict[str, Any]]:
        state = service.state
        if lecture_id not in state.lectures:
            raise errors.UnknownLecture(f"unknown lecture {lecture_id!r}")
        rows = []
        for student_id in sorted(state.rosters.get(lecture_id, ())):
            student = state.students[student_id]
            rows.append(
                {
                    "student_id": student.student_id,
                    "display_name": student.display_name,
                    "email": student.email,
                    "photo_ref": student.photo_ref,
                    "tag": None if student.tag is None else student.tag.canonical(),
                }
            )
        return rows

    return app
