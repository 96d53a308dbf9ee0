"""Persistence and reporting: snapshots, backups, exchange files, and the
absentee report for the educational-affairs workflow.

The absentee report runs as an actual SQL query over an in-memory
relational view (Student and Attend tables), which is exactly how the
affairs side consumes the data; the test suite checks it against an
independent pure-Python aggregation.
"""

from __future__ import annotations

import json
import os
import sqlite3
import tempfile
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import (
    ChecksumMismatch,
    CorruptFile,
    CorruptSnapshot,
    IoFailure,
    NoSnapshot,
    UnknownLecture,
)
from .ledger import ABSENT, AlertConfig, AttendanceRecord, Session, SessionStatus
from .outreach import ReasonRecord
from .roster import Lecture, Student
from .state import AppState
from .sync import ReplicaState, merge_state
from .tagid import parse_canonical

SNAPSHOT_MAGIC = "ams-snapshot/1"
BACKUP_MAGIC = "ams-backup/1"
EXCHANGE_MAGIC = "ams-exchange/1"
SNAPSHOT_FILENAME = "snapshot.ams"

BACKUP_FORMAT_VERSION = 1


@dataclass(frozen=True)
class BackupArchive:
    format_version: int
    payload: bytes
    checksum: int  # CRC-32 of payload

    def to_bytes(self) -> bytes:
        header = f"{BACKUP_MAGIC}\ncrc32={self.checksum:08x}\n".encode("ascii")
        return header + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "BackupArchive":
        magic, _, rest = data.partition(b"\n")
        if magic.decode("ascii", errors="replace") != BACKUP_MAGIC:
            raise ChecksumMismatch("not a backup archive")
        crc_line, _, payload = rest.partition(b"\n")
        if not crc_line.startswith(b"crc32="):
            raise ChecksumMismatch("missing checksum header")
        try:
            checksum = int(crc_line[len(b"crc32=") :], 16)
        except ValueError:
            raise ChecksumMismatch("unreadable checksum header") from None
        return cls(BACKUP_FORMAT_VERSION, payload, checksum)


@dataclass(frozen=True)
class ReportRow:
    student_id: str
    name1: str
    name2: str
    absent_count: int


# --- canonical state serialization ---


def state_to_bytes(state: AppState) -> bytes:
    """Canonical JSON bytes: sorted keys and rows, so equal states always
    serialize identically."""
    doc = {
        "format_version": 1,
        "device_id": state.device_id,
        "lectures": [
            {
                "lecture_id": lecture.lecture_id,
                "title": lecture.title,
                "teacher": lecture.teacher,
                "planned_sessions": lecture.planned_sessions,
            }
            for _, lecture in sorted(state.lectures.items())
        ],
        "alert_configs": [
            {
                "lecture_id": lecture_id,
                "consecutive_yellow": config.consecutive_yellow,
                "many_yellow": config.many_yellow,
                "red_absence_limit": config.red_absence_limit,
            }
            for lecture_id, config in sorted(state.alert_configs.items())
        ],
        "students": [
            {
                "student_id": student.student_id,
                "name1": student.name1,
                "name2": student.name2,
                "email": student.email,
                "tag": None if student.tag is None else student.tag.canonical(),
                "photo_ref": student.photo_ref,
            }
            for _, student in sorted(state.students.items())
        ],
        "rosters": {
            lecture_id: sorted(ids) for lecture_id, ids in sorted(state.rosters.items())
        },
        "sessions": [
            [s.lecture_id, s.date, s.device_id, s.opened_at, s.closed_at, s.status.value]
            for _, s in sorted(state.sessions.items())
        ],
        "records": [
            [r.lecture_id, r.date, r.student_id, r.code, r.recorded_at, r.device_id]
            for _, r in sorted(state.records.items())
        ],
        "reasons": [
            [x.lecture_id, x.student_id, x.date, x.reason_text, x.submitted_at]
            for _, x in sorted(state.reasons.items())
        ],
        "reason_audit": [
            [x.lecture_id, x.student_id, x.date, x.reason_text, x.submitted_at]
            for x in state.reason_audit
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode(
        "utf-8"
    )


def state_from_bytes(data: bytes) -> AppState:
    try:
        doc = json.loads(data.decode("utf-8"))
        if doc["format_version"] != 1:
            raise ValueError(f"unsupported format_version {doc['format_version']}")
        state = AppState(device_id=doc["device_id"])
        for row in doc["lectures"]:
            state.lectures[row["lecture_id"]] = Lecture(
                row["lecture_id"], row["title"], row["teacher"], row["planned_sessions"]
            )
        for row in doc["alert_configs"]:
            state.alert_configs[row["lecture_id"]] = AlertConfig(
                row["consecutive_yellow"], row["many_yellow"], row["red_absence_limit"]
            )
        for row in doc["students"]:
            tag = None if row["tag"] is None else parse_canonical(row["tag"])
            student = Student(
                row["student_id"], row["name1"], row["name2"], row["email"], tag,
                row["photo_ref"],
            )
            state.students[student.student_id] = student
            if tag is not None:
                state.tag_index[tag] = student.student_id
        for lecture_id, ids in doc["rosters"].items():
            state.rosters[lecture_id] = set(ids)
        for lecture_id, date, device_id, opened_at, closed_at, status in doc["sessions"]:
            session = Session(
                lecture_id, date, device_id, opened_at, closed_at, SessionStatus(status)
            )
            state.sessions[session.key] = session
        for lecture_id, date, student_id, code, recorded_at, device_id in doc["records"]:
            record = AttendanceRecord(
                lecture_id, date, student_id, code, recorded_at, device_id
            )
            state.records[record.key] = record
        for lecture_id, student_id, date, text, submitted_at in doc["reasons"]:
            reason = ReasonRecord(lecture_id, student_id, date, text, submitted_at)
            state.reasons[reason.key] = reason
        for lecture_id, student_id, date, text, submitted_at in doc["reason_audit"]:
            state.reason_audit.append(
                ReasonRecord(lecture_id, student_id, date, text, submitted_at)
            )
        return state
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptSnapshot(f"unreadable state payload: {exc}") from None


# --- snapshot save/load ---


def _snapshot_path(data_dir: str | Path) -> Path:
    return Path(data_dir) / SNAPSHOT_FILENAME


def save(state: AppState, data_dir: str | Path) -> Path:
    """Atomically persist the full state: write to a temp file in the same
    directory, then rename over the previous snapshot."""
    directory = Path(data_dir)
    directory.mkdir(parents=True, exist_ok=True)
    payload = state_to_bytes(state)
    blob = _pack(SNAPSHOT_MAGIC, payload)
    target = _snapshot_path(directory)
    fd, tmp_name = tempfile.mkstemp(dir=directory, prefix=".snapshot-", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp_name, target)
    except OSError as exc:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise IoFailure(f"cannot write snapshot: {exc}") from None
    return target


def load(data_dir: str | Path) -> AppState:
    path = _snapshot_path(data_dir)
    if not path.exists():
        raise NoSnapshot(f"no snapshot in {data_dir}")
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read snapshot: {exc}") from None
    try:
        payload = _unpack(SNAPSHOT_MAGIC, blob)
    except (ChecksumMismatch, CorruptFile) as exc:
        raise CorruptSnapshot(str(exc)) from None
    return state_from_bytes(payload)


def _pack(magic: str, payload: bytes) -> bytes:
    checksum = zlib.crc32(payload) & 0xFFFFFFFF
    return f"{magic}\ncrc32={checksum:08x}\n".encode("ascii") + payload


def _unpack(magic: str, blob: bytes) -> bytes:
    head, _, rest = blob.partition(b"\n")
    if head.decode("ascii", errors="replace") != magic:
        raise CorruptFile(f"bad magic, expected {magic}")
    crc_line, sep, payload = rest.partition(b"\n")
    if not sep or not crc_line.startswith(b"crc32="):
        raise CorruptFile("missing checksum line")
    try:
        expected = int(crc_line[len(b"crc32=") :], 16)
    except ValueError:
        raise CorruptFile("unreadable checksum") from None
    if zlib.crc32(payload) & 0xFFFFFFFF != expected:
        raise ChecksumMismatch("payload does not match checksum")
    return payload


# --- backup / restore ---


def backup(state: AppState) -> BackupArchive:
    payload = state_to_bytes(state)
    return BackupArchive(BACKUP_FORMAT_VERSION, payload, zlib.crc32(payload) & 0xFFFFFFFF)


def restore(archive: BackupArchive) -> AppState:
    if zlib.crc32(archive.payload) & 0xFFFFFFFF != archive.checksum:
        raise ChecksumMismatch("backup payload does not match checksum")
    return state_from_bytes(archive.payload)


def write_backup(archive: BackupArchive, path: str | Path) -> None:
    try:
        Path(path).write_bytes(archive.to_bytes())
    except OSError as exc:
        raise IoFailure(f"cannot write backup: {exc}") from None


def read_backup(path: str | Path) -> BackupArchive:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read backup: {exc}") from None
    return BackupArchive.from_bytes(data)


# --- relational view and absentee report ---

_REPORT_SQL = """
SELECT Attend.student_id, name1, name2,
       SUM(CASE WHEN attend = '0' THEN 1 ELSE 0 END) AS absent
FROM Attend, Student
WHERE Attend.student_id = Student.student_id AND lecture_id = :lecture_id
GROUP BY Attend.student_id
HAVING SUM(CASE WHEN attend = '0' THEN 1 ELSE 0 END) >= :min_absences
ORDER BY Attend.student_id
"""


def relational_view(state: AppState) -> sqlite3.Connection:
    """In-memory Student/Attend tables mirroring the report schema."""
    conn = sqlite3.connect(":memory:")
    conn.execute(
        "CREATE TABLE Student (student_id TEXT PRIMARY KEY, name1 TEXT, name2 TEXT, email TEXT)"
    )
    conn.execute(
        "CREATE TABLE Attend (student_id TEXT, lecture_id TEXT, date TEXT, attend TEXT,"
        " PRIMARY KEY (student_id, lecture_id, date))"
    )
    conn.executemany(
        "INSERT INTO Student VALUES (?, ?, ?, ?)",
        [(s.student_id, s.name1, s.name2, s.email) for s in state.students.values()],
    )
    conn.executemany(
        "INSERT INTO Attend VALUES (?, ?, ?, ?)",
        [(r.student_id, r.lecture_id, r.date, r.code) for r in state.records.values()],
    )
    conn.commit()  # leaving a transaction open would stall the backup API
    return conn


def absentee_report(
    state: AppState, lecture_id: str, min_absences: int = 1
) -> list[ReportRow]:
    """Students of one lecture with at least ``min_absences`` absences,
    with their absence counts, ordered by student id."""
    if lecture_id not in state.lectures:
        raise UnknownLecture(f"unknown lecture {lecture_id!r}")
    if min_absences < 1:
        raise ValueError("min_absences must be >= 1")
    conn = relational_view(state)
    try:
        rows = conn.execute(
            _REPORT_SQL, {"lecture_id": lecture_id, "min_absences": min_absences}
        ).fetchall()
    finally:
        conn.close()
    return [ReportRow(sid, n1, n2, int(count)) for sid, n1, n2, count in rows]


def export_sqlite(state: AppState, path: str | Path) -> None:
    """Optional single-file relational dump for tools that speak SQL."""
    target = Path(path)
    if target.exists():
        target.unlink()
    mem = relational_view(state)
    try:
        disk = sqlite3.connect(target)
        try:
            mem.backup(disk)
        finally:
            disk.close()
    finally:
        mem.close()


# --- exchange file (line-oriented relational dump) ---


_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}


def _escape(value: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in value)


def _unescape(value: str) -> str:
    out = []
    i = 0
    while i < len(value):
        ch = value[i]
        if ch == "\\" and i + 1 < len(value):
            nxt = value[i + 1]
            mapped = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}.get(nxt)
            if mapped is not None:
                out.append(mapped)
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)


@dataclass
class ExchangeData:
    """Parsed contents of an exchange file."""

    students: dict[str, Student]
    replica: ReplicaState


def exchange_bytes(
    students: Iterable[Student], records: Iterable[AttendanceRecord]
) -> bytes:
    """Serialize the relational dump; deterministic for equal content."""
    lines = [EXCHANGE_MAGIC, "[student]"]
    for student in sorted(students, key=lambda s: s.student_id):
        lines.append(
            "\t".join(
                _escape(v)
                for v in (student.student_id, student.name1, student.name2, student.email)
            )
        )
    lines.append("[attend]")
    for record in sorted(records, key=lambda r: (r.student_id, r.lecture_id, r.date)):
        lines.append(
            "\t".join(
                (
                    _escape(record.student_id),
                    _escape(record.lecture_id),
                    record.date,
                    record.code,
                    str(record.recorded_at),
                    _escape(record.device_id),
                )
            )
        )
    body = "".join(line + "\n" for line in lines).encode("utf-8")
    checksum = zlib.crc32(body) & 0xFFFFFFFF
    return body + f"#crc32={checksum:08x}\n".encode("ascii")


def export_exchange_file(state: AppState, destination: str | Path) -> Path:
    """Write the full relational dump reported to the affairs section."""
    path = Path(destination)
    try:
        path.write_bytes(exchange_bytes(state.students.values(), state.records.values()))
    except OSError as exc:
        raise IoFailure(f"cannot write exchange file: {exc}") from None
    return path


def parse_exchange_bytes(data: bytes) -> ExchangeData:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorruptFile(f"not UTF-8: {exc}") from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise CorruptFile("empty exchange file")
    if not lines[-1].startswith("#crc32="):
        raise CorruptFile("missing checksum line")
    body = "".join(line + "\n" for line in lines[:-1]).encode("utf-8")
    try:
        expected = int(lines[-1][len("#crc32=") :], 16)
    except ValueError:
        raise CorruptFile("unreadable checksum") from None
    if zlib.crc32(body) & 0xFFFFFFFF != expected:
        raise CorruptFile("checksum mismatch")
    if lines[0] != EXCHANGE_MAGIC:
        raise CorruptFile(f"unknown format version {lines[0]!r}")

    students: dict[str, Student] = {}
    records: dict[tuple[str, str, str], AttendanceRecord] = {}
    section = None
    for line in lines[1:-1]:
        if line in ("[student]", "[attend]"):
            section = line
            continue
        fields = [_unescape(f) for f in line.split("\t")]
        if section == "[student]":
            if len(fields) != 4:
                raise CorruptFile(f"bad student row: {line!r}")
            student = Student(*fields)
            students[student.student_id] = student
        elif section == "[attend]":
            if len(fields) != 6:
                raise CorruptFile(f"bad attend row: {line!r}")
            student_id, lecture_id, date, code, recorded_at, device_id = fields
            if code not in ("0", "1"):
                raise CorruptFile(f"bad attendance code {code!r}")
            try:
                recorded_ms = int(recorded_at)
            except ValueError:
                raise CorruptFile(f"bad timestamp {recorded_at!r}") from None
            record = AttendanceRecord(
                lecture_id, date, student_id, code, recorded_ms, device_id
            )
            records[record.key] = record
        else:
            raise CorruptFile(f"row outside any section: {line!r}")

    for record in records.values():
        if record.student_id not in students:
            raise CorruptFile(
                f"attend row references unknown student {record.student_id!r}"
            )
    # the dump carries no session rows; synthesize closed stubs per
    # (lecture, date, device) so replica invariants still hold
    sessions: dict[tuple[str, str, str], Session] = {}
    for record in records.values():
        key = (record.lecture_id, record.date, record.device_id)
        stamp = record.recorded_at
        session = sessions.get(key)
        if session is None:
            sessions[key] = Session(
                *key, opened_at=stamp, closed_at=stamp, status=SessionStatus.CLOSED
            )
        else:
            session.opened_at = min(session.opened_at, stamp)
            session.closed_at = max(session.closed_at or stamp, stamp)
    return ExchangeData(students, ReplicaState("", records, sessions))


def read_exchange_file(source: str | Path) -> ExchangeData:
    try:
        data = Path(source).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read exchange file: {exc}") from None
    return parse_exchange_bytes(data)


def import_exchange_file(source: str | Path) -> ReplicaState:
    """Load an exchange file as a replica for offline merging."""
    return read_exchange_file(source).replica


def merge_exchange_files(
    source_a: str | Path, source_b: str | Path, destination: str | Path
) -> tuple[int, int]:
    """Merge two exchange files into one; returns (students, records)."""
    a = read_exchange_file(source_a)
    b = read_exchange_file(source_b)
    merged = merge_state(a.replica, b.replica)
    students = dict(a.students)
    for student_id, student in b.students.items():
        current = students.get(student_id)
        # deterministic symmetric pick; rows normally agree anyway
        if current is None or _student_tuple(student) > _student_tuple(current):
            students[student_id] = student
    data = exchange_bytes(students.values(), merged.records.values())
    try:
        Path(destination).write_bytes(data)
    except OSError as exc:
        raise IoFailure(f"cannot write exchange file: {exc}") from None
    return len(students), len(merged.records)


def _student_tuple(student: Student) -> tuple[str, str, str]:
    return (student.name1, student.name2, student.email)
