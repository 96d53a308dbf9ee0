"""Class rosters: CSV ingestion, student registration, and card binding."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import TYPE_CHECKING, TextIO

from .errors import (
    DuplicateLecture,
    MalformedCsv,
    StudentAlreadyBound,
    TagAlreadyBound,
    UnknownLecture,
    UnknownStudent,
)
from .tagid import CanonicalTagId

if TYPE_CHECKING:
    from .state import AppState

ROSTER_HEADER = ("student_id", "name1", "name2", "email")


@dataclass
class Student:
    student_id: str
    name1: str
    name2: str
    email: str
    tag: CanonicalTagId | None = None
    photo_ref: str | None = None

    @property
    def display_name(self) -> str:
        return f"{self.name1} {self.name2}".strip()


@dataclass
class Lecture:
    lecture_id: str
    title: str
    teacher: str
    planned_sessions: int

    def __post_init__(self) -> None:
        if not self.lecture_id:
            raise ValueError("lecture_id must be nonempty")
        if self.planned_sessions < 1:
            raise ValueError("planned_sessions must be >= 1")


@dataclass(frozen=True)
class RejectedRow:
    row: int  # 1-based data-row ordinal within the file
    student_id: str
    reason: str  # MissingField | ExtraField | EmptyStudentId | DuplicateId


@dataclass(frozen=True)
class IngestReport:
    accepted: int
    rejected: tuple[RejectedRow, ...] = ()

    @property
    def total(self) -> int:
        return self.accepted + len(self.rejected)


@dataclass(frozen=True)
class Binding:
    student_id: str
    tag: CanonicalTagId


def add_lecture(state: AppState, lecture: Lecture) -> Lecture:
    """Register a lecture; every other operation presumes it exists."""
    if lecture.lecture_id in state.lectures:
        raise DuplicateLecture(f"lecture {lecture.lecture_id!r} already exists")
    state.lectures[lecture.lecture_id] = lecture
    state.rosters.setdefault(lecture.lecture_id, set())
    return lecture


def ingest_roster_csv(
    state: AppState, lecture_id: str, source: str | TextIO
) -> IngestReport:
    """Load a roster file, creating or updating one student per valid row.

    Header must be exactly ``student_id,name1,name2,email``. Duplicate
    student ids within one file keep the first row; later rows are
    rejected. Re-ingesting the same file updates in place.
    """
    if lecture_id not in state.lectures:
        raise UnknownLecture(f"unknown lecture {lecture_id!r}")
    stream = io.StringIO(source) if isinstance(source, str) else source
    try:
        rows = [r for r in csv.reader(stream) if r]  # skip blank lines
    except csv.Error as exc:
        raise MalformedCsv(f"unparseable CSV: {exc}") from None
    if rows and rows[0]:
        rows[0][0] = rows[0][0].lstrip("﻿")  # spreadsheet exports add a BOM
    if not rows or tuple(h.strip() for h in rows[0]) != ROSTER_HEADER:
        raise MalformedCsv(
            "expected header " + ",".join(ROSTER_HEADER)
        )

    accepted = 0
    rejected: list[RejectedRow] = []
    seen: set[str] = set()
    for ordinal, row in enumerate(rows[1:], start=1):
        if len(row) < len(ROSTER_HEADER):
            rejected.append(RejectedRow(ordinal, row[0].strip() if row else "", "MissingField"))
            continue
        if len(row) > len(ROSTER_HEADER):
            rejected.append(RejectedRow(ordinal, row[0].strip(), "ExtraField"))
            continue
        student_id, name1, name2, email = (c.strip() for c in row)
        if not student_id:
            rejected.append(RejectedRow(ordinal, "", "EmptyStudentId"))
            continue
        if student_id in seen:
            rejected.append(RejectedRow(ordinal, student_id, "DuplicateId"))
            continue
        seen.add(student_id)
        existing = state.students.get(student_id)
        if existing is None:
            state.students[student_id] = Student(student_id, name1, name2, email)
        else:
            existing.name1, existing.name2, existing.email = name1, name2, email
        state.rosters[lecture_id].add(student_id)
        accepted += 1
    return IngestReport(accepted, tuple(rejected))


def bind_card(
    state: AppState, student_id: str, tag: CanonicalTagId, overwrite: bool = False
) -> Binding:
    """Bind a card to a student; the relation stays a partial injection."""
    student = state.students.get(student_id)
    if student is None:
        raise UnknownStudent(f"unknown student {student_id!r}")

    holder_id = state.tag_index.get(tag)
    if holder_id is not None and holder_id != student_id:
        if not overwrite:
            raise TagAlreadyBound(f"{tag} is bound to student {holder_id!r}")
        state.students[holder_id].tag = None
        del state.tag_index[tag]
    if student.tag is not None and student.tag != tag:
        if not overwrite:
            raise StudentAlreadyBound(
                f"student {student_id!r} already holds {student.tag}"
            )
        state.tag_index.pop(student.tag, None)

    student.tag = tag
    state.tag_index[tag] = student_id
    return Binding(student_id, tag)


def lookup_by_tag(state: AppState, tag: CanonicalTagId) -> Student | None:
    """Return the student bound to a card, or None for unknown cards."""
    student_id = state.tag_index.get(tag)
    return None if student_id is None else state.students[student_id]


def set_photo(state: AppState, student_id: str, photo_ref: str | None) -> Student:
    """Attach a pre-provisioned picture reference to a student."""
    student = state.students.get(student_id)
    if student is None:
        raise UnknownStudent(f"unknown student {student_id!r}")
    student.photo_ref = photo_ref
    return student


def export_bindings(state: AppState) -> str:
    """Binding dump, one ``student_id<TAB>KIND:HEX`` line per bound student."""
    lines = [
        f"{sid}\t{student.tag.canonical()}"
        for sid, student in sorted(state.students.items())
        if student.tag is not None
    ]
    return "".join(line + "\n" for line in lines)
