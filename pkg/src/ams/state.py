"""Whole-application state shared by the domain modules.

One ``AppState`` is one device's view of the world. The attendance
records and session metadata inside it form the replica that the sync
module merges between devices.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .ledger import AlertConfig, AttendanceRecord, Session
from .outreach import ReasonRecord
from .roster import Lecture, Student
from .tagid import CanonicalTagId

RecordKey = tuple[str, str, str]  # (lecture_id, date, student_id)
SessionKey = tuple[str, str, str]  # (lecture_id, date, device_id)
ReasonKey = tuple[str, str, str]  # (lecture_id, student_id, date)


@dataclass
class AppState:
    device_id: str
    lectures: dict[str, Lecture] = field(default_factory=dict)
    students: dict[str, Student] = field(default_factory=dict)
    rosters: dict[str, set[str]] = field(default_factory=dict)
    tag_index: dict[CanonicalTagId, str] = field(default_factory=dict)
    alert_configs: dict[str, AlertConfig] = field(default_factory=dict)
    sessions: dict[SessionKey, Session] = field(default_factory=dict)
    records: dict[RecordKey, AttendanceRecord] = field(default_factory=dict)
    reasons: dict[ReasonKey, ReasonRecord] = field(default_factory=dict)
    reason_audit: list[ReasonRecord] = field(default_factory=list)

    def alert_config(self, lecture_id: str) -> AlertConfig:
        return self.alert_configs.get(lecture_id, AlertConfig())

    def replica(self):
        """Snapshot this device's records and sessions for merging."""
        from .sync import ReplicaState

        return ReplicaState(
            device_id=self.device_id,
            records=dict(self.records),
            sessions={k: replace(s) for k, s in self.sessions.items()},
        )
