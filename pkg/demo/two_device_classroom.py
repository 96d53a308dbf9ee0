"""Walkthrough: one class, two devices, merge, report.

Two devices each run roll call for the same large class; each sees only
half the students tap. After closing, their states are exchanged and
both end up with the complete picture, which feeds the absentee report
and the follow-up outbox.

Run with:  python3 demo/two_device_classroom.py
"""

import tempfile
from pathlib import Path

from ams.gateway.service import AttendanceService, ServiceConfig
from ams.netsim import Scenario, simulate_network
from ams.store import absentee_report
from ams.tagid import TagKind, from_hex

ROSTER = "student_id,name1,name2,email\n" + "".join(
    f"s{i:03d},Family{i},Given{i},student{i}@example.ac.jp\n" for i in range(1, 9)
)


def tag(i):
    return from_hex(TagKind.NFCA, f"{i:08x}")


def make_device(root, device_id):
    service = AttendanceService(
        ServiceConfig(data_dir=root / device_id, device_id=device_id)
    )
    service.add_lecture("PROG1", "Programming I", "Tanaka", 15)
    service.ingest_roster("PROG1", ROSTER)
    for i in range(1, 9):
        service.bind_card(f"s{i:03d}", tag(i))
    return service


def main():
    root = Path(tempfile.mkdtemp(prefix="ams-demo-"))
    front = make_device(root, "front-door")
    back = make_device(root, "back-door")

    # students 1-4 tap at the front of the room, 5-7 at the back; s008 skips
    key_front, _ = front.open_session("PROG1", "2013-10-01", at=1_000)
    for i in (1, 2, 3, 4):
        outcome = front.record_tap(key_front, tag(i), at=1_000 + i)
        print(f"front-door tap s{i:03d}: {outcome.alert.label}")
    key_back, _ = back.open_session("PROG1", "2013-10-01", at=1_000)
    for i in (5, 6, 7):
        outcome = back.record_tap(key_back, tag(i), at=1_000 + i)
        print(f"back-door  tap s{i:03d}: {outcome.alert.label}")

    front_close = front.close_session(key_front)["closure"]
    back_close = back.close_session(key_back)["closure"]
    print(f"\nfront-door absentees before merge: {list(front_close.absentees)}")
    print(f"back-door  absentees before merge: {list(back_close.absentees)}")

    # pairwise exchange: both replicas converge on the union
    trace = simulate_network(
        Scenario([front.state.replica(), back.state.replica()], [(0, 1)])
    )
    print(f"\nexchange outcome: {trace.outcomes[0]}")
    front.state.records = dict(trace.final_states[0].records)
    front.state.sessions = dict(trace.final_states[0].sessions)

    print("\nabsentee report after merge (front-door device):")
    for row in absentee_report(front.state, "PROG1", 1):
        print(f"  {row.student_id} {row.name1} {row.name2}: {row.absent_count} absence(s)")

    outbox = sorted(p.name for p in front.config.outbox_dir.iterdir())
    print(f"\nfollow-up outbox of front-door: {outbox}")
    print(f"\nstate directories kept under {root}")


if __name__ == "__main__":
    main()
