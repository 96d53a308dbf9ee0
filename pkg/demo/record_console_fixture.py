"""Record a real gateway session into fixtures for the console UI tests.

Builds six weeks of history so that the live session's taps produce all
four alert levels, replays a roll call through the HTTP API, and saves
the event stream, roster snapshot, and closure report exactly as the
console would receive them.

Run with:  python3 demo/record_console_fixture.py [output_dir]
"""

import json
import sys
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from ams.gateway.api import create_app
from ams.gateway.service import AttendanceService, ServiceConfig
from ams.tagid import TagKind, from_hex

ROSTER = """student_id,name1,name2,email
s001,Aoki,Kenta,kenta@example.ac.jp
s002,Baba,Yui,yui@example.ac.jp
s003,Chiba,Ren,ren@example.ac.jp
s004,Doi,Mika,mika@example.ac.jp
s005,Endo,Sora,sora@example.ac.jp
"""

# per-student attendance over the six prior meetings: by the live
# session s001 is clean, s002 has two trailing absences, s003 has three
# scattered absences, s004 has six and loses accreditation
PRIOR = {
    "s001": "111111",
    "s002": "111100",
    "s003": "010101",
    "s004": "000000",
    "s005": "111111",
}
PRIOR_DATES = [f"2013-10-{d:02d}" for d in range(1, 7)]
LIVE_DATE = "2013-10-07"


def tag(i):
    return from_hex(TagKind.NFCA, f"{i:08x}")


def main():
    out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "frontend/fixtures")
    out_dir.mkdir(parents=True, exist_ok=True)

    root = Path(tempfile.mkdtemp(prefix="ams-fixture-"))
    service = AttendanceService(ServiceConfig(data_dir=root, device_id="devA"))
    service.add_lecture("PROG1", "Programming I", "Tanaka", 15)
    service.ingest_roster("PROG1", ROSTER)
    for i in range(1, 6):
        service.bind_card(f"s{i:03d}", tag(i))

    base = 1_380_000_000_000
    for day, date in enumerate(PRIOR_DATES):
        key, _ = service.open_session("PROG1", date, at=base + day * 86_400_000)
        for i, sid in enumerate(sorted(PRIOR), start=1):
            if PRIOR[sid][day] == "1":
                service.record_tap(key, tag(i), at=base + day * 86_400_000 + i)
        service.close_session(key, at=base + day * 86_400_000 + 3_600_000)

    client = TestClient(create_app(service))
    key = client.post(
        "/sessions", json={"lecture_id": "PROG1", "date": LIVE_DATE, "at": base + 7 * 86_400_000}
    ).json()["key"]
    live = base + 7 * 86_400_000
    taps = [
        (tag(1).canonical(), live + 10_000),   # Normal
        (tag(2).canonical(), live + 20_000),   # YellowConsecutive
        (tag(3).canonical(), live + 30_000),   # YellowMany
        (tag(4).canonical(), live + 40_000),   # RedNoAccreditation
        ("NFCA:00DEAD01", live + 50_000),      # unknown card
        (tag(1).canonical(), live + 60_000),   # duplicate tap
    ]
    for tag_text, at in taps:
        client.post(f"/sessions/{key}/taps", json={"tag": tag_text, "at": at})
    closure = client.post(f"/sessions/{key}/close", json={"at": live + 3_600_000}).json()

    frames = client.get(f"/sessions/{key}/events", params={"since": -1}).text
    roster = client.get("/lectures/PROG1/roster").json()

    (out_dir / "frames.ndjson").write_text(frames, encoding="utf-8")
    (out_dir / "closure.json").write_text(json.dumps(closure, indent=2), encoding="utf-8")
    (out_dir / "roster.json").write_text(json.dumps(roster, indent=2), encoding="utf-8")
    (out_dir / "session.json").write_text(
        json.dumps({"key": key, "lecture_id": "PROG1", "date": LIVE_DATE}, indent=2),
        encoding="utf-8",
    )
    print(f"wrote fixtures to {out_dir}")
    for line in frames.splitlines():
        frame = json.loads(line)
        print(f"  seq={frame['seq']:>2} {frame['kind']:<14} {frame['payload'].get('alert', '')}")


if __name__ == "__main__":
    main()
