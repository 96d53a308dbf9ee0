"""CLI commands: full flow, file merges, replay determinism, exit codes."""

import filecmp

import pytest

from ams.gateway.cli import main

CSV_THREE = """student_id,name1,name2,email
s001,Yamada,Taro,taro@x
s002,Suzuki,Hanako,hanako@x
s003,Sato,Jiro,jiro@x
"""

TAPS = "\n".join(
    [
        "1380600000000\tNFCA:00000001",
        "1380600005000\tNFCA:00000002",
        "1380600009000\tNFCA:00000001",  # duplicate tap
        "1380600012000\tNFCA:000000FF",  # unknown card
    ]
)


def run(args, data_dir, device="devA"):
    return main(["--data-dir", str(data_dir), "--device", device] + args)


def prepare(tmp_path, data_dir, device="devA"):
    roster = tmp_path / "roster.csv"
    roster.write_text(CSV_THREE, encoding="utf-8")
    assert run(["lecture", "add", "L1", "--title", "Programming I", "--sessions", "15"], data_dir, device) == 0
    assert run(["ingest", "L1", str(roster)], data_dir, device) == 0
    for i in (1, 2, 3):
        assert run(["bind", f"s{i:03d}", f"NFCA:{i:08X}"], data_dir, device) == 0


def test_full_flow(tmp_path, capsys):
    data = tmp_path / "devA"
    prepare(tmp_path, data)
    assert run(["session", "open", "L1", "2013-10-01"], data) == 0
    assert run(["tap", "L1", "2013-10-01", "NFCA:00000001"], data) == 0
    assert run(["session", "close", "L1", "2013-10-01"], data) == 0
    out = capsys.readouterr().out
    assert "2 absentees" in out
    assert run(["report", "L1", "--min", "1"], data) == 0
    out = capsys.readouterr().out
    assert out.splitlines() == ["s002,Suzuki,Hanako,1", "s003,Sato,Jiro,1"]
    assert run(["tabulate", "L1"], data) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "student_id,2013-10-01,present"


def test_errors_exit_nonzero_with_one_line(tmp_path, capsys):
    data = tmp_path / "devA"
    assert run(["ingest", "L9", "/nonexistent.csv"], data) == 1
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and err.startswith("error:")
    prepare(tmp_path, data)
    assert run(["session", "close", "L1", "2013-10-01"], data) == 1  # never opened
    assert run(["bind", "ghost", "NFCA:00000009"], data) == 1
    assert run(["tap", "L1", "2013-10-01", "NFCA:garbage"], data) == 1


def test_tap_replay_and_exports(tmp_path, capsys):
    data = tmp_path / "devA"
    prepare(tmp_path, data)
    script = tmp_path / "taps.tsv"
    script.write_text(TAPS, encoding="utf-8")
    assert (
        run(["tap-replay", str(script), "--lecture", "L1", "--date", "2013-10-01", "--close"], data)
        == 0
    )
    out = capsys.readouterr().out
    assert "replayed 4 taps (1 unknown, 1 duplicate)" in out
    assert "closed with 1 absentees" in out
    assert run(["export", str(tmp_path / "a.ams")], data) == 0
    assert (tmp_path / "a.ams").read_bytes().startswith(b"ams-exchange/1\n")
    assert run(["export", str(tmp_path / "a.sqlite3"), "--sqlite"], data) == 0


def test_merge_files_commutes(tmp_path, capsys):
    script_a = tmp_path / "a.tsv"
    script_a.write_text("1380600000000\tNFCA:00000001", encoding="utf-8")
    script_b = tmp_path / "b.tsv"
    script_b.write_text("1380600001000\tNFCA:00000002", encoding="utf-8")
    for device, script in (("devA", script_a), ("devB", script_b)):
        data = tmp_path / device
        prepare(tmp_path, data, device)
        assert (
            run(
                ["tap-replay", str(script), "--lecture", "L1", "--date", "2013-10-01", "--close"],
                data,
                device,
            )
            == 0
        )
        assert run(["export", str(tmp_path / f"{device}.ams")], data, device) == 0
    a, b = str(tmp_path / "devA.ams"), str(tmp_path / "devB.ams")
    assert main(["merge", a, b, "-o", str(tmp_path / "m.ams")]) == 0
    assert main(["merge", b, a, "-o", str(tmp_path / "m2.ams")]) == 0
    assert filecmp.cmp(tmp_path / "m.ams", tmp_path / "m2.ams", shallow=False)
    # merge-in applies a peer file to local state
    data = tmp_path / "devA"
    assert run(["merge-in", str(tmp_path / "devB.ams")], data) == 0
    assert run(["report", "L1"], data) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[-1].startswith("s003,")


def test_merge_in_accepts_wire_state_files(tmp_path, capsys):
    from ams.gateway.service import AttendanceService, ServiceConfig
    from ams.sync import write_state_file
    from ams.tagid import TagKind, from_hex

    data = tmp_path / "devA"
    prepare(tmp_path, data)
    assert run(["session", "open", "L1", "2013-10-01"], data) == 0
    assert run(["session", "close", "L1", "2013-10-01"], data) == 0

    peer = AttendanceService(ServiceConfig(data_dir=tmp_path / "devB", device_id="devB"))
    peer.add_lecture("L1", "t", "t", 15)
    peer.ingest_roster("L1", CSV_THREE)
    peer.bind_card("s001", from_hex(TagKind.NFCA, "00000001"))
    key, _ = peer.open_session("L1", "2013-10-01", at=500)
    peer.record_tap(key, from_hex(TagKind.NFCA, "00000001"), at=600)
    state_file = tmp_path / "devB.state"
    write_state_file(peer.state.replica(), state_file)

    capsys.readouterr()
    assert run(["merge-in", str(state_file)], data) == 0
    out = capsys.readouterr().out
    assert "replaced 1" in out  # devA had s001 absent; devB saw the tap


def test_photo_command(tmp_path, capsys):
    data = tmp_path / "devA"
    prepare(tmp_path, data)
    assert run(["photo", "s001", "faces/s001.png"], data) == 0
    assert "faces/s001.png" in capsys.readouterr().out
    assert run(["photo", "ghost", "x.png"], data) == 1


def test_backup_restore_cycle(tmp_path, capsys):
    data = tmp_path / "devA"
    prepare(tmp_path, data)
    archive = tmp_path / "state.bak"
    assert run(["backup", str(archive)], data) == 0
    fresh = tmp_path / "fresh"
    assert run(["restore", str(archive)], fresh) == 0
    assert run(["bind", "--export"], fresh) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[-3:] == [
        "s001\tNFCA:00000001",
        "s002\tNFCA:00000002",
        "s003\tNFCA:00000003",
    ]
    corrupted = bytearray(archive.read_bytes())
    corrupted[-1] ^= 0x01
    archive.write_bytes(bytes(corrupted))
    assert run(["restore", str(archive)], fresh) == 1
    err = capsys.readouterr().err
    assert "ChecksumMismatch" in err


def test_reason_commands(tmp_path, capsys):
    data = tmp_path / "devA"
    prepare(tmp_path, data)
    assert run(["session", "open", "L1", "2013-10-01"], data) == 0
    assert run(["session", "close", "L1", "2013-10-01"], data) == 0
    capsys.readouterr()
    assert run(["reason", "L1", "s001", "2013-10-01", "--text", "flu"], data) == 0
    assert run(["unexplained", "L1"], data) == 0
    out = capsys.readouterr().out
    assert "s002,2013-10-01" in out and "s001" not in out.splitlines()[-2:]


def test_cli_report_matches_api_report(tmp_path, capsys):
    from fastapi.testclient import TestClient

    from ams.gateway.api import create_app
    from ams.gateway.service import AttendanceService, ServiceConfig

    data = tmp_path / "devA"
    prepare(tmp_path, data)
    assert run(["session", "open", "L1", "2013-10-01"], data) == 0
    assert run(["tap", "L1", "2013-10-01", "NFCA:00000001"], data) == 0
    assert run(["session", "close", "L1", "2013-10-01"], data) == 0
    capsys.readouterr()
    assert run(["report", "L1", "--min", "1"], data) == 0
    cli_rows = [line.split(",") for line in capsys.readouterr().out.splitlines()]

    service = AttendanceService(ServiceConfig(data_dir=data, device_id="devA"))
    client = TestClient(create_app(service))
    api_rows = [
        [r["student_id"], r["name1"], r["name2"], str(r["absent_count"])]
        for r in client.get("/lectures/L1/report", params={"min": 1}).json()
    ]
    assert cli_rows == api_rows


def test_serve_runs_a_real_gateway(tmp_path):
    import socket
    import subprocess
    import sys
    import time

    import httpx

    data = tmp_path / "devA"
    prepare(tmp_path, data)
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    proc = subprocess.Popen(
        [
            sys.executable,
            "-m",
            "ams.gateway.cli",
            "--data-dir",
            str(data),
            "serve",
            "--port",
            str(port),
        ],
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    try:
        rows = None
        for _ in range(100):
            try:
                rows = httpx.get(
                    f"http://127.0.0.1:{port}/lectures/L1/roster", timeout=1.0
                ).json()
                break
            except httpx.HTTPError:
                time.sleep(0.1)
        assert rows is not None, "server never came up"
        assert [r["student_id"] for r in rows] == ["s001", "s002", "s003"]
    finally:
        proc.terminate()
        proc.wait(timeout=10)


def test_replay_twice_identical_outputs(tmp_path):
    script = tmp_path / "taps.tsv"
    script.write_text(TAPS, encoding="utf-8")
    exports = []
    for run_dir in ("run1", "run2"):
        data = tmp_path / run_dir
        prepare(tmp_path, data)
        assert (
            run(
                ["tap-replay", str(script), "--lecture", "L1", "--date", "2013-10-01", "--close"],
                data,
            )
            == 0
        )
        out_file = tmp_path / f"{run_dir}.ams"
        assert run(["export", str(out_file)], data) == 0
        exports.append(out_file.read_bytes())
    assert exports[0] == exports[1]
