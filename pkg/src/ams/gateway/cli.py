"""Command-line interface for batch operations and replay.

Each command loads the snapshot from the data directory, runs one
operation, persists, and exits 0 on success or 1 with a one-line
diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import datetime as dt
import sys
from pathlib import Path

from .. import store
from ..errors import AmsError, MalformedInput
from ..ledger import AlertConfig
from ..tagid import parse_canonical
from .service import AttendanceService, ServiceConfig, session_key_str


def _service(args: argparse.Namespace) -> AttendanceService:
    config = ServiceConfig.from_env(args.data_dir)
    if args.device:
        config.device_id = args.device
    if args.outbox:
        config.outbox_dir = Path(args.outbox)
    if args.base_url:
        config.base_form_url = args.base_url
    return AttendanceService(config)


def _parse_timestamp(text: str) -> int:
    """Epoch milliseconds, given either an integer or an ISO timestamp."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        stamp = dt.datetime.fromisoformat(text)
    except ValueError:
        raise MalformedInput(f"bad timestamp {text!r}") from None
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=dt.timezone.utc)
    return int(stamp.timestamp() * 1000)


def _read_tap_script(path: str) -> list[tuple[int, str]]:
    taps = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        stamp_text, sep, tag_text = line.partition("\t")
        if not sep:
            raise MalformedInput(f"{path}:{line_no}: expected timestamp<TAB>KIND:HEX")
        taps.append((_parse_timestamp(stamp_text), tag_text.strip()))
    return taps


def cmd_lecture_add(args) -> int:
    service = _service(args)
    alert = None
    if args.consecutive or args.many or args.red_limit:
        alert = AlertConfig(args.consecutive or 2, args.many or 3, args.red_limit)
    lecture = service.add_lecture(
        args.lecture_id, args.title, args.teacher, args.sessions, alert
    )
    print(f"added lecture {lecture.lecture_id} ({lecture.planned_sessions} sessions)")
    return 0


def cmd_ingest(args) -> int:
    service = _service(args)
    csv_text = Path(args.csv).read_text(encoding="utf-8")
    report = service.ingest_roster(args.lecture_id, csv_text)
    print(f"accepted {report.accepted}, rejected {len(report.rejected)}")
    for row in report.rejected:
        print(f"  row {row.row}: {row.reason} ({row.student_id})")
    return 0


def cmd_bind(args) -> int:
    service = _service(args)
    if args.export:
        from ..roster import export_bindings

        sys.stdout.write(export_bindings(service.state))
        return 0
    if not args.student_id or not args.tag:
        raise MalformedInput("bind needs STUDENT_ID and KIND:HEX (or --export)")
    binding = service.bind_card(
        args.student_id, parse_canonical(args.tag), args.overwrite
    )
    print(f"bound {binding.student_id} to {binding.tag.canonical()}")
    return 0


def cmd_photo(args) -> int:
    service = _service(args)
    student = service.set_photo(args.student_id, args.photo_ref)
    print(f"photo for {student.student_id}: {student.photo_ref}")
    return 0


def cmd_session(args) -> int:
    service = _service(args)
    if args.action == "open":
        key, session = service.open_session(args.lecture_id, args.date)
        print(f"opened {key}")
        return 0
    key = session_key_str(args.lecture_id, args.date, service.state.device_id)
    result = service.close_session(key)
    closure = result["closure"]
    composed = result["followups"]
    print(
        f"closed {key}: {len(closure.absentees)} absentees, "
        f"{composed.sent} follow-ups written, {len(composed.skipped)} skipped"
    )
    for student_id in closure.absentees:
        print(f"  absent: {student_id}")
    return 0


def cmd_tap(args) -> int:
    service = _service(args)
    key = session_key_str(args.lecture_id, args.date, service.state.device_id)
    outcome = service.record_tap(key, parse_canonical(args.tag))
    if outcome.unknown_tag:
        print("unknown tag")
    else:
        flag = " (duplicate)" if outcome.duplicate else ""
        print(f"{outcome.student.student_id} {outcome.alert.label}{flag}")
    return 0


def cmd_tap_replay(args) -> int:
    service = _service(args)
    taps = _read_tap_script(args.script)
    if not taps and (args.open_at is None or args.close_at is None):
        raise MalformedInput("empty script needs explicit --open-at/--close-at")
    opened_at = _parse_timestamp(args.open_at) if args.open_at else taps[0][0]
    key, _ = service.open_session(args.lecture_id, args.date, at=opened_at)
    unknown = duplicates = 0
    for stamp, tag_text in taps:
        outcome = service.record_tap(key, parse_canonical(tag_text), at=stamp)
        unknown += outcome.unknown_tag
        duplicates += outcome.duplicate
    closed = ""
    if args.close:
        closed_at = _parse_timestamp(args.close_at) if args.close_at else taps[-1][0]
        result = service.close_session(key, at=closed_at)
        closure = result["closure"]
        closed = f", closed with {len(closure.absentees)} absentees"
    print(
        f"replayed {len(taps)} taps ({unknown} unknown, {duplicates} duplicate){closed}"
    )
    return 0


def cmd_merge(args) -> int:
    students, records = store.merge_exchange_files(args.file_a, args.file_b, args.output)
    print(f"merged into {args.output}: {students} students, {records} records")
    return 0


def cmd_merge_in(args) -> int:
    service = _service(args)
    result = service.merge_file(args.file)
    print(f"merged {args.file}: added {result['added']}, replaced {result['replaced']}")
    return 0


def cmd_report(args) -> int:
    service = _service(args)
    rows = service.report(args.lecture_id, args.min)
    for row in rows:
        print(f"{row.student_id},{row.name1},{row.name2},{row.absent_count}")
    return 0


def cmd_tabulate(args) -> int:
    service = _service(args)
    sys.stdout.write(service.tabulation(args.lecture_id).to_csv())
    return 0


def cmd_export(args) -> int:
    service = _service(args)
    if args.sqlite:
        store.export_sqlite(service.state, args.output)
    else:
        service.export_exchange(args.output)
    print(f"exported {args.output}")
    return 0


def cmd_backup(args) -> int:
    service = _service(args)
    service.backup_to(args.output)
    print(f"backup written to {args.output}")
    return 0


def cmd_restore(args) -> int:
    service = _service(args)
    service.restore_from(args.archive)
    print(f"restored from {args.archive}")
    return 0


def cmd_reason(args) -> int:
    service = _service(args)
    reason = service.ingest_reason(args.lecture_id, args.student_id, args.date, args.text)
    print(f"reason recorded for {reason.student_id} on {reason.date}")
    return 0


def cmd_unexplained(args) -> int:
    service = _service(args)
    for student_id, date in service.unexplained(args.lecture_id):
        print(f"{student_id},{date}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    service = _service(args)
    port = args.port or service.config.port
    uvicorn.run(create_app(service), host=args.host, port=port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ams", description="attendance ledger: roll call, merge, reports"
    )
    parser.add_argument("--data-dir", default=None, help="state directory (AMS_DATA_DIR)")
    parser.add_argument("--device", default=None, help="device id (AMS_DEVICE_ID)")
    parser.add_argument("--outbox", default=None, help="outbox directory (AMS_OUTBOX_DIR)")
    parser.add_argument(
        "--base-url", default=None, help="absence form URL prefix (AMS_BASE_FORM_URL)"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lecture", help="lecture management")
    lecture_sub = p.add_subparsers(dest="lecture_action", required=True)
    p = lecture_sub.add_parser("add")
    p.add_argument("lecture_id")
    p.add_argument("--title", default="")
    p.add_argument("--teacher", default="")
    p.add_argument("--sessions", type=int, default=15)
    p.add_argument("--consecutive", type=int, default=None)
    p.add_argument("--many", type=int, default=None)
    p.add_argument("--red-limit", type=int, default=None)
    p.set_defaults(func=cmd_lecture_add)

    p = sub.add_parser("ingest", help="load a roster CSV into a lecture")
    p.add_argument("lecture_id")
    p.add_argument("csv")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("bind", help="bind a card to a student")
    p.add_argument("student_id", nargs="?")
    p.add_argument("tag", nargs="?", help="KIND:HEX")
    p.add_argument("--overwrite", action="store_true")
    p.add_argument("--export", action="store_true", help="dump current bindings")
    p.set_defaults(func=cmd_bind)

    p = sub.add_parser("photo", help="attach a stored picture reference to a student")
    p.add_argument("student_id")
    p.add_argument("photo_ref")
    p.set_defaults(func=cmd_photo)

    p = sub.add_parser("session", help="open or close a roll-call session")
    p.add_argument("action", choices=["open", "close"])
    p.add_argument("lecture_id")
    p.add_argument("date")
    p.set_defaults(func=cmd_session)

    p = sub.add_parser("tap", help="record one card tap")
    p.add_argument("lecture_id")
    p.add_argument("date")
    p.add_argument("tag", help="KIND:HEX")
    p.set_defaults(func=cmd_tap)

    p = sub.add_parser("tap-replay", help="replay a tap script into a fresh session")
    p.add_argument("script", help="lines: timestamp<TAB>KIND:HEX")
    p.add_argument("--lecture", dest="lecture_id", required=True)
    p.add_argument("--date", required=True)
    p.add_argument("--open-at", default=None)
    p.add_argument("--close", action="store_true", help="close the session afterwards")
    p.add_argument("--close-at", default=None)
    p.set_defaults(func=cmd_tap_replay)

    p = sub.add_parser("merge", help="merge two exchange files")
    p.add_argument("file_a")
    p.add_argument("file_b")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("merge-in", help="merge a peer file into this device")
    p.add_argument("file")
    p.set_defaults(func=cmd_merge_in)

    p = sub.add_parser("report", help="absentee report for a lecture")
    p.add_argument("lecture_id")
    p.add_argument("--min", type=int, default=1)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("tabulate", help="attendance matrix CSV")
    p.add_argument("lecture_id")
    p.set_defaults(func=cmd_tabulate)

    p = sub.add_parser("export", help="write the exchange file")
    p.add_argument("output")
    p.add_argument("--sqlite", action="store_true", help="single-file database instead")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("backup", help="write a checksummed backup archive")
    p.add_argument("output")
    p.set_defaults(func=cmd_backup)

    p = sub.add_parser("restore", help="restore state from a backup archive")
    p.add_argument("archive")
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("reason", help="record an absence reason")
    p.add_argument("lecture_id")
    p.add_argument("student_id")
    p.add_argument("date")
    p.add_argument("--text", required=True)
    p.set_defaults(func=cmd_reason)

    p = sub.add_parser("unexplained", help="absences with no reason yet")
    p.add_argument("lecture_id")
    p.set_defaults(func=cmd_unexplained)

    p = sub.add_parser("serve", help="run the HTTP gateway")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AmsError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
