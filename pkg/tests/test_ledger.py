"""Roll-call sessions, alert classification, closure, and tabulation."""

import itertools
import random

import pytest

from ams.errors import MalformedInput, SessionAlreadyOpen, SessionClosed, UnknownLecture
from ams.ledger import (
    ABSENT,
    PRESENT,
    AlertConfig,
    AlertLevel,
    AttendanceRecord,
    classify_alert,
    close_session,
    open_session,
    record_tap,
    tabulate,
)
from ams.roster import Lecture, add_lecture, bind_card, ingest_roster_csv
from ams.state import AppState
from ams.tagid import TagKind, from_hex

CSV_THREE = """student_id,name1,name2,email
s001,Yamada,Taro,taro@x
s002,Suzuki,Hanako,hanako@x
s003,Sato,Jiro,jiro@x
"""


def tag(n):
    return from_hex(TagKind.NFCA, f"{n:08x}")


def fresh_state(planned=15):
    state = AppState(device_id="devA")
    add_lecture(state, Lecture("L1", "Programming I", "Tanaka", planned))
    ingest_roster_csv(state, "L1", CSV_THREE)
    for i, sid in enumerate(sorted(state.students), start=1):
        bind_card(state, sid, tag(i))
    return state


def history_from_codes(codes, lecture_id="L1", student_id="s001"):
    return [
        AttendanceRecord(lecture_id, f"2013-10-{day:02d}", student_id, code, 1000 + day, "devA")
        for day, code in enumerate(codes, start=1)
    ]


def alert_oracle(codes, planned, config):
    """Independent recount: total absences and trailing run by full scan."""
    total = sum(1 for c in codes if c == ABSENT)
    trailing = 0
    for c in reversed(codes):
        if c != ABSENT:
            break
        trailing += 1
    limit = (
        config.red_absence_limit
        if config.red_absence_limit is not None
        else planned // 3 + 1
    )
    if total >= limit:
        return AlertLevel.RED_NO_ACCREDITATION
    if trailing >= config.consecutive_yellow:
        return AlertLevel.YELLOW_CONSECUTIVE
    if total >= config.many_yellow:
        return AlertLevel.YELLOW_MANY
    return AlertLevel.NORMAL


# --- classify_alert ---


def test_alert_levels_are_totally_ordered_by_precedence():
    assert (
        AlertLevel.NORMAL
        < AlertLevel.YELLOW_MANY
        < AlertLevel.YELLOW_CONSECUTIVE
        < AlertLevel.RED_NO_ACCREDITATION
    )
    labels = [level.label for level in sorted(AlertLevel)]
    assert labels == ["Normal", "YellowMany", "YellowConsecutive", "RedNoAccreditation"]
    for level in AlertLevel:
        assert AlertLevel.from_label(level.label) is level


def test_empty_history_is_normal():
    assert classify_alert([], 15) is AlertLevel.NORMAL


def test_two_trailing_absences_yellow_consecutive():
    history = history_from_codes([PRESENT, PRESENT, ABSENT, ABSENT])
    assert classify_alert(history, 15) is AlertLevel.YELLOW_CONSECUTIVE


def test_default_red_limit_from_planned_sessions():
    # planned 15 -> limit 15 // 3 + 1 = 6; six absences lose accreditation
    codes = [ABSENT, PRESENT] * 6  # 6 absences, non-consecutive
    history = history_from_codes(codes)
    assert AlertConfig().red_limit(15) == 6
    assert classify_alert(history, 15) is AlertLevel.RED_NO_ACCREDITATION


def test_many_absences_yellow():
    codes = [ABSENT, PRESENT, ABSENT, PRESENT, ABSENT, PRESENT]
    history = history_from_codes(codes)
    assert classify_alert(history, 15) is AlertLevel.YELLOW_MANY


def test_red_beats_yellow_and_consecutive_beats_many():
    # both yellow conditions hold -> consecutive wins
    codes = [ABSENT, ABSENT, ABSENT]
    assert (
        classify_alert(history_from_codes(codes), 15)
        is AlertLevel.YELLOW_CONSECUTIVE
    )
    # red and both yellows hold -> red wins
    codes = [ABSENT] * 6
    assert (
        classify_alert(history_from_codes(codes), 15)
        is AlertLevel.RED_NO_ACCREDITATION
    )


def test_classify_matches_oracle_exhaustively_up_to_length_12():
    config = AlertConfig()
    for n in range(0, 13):
        for bits in itertools.product([PRESENT, ABSENT], repeat=n):
            history = history_from_codes(bits)
            assert classify_alert(history, 15, config) == alert_oracle(bits, 15, config)


def test_classify_matches_oracle_randomized_with_random_configs():
    rng = random.Random(20131001)
    for _ in range(500):
        n = rng.randrange(0, 21)
        codes = [rng.choice([PRESENT, ABSENT]) for _ in range(n)]
        config = AlertConfig(
            consecutive_yellow=rng.randrange(1, 5),
            many_yellow=rng.randrange(1, 6),
            red_absence_limit=rng.choice([None, rng.randrange(1, 10)]),
        )
        planned = rng.randrange(1, 31)
        history = history_from_codes(codes)
        assert classify_alert(history, planned, config) == alert_oracle(
            codes, planned, config
        )


# --- sessions and taps ---


def test_open_session_and_duplicate_key():
    state = fresh_state()
    session = open_session(state, "L1", "2013-10-01")
    assert session.status.value == "Open"
    with pytest.raises(SessionAlreadyOpen):
        open_session(state, "L1", "2013-10-01")


def test_second_device_same_class_is_independent():
    state = fresh_state()
    open_session(state, "L1", "2013-10-01", device_id="devA")
    second = open_session(state, "L1", "2013-10-01", device_id="devB")
    assert second.device_id == "devB"
    assert len(state.sessions) == 2


def test_open_session_validates_inputs():
    state = fresh_state()
    with pytest.raises(UnknownLecture):
        open_session(state, "nope", "2013-10-01")
    with pytest.raises(MalformedInput):
        open_session(state, "L1", "2013/10/01")


def test_tap_fresh_student_normal():
    state = fresh_state()
    session = open_session(state, "L1", "2013-10-01")
    outcome = record_tap(state, session, tag(1), at=5000)
    assert not outcome.unknown_tag
    assert outcome.alert is AlertLevel.NORMAL
    assert not outcome.duplicate
    record = state.records[("L1", "2013-10-01", "s001")]
    assert record.code == PRESENT and record.recorded_at == 5000


def test_tap_unknown_tag_is_an_outcome_not_an_error():
    state = fresh_state()
    session = open_session(state, "L1", "2013-10-01")
    outcome = record_tap(state, session, tag(42))
    assert outcome.unknown_tag
    assert state.records == {}


def test_tap_after_two_consecutive_absences_yellow():
    state = fresh_state()
    for date in ("2013-10-01", "2013-10-08"):
        session = open_session(state, "L1", date)
        record_tap(state, session, tag(2), at=1)
        record_tap(state, session, tag(3), at=2)
        close_session(state, session, at=10)
    session = open_session(state, "L1", "2013-10-15")
    outcome = record_tap(state, session, tag(1), at=3)
    assert outcome.alert is AlertLevel.YELLOW_CONSECUTIVE


def test_duplicate_tap_changes_nothing():
    state = fresh_state()
    session = open_session(state, "L1", "2013-10-01")
    record_tap(state, session, tag(1), at=100)
    snapshot = dict(state.records)
    outcome = record_tap(state, session, tag(1), at=200)
    assert outcome.duplicate
    # replay oracle: final state equals the single-tap state
    assert state.records == snapshot


def test_alert_ignores_today():
    # today's earlier absent row (merged from a peer close) must not
    # influence the alert computed at tap time
    state = fresh_state()
    session = open_session(state, "L1", "2013-10-01")
    state.records[("L1", "2013-10-01", "s001")] = AttendanceRecord(
        "L1", "2013-10-01", "s001", ABSENT, 50, "devB"
    )
    outcome = record_tap(state, session, tag(1), at=100)
    assert outcome.alert is AlertLevel.NORMAL
    # and the tap upgrades the absent row to present
    assert state.records[("L1", "2013-10-01", "s001")].code == PRESENT


def test_tap_on_closed_session_raises():
    state = fresh_state()
    session = open_session(state, "L1", "2013-10-01")
    close_session(state, session)
    with pytest.raises(SessionClosed):
        record_tap(state, session, tag(1))


# --- closure ---


def test_close_marks_absentees():
    state = fresh_state()
    session = open_session(state, "L1", "2013-10-01")
    record_tap(state, session, tag(1), at=1)
    record_tap(state, session, tag(2), at=2)
    report = close_session(state, session, at=99)
    # set-difference oracle: roster minus tapped
    assert set(report.absentees) == {"s001", "s002", "s003"} - {"s001", "s002"}
    record = state.records[("L1", "2013-10-01", "s003")]
    assert record.code == ABSENT
    assert record.recorded_at == 99
    assert record.device_id == "devA"
    assert session.closed_at == 99


def test_close_all_present():
    state = fresh_state()
    session = open_session(state, "L1", "2013-10-01")
    for n in (1, 2, 3):
        record_tap(state, session, tag(n))
    report = close_session(state, session)
    assert report.absentees == ()


def test_close_twice_raises():
    state = fresh_state()
    session = open_session(state, "L1", "2013-10-01")
    close_session(state, session)
    with pytest.raises(SessionClosed):
        close_session(state, session)


def test_after_close_every_roster_student_has_exactly_one_record():
    state = fresh_state()
    session = open_session(state, "L1", "2013-10-01")
    record_tap(state, session, tag(1))
    close_session(state, session)
    for sid in state.rosters["L1"]:
        assert ("L1", "2013-10-01", sid) in state.records
    day_records = [r for r in state.records.values() if r.date == "2013-10-01"]
    assert len(day_records) == len(state.rosters["L1"])


# --- tabulation ---


def test_tabulate_empty_lecture():
    state = fresh_state()
    matrix = tabulate(state, "L1")
    assert matrix.dates == ()
    assert [r.student_id for r in matrix.rows] == ["s001", "s002", "s003"]


def test_tabulate_unknown_lecture():
    state = fresh_state()
    with pytest.raises(UnknownLecture):
        tabulate(state, "nope")


def test_tabulate_two_sessions_one_absence():
    state = fresh_state()
    for date, present in (("2013-10-01", (1, 2, 3)), ("2013-10-08", (1, 3))):
        session = open_session(state, "L1", date)
        for n in present:
            record_tap(state, session, tag(n))
        close_session(state, session)
    matrix = tabulate(state, "L1")
    cells = [cell for row in matrix.rows for cell in row.cells]
    assert cells.count(ABSENT) == 1
    assert cells.count(PRESENT) == 5
    # conservation: every lecture record appears as exactly one cell
    assert cells.count(PRESENT) + cells.count(ABSENT) == len(state.records)
    by_id = {row.student_id: row for row in matrix.rows}
    assert by_id["s002"].cells == (PRESENT, ABSENT)
    assert by_id["s002"].present == 1
    assert matrix.date_totals == (3, 2)
    assert matrix.total_present == 5


def test_tabulate_csv_shape():
    state = fresh_state()
    session = open_session(state, "L1", "2013-10-01")
    record_tap(state, session, tag(1))
    close_session(state, session)
    csv_text = tabulate(state, "L1").to_csv()
    lines = csv_text.strip().split("\n")
    assert lines[0] == "student_id,2013-10-01,present"
    assert lines[1] == "s001,1,1"
    assert lines[-1] == "present,1,1"


def test_replaying_identical_tap_script_is_deterministic():
    def run():
        state = fresh_state()
        session = open_session(state, "L1", "2013-10-01", at=1000)
        outcomes = []
        for n, at in ((1, 1100), (2, 1200), (1, 1300)):
            outcome = record_tap(state, session, tag(n), at=at)
            outcomes.append((outcome.alert, outcome.duplicate))
        close_session(state, session, at=2000)
        return state.records, outcomes

    records_a, alerts_a = run()
    records_b, alerts_b = run()
    assert records_a == records_b
    assert alerts_a == alerts_b
