/** Pure state fold: console state is a function of the roster snapshot
 * plus the event-frame prefix, so replaying the same frames always
 * reproduces the identical render state. */

import type {
  AlertLevel,
  ConsoleState,
  EventFrame,
  MergeNote,
  RollCallRow,
  RosterEntry,
  RowStatus,
} from "./model.js";

export function initialState(roster: readonly RosterEntry[]): ConsoleState {
  const rows = new Map<string, RollCallRow>();
  for (const entry of roster) {
    rows.set(entry.student_id, {
      studentId: entry.student_id,
      displayName: entry.display_name,
      photoRef: entry.photo_ref,
      status: "NotYet",
      alert: "Normal",
      lastEventSeq: -1,
    });
  }
  return {
    rows,
    unknownTaps: [],
    sessionOpen: false,
    closure: null,
    merges: [],
    lastSeq: -1,
  };
}

function withRow(
  state: ConsoleState,
  studentId: string,
  update: Partial<RollCallRow>,
  seq: number,
): ConsoleState {
  const row = state.rows.get(studentId);
  if (row === undefined) return state; // not on this roster; ignore
  const next: RollCallRow = { ...row, ...update, lastEventSeq: seq };
  const rows = new Map(state.rows);
  rows.set(studentId, next);
  return { ...state, rows };
}

export function applyFrame(state: ConsoleState, frame: EventFrame): ConsoleState {
  if (frame.seq <= state.lastSeq) return state; // replayed duplicate frame
  const advanced = { ...state, lastSeq: frame.seq };
  const payload = frame.payload;
  switch (frame.kind) {
    case "SessionOpened":
      return { ...advanced, sessionOpen: true };
    case "Tap": {
      if (payload["outcome"] === "unknown_tag") {
        const tag = String(payload["tag"] ?? "");
        if (advanced.unknownTaps.some((t) => t.tag === tag)) return advanced;
        return {
          ...advanced,
          unknownTaps: [...advanced.unknownTaps, { tag, seq: frame.seq }],
        };
      }
      const studentId = String(payload["student_id"] ?? "");
      return withRow(
        advanced,
        studentId,
        {
          status: "Present",
          alert: (payload["alert"] as AlertLevel) ?? "Normal",
        },
        frame.seq,
      );
    }
    case "Alert": {
      const studentId = String(payload["student_id"] ?? "");
      return withRow(
        advanced,
        studentId,
        { alert: (payload["alert"] as AlertLevel) ?? "Normal" },
        frame.seq,
      );
    }
    case "SessionClosed": {
      const absentees = (payload["absentees"] as string[]) ?? [];
      let next: ConsoleState = {
        ...advanced,
        sessionOpen: false,
        closure: {
          absentees,
          followupsWritten: Number(payload["followups_written"] ?? 0),
          followupsSkipped: (payload["followups_skipped"] as string[]) ?? [],
          closedAt: Number(payload["closed_at"] ?? 0),
        },
      };
      for (const studentId of absentees) {
        next = withRow(next, studentId, { status: "Absent" as RowStatus }, frame.seq);
      }
      return next;
    }
    case "MergeCompleted": {
      const note: MergeNote = {
        added: Number(payload["added"] ?? 0),
        replaced: Number(payload["replaced"] ?? 0),
        source: String(payload["source"] ?? ""),
      };
      return { ...advanced, merges: [...advanced.merges, note] };
    }
    default:
      return advanced;
  }
}

export function applyFrames(
  state: ConsoleState,
  frames: readonly EventFrame[],
): ConsoleState {
  let current = state;
  for (const frame of frames) {
    current = applyFrame(current, frame);
  }
  return current;
}

/** Rows in display order (sorted by student id). */
export function sortedRows(state: ConsoleState): RollCallRow[] {
  return [...state.rows.values()].sort((a, b) =>
    a.studentId < b.studentId ? -1 : a.studentId > b.studentId ? 1 : 0,
  );
}
