/** Shared types for the roll-call console and the fixed alert palette. */

export type AlertLevel =
  | "Normal"
  | "YellowMany"
  | "YellowConsecutive"
  | "RedNoAccreditation";

export type RowColor = "neutral" | "yellow" | "red";

/** Fixed mapping from alert level to row color; never derived elsewhere. */
export const ALERT_COLORS: Record<AlertLevel, RowColor> = {
  Normal: "neutral",
  YellowMany: "yellow",
  YellowConsecutive: "yellow",
  RedNoAccreditation: "red",
};

export function alertColor(level: AlertLevel): RowColor {
  return ALERT_COLORS[level];
}

export type RowStatus = "NotYet" | "Present" | "Absent";

export interface RollCallRow {
  readonly studentId: string;
  readonly displayName: string;
  readonly photoRef: string | null;
  readonly status: RowStatus;
  readonly alert: AlertLevel;
  readonly lastEventSeq: number;
}

export interface RosterEntry {
  readonly student_id: string;
  readonly display_name: string;
  readonly email: string;
  readonly photo_ref: string | null;
  readonly tag: string | null;
}

export interface EventFrame {
  readonly seq: number;
  readonly kind:
    | "SessionOpened"
    | "Tap"
    | "Alert"
    | "SessionClosed"
    | "MergeCompleted";
  readonly payload: Record<string, unknown>;
}

export interface ClosureSummary {
  readonly absentees: readonly string[];
  readonly followupsWritten: number;
  readonly followupsSkipped: readonly string[];
  readonly closedAt: number;
}

export interface UnknownTap {
  readonly tag: string;
  readonly seq: number;
}

export interface MergeNote {
  readonly added: number;
  readonly replaced: number;
  readonly source: string;
}

/** Whole console state: a pure fold of roster snapshot + frame prefix. */
export interface ConsoleState {
  readonly rows: ReadonlyMap<string, RollCallRow>;
  readonly unknownTaps: readonly UnknownTap[];
  readonly sessionOpen: boolean;
  readonly closure: ClosureSummary | null;
  readonly merges: readonly MergeNote[];
  readonly lastSeq: number;
}
