/** HTML rendering for the console: pure string builders over the state,
 * so the same state always renders the same markup. */

import type { ConsoleState, RollCallRow } from "./model.js";
import { alertColor } from "./model.js";
import { sortedRows } from "./reducer.js";

function escapeHtml(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function initials(name: string): string {
  return name
    .split(/\s+/)
    .filter((part) => part.length > 0)
    .map((part) => part[0] ?? "")
    .join("")
    .toUpperCase()
    .slice(0, 2);
}

function face(row: RollCallRow): string {
  if (row.photoRef !== null && row.photoRef !== "") {
    return `<img class="face" src="${escapeHtml(row.photoRef)}" alt="">`;
  }
  return `<span class="face initials">${escapeHtml(initials(row.displayName))}</span>`;
}

export function renderRow(row: RollCallRow): string {
  const color = alertColor(row.alert);
  const override =
    row.status === "NotYet"
      ? `<button class="override" data-student="${escapeHtml(row.studentId)}">mark present</button>`
      : "";
  return (
    `<tr class="row alert-${color} status-${row.status}" data-student="${escapeHtml(row.studentId)}">` +
    `<td>${face(row)}</td>` +
    `<td class="sid">${escapeHtml(row.studentId)}</td>` +
    `<td class="name">${escapeHtml(row.displayName)}</td>` +
    `<td class="status">${row.status}</td>` +
    `<td class="alert">${row.alert}</td>` +
    `<td>${override}</td>` +
    `</tr>`
  );
}

export function renderTable(state: ConsoleState): string {
  const rows = sortedRows(state).map(renderRow).join("");
  return (
    `<table class="rollcall">` +
    `<thead><tr><th></th><th>student</th><th>name</th><th>status</th><th>alert</th><th></th></tr></thead>` +
    `<tbody>${rows}</tbody>` +
    `</table>`
  );
}

export function renderUnknownTaps(state: ConsoleState): string {
  if (state.unknownTaps.length === 0) return "";
  const items = state.unknownTaps
    .map(
      (tap) =>
        `<li>unknown card <code>${escapeHtml(tap.tag)}</code> ` +
        `<button class="bind-unknown" data-tag="${escapeHtml(tap.tag)}">bind to a student…</button></li>`,
    )
    .join("");
  return `<div class="unknown-taps"><h3>Unregistered cards</h3><ul>${items}</ul></div>`;
}

/** Closure summary screen: absentee list plus the follow-up count. */
export function renderClosure(state: ConsoleState): string {
  if (state.closure === null) return "";
  const closure = state.closure;
  if (closure.absentees.length === 0) {
    return `<div class="closure"><h3>Session closed</h3><p class="no-followups">Everyone was present; no follow-ups written.</p></div>`;
  }
  const names = closure.absentees
    .map((sid) => `<li>${escapeHtml(sid)}</li>`)
    .join("");
  const skipped =
    closure.followupsSkipped.length > 0
      ? `<p>${closure.followupsSkipped.length} skipped (no email address).</p>`
      : "";
  return (
    `<div class="closure"><h3>Session closed</h3>` +
    `<p><span class="absentee-count">${closure.absentees.length}</span> absentee(s):</p>` +
    `<ul>${names}</ul>` +
    `<p><span class="followup-count">${closure.followupsWritten}</span> follow-up message(s) written.</p>` +
    skipped +
    `</div>`
  );
}

export function renderStatusBar(state: ConsoleState, stale: boolean): string {
  const connection = stale
    ? `<span class="stale">connection lost — retrying…</span>`
    : `<span class="live">live</span>`;
  const session = state.sessionOpen ? "session open" : state.closure ? "session closed" : "no session";
  const merge =
    state.merges.length > 0
      ? ` · last merge: +${state.merges[state.merges.length - 1]?.added ?? 0} / ~${state.merges[state.merges.length - 1]?.replaced ?? 0}`
      : "";
  return `<div class="statusbar">${connection} · ${session} · seq ${state.lastSeq}${merge}</div>`;
}

export function renderConsole(state: ConsoleState, stale: boolean): string {
  const closeButton = state.sessionOpen
    ? `<button id="close-session">close session</button>`
    : `<button id="close-session" disabled>close session</button>`;
  const mergeButton = `<button id="merge">merge with peer…</button>`;
  const tabulation = `<button id="show-tabulation">tabulation</button>`;
  return (
    renderStatusBar(state, stale) +
    `<div class="actions">${closeButton} ${mergeButton} ${tabulation}</div>` +
    renderTable(state) +
    renderUnknownTaps(state) +
    renderClosure(state)
  );
}
