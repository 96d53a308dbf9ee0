/** Gateway client: REST calls plus the resumable event stream.
 *
 * The console never mutates attendance locally; every change is an API
 * call and the table only moves when the corresponding frame arrives.
 */

import type { EventFrame, RosterEntry } from "./model.js";

export interface GatewayError {
  readonly status: number;
  readonly error: string;
  readonly detail: string;
}

export class GatewayClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async request(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<unknown> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    const parsed = text ? JSON.parse(text) : null;
    if (!response.ok) {
      const failure = parsed as { error?: string; detail?: string } | null;
      throw <GatewayError>{
        status: response.status,
        error: failure?.error ?? `HTTP ${response.status}`,
        detail: failure?.detail ?? text,
      };
    }
    return parsed;
  }

  async roster(lectureId: string): Promise<RosterEntry[]> {
    return (await this.request("GET", `/lectures/${lectureId}/roster`)) as RosterEntry[];
  }

  async events(sessionKey: string, since: number): Promise<EventFrame[]> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/sessions/${sessionKey}/events?since=${since}`,
      { method: "GET" },
    );
    if (!response.ok) {
      throw <GatewayError>{
        status: response.status,
        error: `HTTP ${response.status}`,
        detail: await response.text(),
      };
    }
    const text = await response.text();
    return text
      .split("\n")
      .filter((line) => line.length > 0)
      .map((line) => JSON.parse(line) as EventFrame);
  }

  async tap(sessionKey: string, tag: string): Promise<unknown> {
    return this.request("POST", `/sessions/${sessionKey}/taps`, { tag });
  }

  async close(sessionKey: string): Promise<unknown> {
    return this.request("POST", `/sessions/${sessionKey}/close`);
  }

  async bind(studentId: string, tag: string): Promise<unknown> {
    return this.request("POST", "/bindings", { student_id: studentId, tag });
  }

  async merge(body: {
    peer_file?: string;
    peer_address?: string;
    token?: string;
  }): Promise<unknown> {
    return this.request("POST", "/merge", body);
  }

  async tabulation(lectureId: string): Promise<string> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/lectures/${lectureId}/tabulation`,
      { method: "GET" },
    );
    return response.text();
  }
}

export type OverrideOutcome =
  | { kind: "applied" }
  | { kind: "suggest_bind"; studentId: string; message: string }
  | { kind: "error"; message: string };

/** Mark a student present by posting a synthetic tap of their card.
 * Students with no bound card get a bind suggestion instead, and API
 * refusals (closed session, unknown entities) come back as inline
 * messages, never thrown at the table. */
export async function manualOverride(
  client: GatewayClient,
  sessionKey: string,
  roster: readonly RosterEntry[],
  studentId: string,
): Promise<OverrideOutcome> {
  const entry = roster.find((r) => r.student_id === studentId);
  if (entry === undefined) {
    return { kind: "error", message: `unknown student ${studentId}` };
  }
  if (entry.tag === null) {
    return {
      kind: "suggest_bind",
      studentId,
      message: `${studentId} has no card bound; bind one to mark present`,
    };
  }
  try {
    await client.tap(sessionKey, entry.tag);
    return { kind: "applied" };
  } catch (err) {
    const failure = err as GatewayError;
    return {
      kind: "error",
      message: `${failure.status}: ${failure.detail || failure.error}`,
    };
  }
}

/** Bind an unknown card to a chosen student, then tap it in. */
export async function bindAndTap(
  client: GatewayClient,
  sessionKey: string,
  tag: string,
  studentId: string,
): Promise<OverrideOutcome> {
  try {
    await client.bind(studentId, tag);
    await client.tap(sessionKey, tag);
    return { kind: "applied" };
  } catch (err) {
    const failure = err as GatewayError;
    return {
      kind: "error",
      message: `${failure.status}: ${failure.detail || failure.error}`,
    };
  }
}

export interface StreamHandle {
  stop(): void;
}

/** Poll the event stream, resuming from the last seen sequence number.
 * Fetch failures flip a stale flag and polling keeps retrying, so a
 * reconnect resumes exactly where the console left off. */
export function followEvents(
  client: GatewayClient,
  sessionKey: string,
  options: {
    since?: number;
    intervalMs?: number;
    onFrames: (frames: EventFrame[]) => void;
    onStale?: (stale: boolean) => void;
    setTimer?: typeof setTimeout;
    clearTimer?: typeof clearTimeout;
  },
): StreamHandle {
  const setTimer = options.setTimer ?? setTimeout;
  const clearTimer = options.clearTimer ?? clearTimeout;
  const interval = options.intervalMs ?? 500;
  let since = options.since ?? -1;
  let stopped = false;
  let timer: ReturnType<typeof setTimeout> | undefined;

  const tick = async (): Promise<void> => {
    if (stopped) return;
    try {
      const frames = await client.events(sessionKey, since);
      if (frames.length > 0) {
        const last = frames[frames.length - 1];
        if (last !== undefined) since = last.seq;
        options.onFrames(frames);
      }
      options.onStale?.(false);
    } catch {
      options.onStale?.(true); // stale indicator until the next good poll
    }
    if (!stopped) timer = setTimer(tick, interval);
  };
  void tick();

  return {
    stop() {
      stopped = true;
      if (timer !== undefined) clearTimer(timer);
    },
  };
}
