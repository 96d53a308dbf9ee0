/** Browser bootstrap: wire the gateway client, the frame fold, and the
 * renderer to the page. Configuration comes from query parameters:
 * ?gateway=http://127.0.0.1:8000&lecture=PROG1&session=PROG1:2013-10-07:devA
 */

import {
  GatewayClient,
  bindAndTap,
  followEvents,
  manualOverride,
} from "./client.js";
import { renderConsole } from "./console.js";
import type { ConsoleState, RosterEntry } from "./model.js";
import { applyFrames, initialState } from "./reducer.js";

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const gateway = params.get("gateway") ?? "http://127.0.0.1:8000";
  const lectureId = params.get("lecture") ?? "";
  const sessionKey = params.get("session") ?? "";
  const root = document.getElementById("console");
  if (root === null || lectureId === "" || sessionKey === "") {
    document.body.innerHTML =
      "<p>missing ?lecture= and ?session= query parameters</p>";
    return;
  }

  const client = new GatewayClient(gateway);
  const roster: RosterEntry[] = await client.roster(lectureId);
  let state: ConsoleState = initialState(roster);
  let stale = false;
  let notice = "";

  const redraw = (): void => {
    root.innerHTML =
      (notice ? `<div class="notice">${notice}</div>` : "") +
      renderConsole(state, stale);
  };

  const say = (message: string): void => {
    notice = message;
    redraw();
  };

  followEvents(client, sessionKey, {
    onFrames: (frames) => {
      state = applyFrames(state, frames);
      redraw();
    },
    onStale: (isStale) => {
      if (stale !== isStale) {
        stale = isStale;
        redraw();
      }
    },
  });

  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.matches("button.override")) {
      const studentId = target.dataset["student"] ?? "";
      void manualOverride(client, sessionKey, roster, studentId).then((outcome) => {
        if (outcome.kind !== "applied") say(outcome.message);
      });
    } else if (target.matches("button.bind-unknown")) {
      const tag = target.dataset["tag"] ?? "";
      const studentId = window.prompt(`bind card ${tag} to which student id?`);
      if (studentId) {
        void bindAndTap(client, sessionKey, tag, studentId).then((outcome) => {
          if (outcome.kind !== "applied") say(outcome.message);
        });
      }
    } else if (target.id === "close-session") {
      void client
        .close(sessionKey)
        .catch((err: { status?: number; detail?: string }) =>
          say(`${err.status ?? ""} ${err.detail ?? "close failed"}`),
        );
    } else if (target.id === "merge") {
      const peer = window.prompt("peer gateway URL or exchange file path?");
      if (peer) {
        const token = window.prompt("pairing token?") ?? "";
        const body = peer.startsWith("http")
          ? { peer_address: peer, token }
          : { peer_file: peer, token };
        void client
          .merge(body)
          .then((report) => say(`merge done: ${JSON.stringify(report)}`))
          .catch((err: { status?: number; detail?: string }) =>
            say(`merge failed: ${err.status ?? ""} ${err.detail ?? ""}`),
          );
      }
    } else if (target.id === "show-tabulation") {
      void client.tabulation(lectureId).then((csv) => {
        say(`<pre class="tabulation">${csv.replace(/</g, "&lt;")}</pre>`);
      });
    }
  });

  redraw();
}

void boot();
