// Operator console wiring: live mode (chat with the robot, watch the
// board) and replay mode (scrub a saved trace).
//
// Every chat line is rendered from exactly one stream/trace record; the
// /skill response's speech is not appended directly, because the same
// turns arrive on the stream with sequence numbers and render once even
// across reconnects.

import { ApiError, BackendClient } from "./api.js";
import type { MetricsSnapshot } from "./protocol.js";
import { createReplay, parseTrace, ReplayParseError, type ReplayEngine } from "./replay.js";
import { StreamClient, type ConnectionStatus } from "./stream.js";
import { applyRecord, applySnapshot, emptyView, type ViewModel } from "./view.js";

interface Elements {
  chat: HTMLElement;
  board: HTMLElement;
  badge: HTMLElement;
  strip: HTMLElement;
  banner: HTMLElement;
  modeIndicator: HTMLElement;
  input: HTMLInputElement;
  sendButton: HTMLButtonElement;
  replayFile: HTMLInputElement;
  scrubber: HTMLInputElement;
  playButton: HTMLButtonElement;
  speed: HTMLSelectElement;
}

function grab(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) {
    throw new Error(`missing element #${id}`);
  }
  return el;
}

export function renderView(view: ViewModel, els: Pick<Elements, "chat" | "board" | "badge">): void {
  els.chat.replaceChildren(
    ...view.chat.map((line) => {
      const div = document.createElement("div");
      div.className = `chat-line ${line.speaker}`;
      const stamp = document.createElement("span");
      stamp.className = "stamp";
      stamp.textContent = `[${line.t.toFixed(3)}]`;
      const body = document.createElement("span");
      body.textContent = ` ${line.speaker === "user" ? "you" : "robot"}: ${line.text}`;
      div.append(stamp, body);
      return div;
    }),
  );
  els.chat.scrollTop = els.chat.scrollHeight;
  els.board.replaceChildren(
    ...Object.entries(view.board).map(([step, status]) => {
      const row = document.createElement("div");
      row.className = `step ${status}`;
      row.textContent = `${step}: ${status}`;
      return row;
    }),
  );
  els.badge.textContent = view.robot.gripper
    ? `robot: ${view.robot.mode} (holding ${view.robot.gripper})`
    : `robot: ${view.robot.mode}`;
  els.badge.className = `badge ${view.robot.mode}`;
}

export function renderMetricsStrip(el: HTMLElement, metrics: MetricsSnapshot): void {
  el.textContent =
    `execution ${metrics.execution_time.toFixed(1)}s | ` +
    `downtime ${metrics.robot_downtime.toFixed(1)}s | ` +
    `turns ${metrics.user_turns}/${metrics.robot_turns} | ` +
    `failures ${metrics.failures}`;
}

export function renderReplayStrip(el: HTMLElement, view: ViewModel): void {
  el.textContent =
    `t ${view.counters.t.toFixed(1)}s | ` +
    `turns ${view.counters.userTurns}/${view.counters.robotTurns} | ` +
    `failures ${view.counters.failures}` +
    (view.counters.ended ? ` | ended (${view.counters.endReason})` : "");
}

export function startConsole(baseUrl: string, session = `console-${Date.now()}`): void {
  const els: Elements = {
    chat: grab("chat"),
    board: grab("board"),
    badge: grab("badge"),
    strip: grab("metrics-strip"),
    banner: grab("banner"),
    modeIndicator: grab("mode-indicator"),
    input: grab("say") as HTMLInputElement,
    sendButton: grab("send") as HTMLButtonElement,
    replayFile: grab("replay-file") as HTMLInputElement,
    scrubber: grab("scrubber") as HTMLInputElement,
    playButton: grab("play") as HTMLButtonElement,
    speed: grab("speed") as HTMLSelectElement,
  };
  const client = new BackendClient(baseUrl, session);
  let view = emptyView();
  let replay: ReplayEngine | null = null;
  let playing = false;

  const showBanner = (text: string, kind: "error" | "info" | "") => {
    els.banner.textContent = text;
    els.banner.className = kind;
  };

  const onStatus = (status: ConnectionStatus) => {
    if (status === "connected") {
      showBanner("", "");
      els.input.disabled = false;
      els.sendButton.disabled = false;
    } else if (status === "disconnected") {
      showBanner("connection lost; retrying...", "error");
      els.input.disabled = true;
      els.sendButton.disabled = true;
    } else if (status === "closed") {
      showBanner("run finished", "info");
    }
  };

  const stream = new StreamClient({
    baseUrl,
    onRecord: (record) => {
      if (replay === null) {
        applyRecord(view, record, session);
        renderView(view, els);
      }
    },
    onStatus,
    onError: () => undefined,
  });

  const refreshMetrics = async () => {
    try {
      renderMetricsStrip(els.strip, await client.metrics());
    } catch {
      /* metrics are cosmetic; the banner already reflects connectivity */
    }
  };

  const boot = async () => {
    try {
      const snapshot = await client.state();
      els.modeIndicator.textContent = `mode: ${snapshot.mode}`;
      applySnapshot(view, snapshot);
      renderView(view, els);
      await client.openSession();
    } catch (err) {
      showBanner(`cannot reach backend: ${String(err)}`, "error");
    }
    void stream.run();
    setInterval(() => void refreshMetrics(), 2000);
  };

  els.sendButton.addEventListener("click", () => void send());
  els.input.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter") {
      void send();
    }
  });

  const send = async () => {
    const text = els.input.value.trim();
    if (!text) {
      return;
    }
    els.input.value = "";
    try {
      await client.sendUtterance(text);
      // the turn itself arrives via the stream and renders there
    } catch (err) {
      if (err instanceof ApiError) {
        showBanner(`${err.code}: ${err.message}`, "error");
      } else {
        showBanner(`send failed: ${String(err)}`, "error");
      }
    }
  };

  // --- replay mode ----------------------------------------------------

  els.replayFile.addEventListener("change", async () => {
    const file = els.replayFile.files?.[0];
    if (!file) {
      return;
    }
    try {
      const records = parseTrace(await file.text());
      replay = createReplay(records);
      els.scrubber.max = String(replay.duration);
      els.scrubber.value = "0";
      showBanner(`replaying ${file.name} (${records.length} records)`, "info");
      const snapshot = replay.seek(0);
      renderView(snapshot, els);
      renderReplayStrip(els.strip, snapshot);
    } catch (err) {
      if (err instanceof ReplayParseError) {
        showBanner(`replay halted at record ${err.recordIndex}: ${err.message}`, "error");
      } else {
        showBanner(`replay failed: ${String(err)}`, "error");
      }
    }
  });

  els.scrubber.addEventListener("input", () => {
    if (replay === null) {
      return;
    }
    const snapshot = replay.seek(Number(els.scrubber.value));
    renderView(snapshot, els);
    renderReplayStrip(els.strip, snapshot);
  });

  els.playButton.addEventListener("click", () => {
    playing = !playing;
    els.playButton.textContent = playing ? "pause" : "play";
  });

  let lastTick = performance.now();
  const tick = (now: number) => {
    const dt = now - lastTick;
    lastTick = now;
    if (replay !== null && playing && !replay.finished) {
      const snapshot = replay.advance(dt, Number(els.speed.value));
      els.scrubber.value = String(replay.position);
      renderView(snapshot, els);
      renderReplayStrip(els.strip, snapshot);
    }
    requestAnimationFrame(tick);
  };
  requestAnimationFrame(tick);

  void boot();
}
