// Browser entry point: connect over WebSocket (through the TCP bridge),
// render the fleet, forward keyboard teleoperation.

import { LineSplitter, encodeMessage, parseMessage } from "./protocol.js";
import { drawArena, renderPanels } from "./render.js";
import { Session } from "./session.js";

const CANVAS_SIZE = 560;
const RECONNECT_BASE_MS = 500;
const RECONNECT_MAX_MS = 8000;
const KEY_REPEAT_MS = 150;

function wsUrl(): string {
  const params = new URLSearchParams(window.location.search);
  const addr = params.get("ws") ?? "127.0.0.1:8765";
  return `ws://${addr}`;
}

function start(): void {
  const canvas = document.getElementById("arena") as HTMLCanvasElement;
  canvas.width = CANVAS_SIZE;
  canvas.height = CANVAS_SIZE;
  const ctx = canvas.getContext("2d")!;
  const banner = document.getElementById("banner")!;
  const panels = document.getElementById("panels")!;
  const keysHeld = new Set<string>();

  let session = new Session(() => {});
  let backoff = RECONNECT_BASE_MS;
  let alertWasActive = false;

  const chime = () => {
    try {
      const audio = new AudioContext();
      const osc = audio.createOscillator();
      osc.frequency.value = 880;
      osc.connect(audio.destination);
      osc.start();
      osc.stop(audio.currentTime + 0.15);
    } catch {
      // audio is best-effort
    }
  };

  const refresh = () => {
    drawArena(ctx, session, CANVAS_SIZE);
    panels.innerHTML = renderPanels(session);
    if (session.status === "connected") {
      banner.textContent = session.alertActive
        ? `intervention needed: robot ${session.focus}`
        : "connected - all robots autonomous";
      banner.className = session.alertActive ? "alert" : "ok";
    } else if (session.status === "version-mismatch" || session.status === "error") {
      banner.textContent = session.errorMessage ?? "gateway error";
      banner.className = "error";
    }
    if (session.alertActive && !alertWasActive) chime();
    alertWasActive = session.alertActive;
  };

  const connect = () => {
    banner.textContent = "connecting to gateway...";
    banner.className = "warn";
    const ws = new WebSocket(wsUrl());
    const splitter = new LineSplitter();
    session = new Session((msg) => ws.send(encodeMessage(msg)));

    ws.onmessage = (event) => {
      for (const line of splitter.push(String(event.data) + "\n")) {
        const msg = parseMessage(line);
        if (msg) session.handle(msg);
      }
      refresh();
    };
    ws.onopen = () => {
      backoff = RECONNECT_BASE_MS;
    };
    ws.onclose = () => {
      banner.textContent = `gateway unreachable - retrying in ${(backoff / 1000).toFixed(1)}s`;
      banner.className = "warn";
      setTimeout(connect, backoff);
      backoff = Math.min(backoff * 2, RECONNECT_MAX_MS);
    };
    ws.onerror = () => ws.close();
  };

  window.addEventListener("keydown", (ev) => {
    if (ev.repeat) return;
    keysHeld.add(ev.code);
    session.keyboard(keysHeld);
    refresh();
  });
  window.addEventListener("keyup", (ev) => {
    keysHeld.delete(ev.code);
  });
  // while keys stay held, keep feeding actions at a human-ish cadence
  setInterval(() => {
    if (keysHeld.size > 0) {
      session.keyboard(keysHeld);
      refresh();
    }
  }, KEY_REPEAT_MS);

  connect();
}

window.addEventListener("DOMContentLoaded", start);
