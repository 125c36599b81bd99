/** Cockpit wiring: WebSocket, keyboard, render loop, session buttons. */
import { drawWorld } from "./canvas";
import { ARM_HOTKEYS, KEY_BINDINGS, InputTracker } from "./keyboard";
import { drawHistory, renderTreePanel } from "./panels";
import { applyMessage, initialState, CockpitState } from "./state";

const params = new URLSearchParams(location.search);
const service = params.get("service") ?? `${location.hostname}:8750`;

let state: CockpitState = initialState();
const tracker = new InputTracker();
let socket: WebSocket | null = null;
let dirty = false;

const $ = (id: string) => document.getElementById(id) as HTMLElement;
const worldCanvas = $("world") as HTMLCanvasElement;
const historyCanvas = $("history") as HTMLCanvasElement;

function send(payload: object): void {
  if (socket && socket.readyState === WebSocket.OPEN) {
    socket.send(JSON.stringify(payload));
  }
}

function connect(): void {
  socket = new WebSocket(`ws://${service}/ws?scenario=demo`);
  tracker.reset();
  socket.onmessage = (event) => {
    let msg: unknown;
    try {
      msg = JSON.parse(event.data as string);
    } catch (err) {
      console.warn("malformed message dropped", err);
      return;
    }
    const before = state.tick;
    state = applyMessage(state, msg);
    dirty = true;
    // one input opportunity per broadcast frame, sent only on change
    if (state.tick !== before && state.mode === "demo-recording") {
      const input = tracker.nextToSend();
      if (input) send(input);
    }
  };
  socket.onclose = () => {
    state = { ...state, mode: "disconnected" };
    dirty = true;
  };
}

window.addEventListener("keydown", (ev) => {
  if (ev.code in KEY_BINDINGS || ev.code in ARM_HOTKEYS) {
    ev.preventDefault();
    tracker.keyDown(ev.code);
  }
});
window.addEventListener("keyup", (ev) => tracker.keyUp(ev.code));
window.addEventListener("blur", () => tracker.releaseAll());

$("btn-record").addEventListener("click", () => send({ type: "record_start" }));
$("btn-stop").addEventListener("click", () => send({ type: "stop" }));
$("btn-load").addEventListener("click", () => {
  const text = ($("script-text") as HTMLTextAreaElement).value;
  send({ type: "load_script", text });
});
$("btn-run").addEventListener("click", () => send({ type: "run" }));

function frame(): void {
  if (dirty) {
    drawWorld(worldCanvas, state);
    drawHistory(historyCanvas, state);
    renderTreePanel($("tree"), state);
    $("status").textContent =
      state.lastError !== null
        ? `error: ${state.lastError}`
        : state.lastRecording !== null
          ? `mode: ${state.mode} | saved ${state.lastRecording.name} (${state.lastRecording.samples} samples)`
          : `mode: ${state.mode}`;
    dirty = false;
  }
  requestAnimationFrame(frame);
}

connect();
requestAnimationFrame(frame);
