/** Pure view-state reducer.
 *
 * Every rendered quantity originates from a service message; the cockpit
 * never simulates or extrapolates. Applying the same message log always
 * yields the same state, so replays are deterministic by construction.
 */
import type { ServerMessage, TickMessage, WorldSnapshot } from "./protocol";

export const HISTORY_LIMIT = 2000;

export interface HistoryColumn {
  tick: number;
  d: number | null;
  leaves: string[];
  nodes: string[];
}

export interface CockpitState {
  session: string | null;
  mode: string;
  tick: number;
  time: number;
  world: WorldSnapshot | null;
  d: number | null;
  /** every leaf id ever seen -> active on the latest tick */
  leaves: Record<string, boolean>;
  /** every branch name ever seen -> active on the latest tick */
  nodes: Record<string, boolean>;
  history: HistoryColumn[];
  lastError: string | null;
  lastRecording: { name: string; samples: number } | null;
  processed: number;
  dropped: number;
}

export function initialState(): CockpitState {
  return {
    session: null,
    mode: "disconnected",
    tick: -1,
    time: 0,
    world: null,
    d: null,
    leaves: {},
    nodes: {},
    history: [],
    lastError: null,
    lastRecording: null,
    processed: 0,
    dropped: 0,
  };
}

function wellFormedTick(msg: TickMessage): boolean {
  return (
    typeof msg.tick === "number" &&
    msg.world != null &&
    msg.world.agent != null &&
    msg.world.visitor != null &&
    msg.activations != null &&
    Array.isArray(msg.activations.leaves) &&
    Array.isArray(msg.activations.nodes)
  );
}

/** Apply one raw (already JSON-parsed) message; malformed input is counted
 * and dropped, never thrown. */
export function applyMessage(state: CockpitState, raw: unknown): CockpitState {
  const msg = raw as ServerMessage;
  if (!msg || typeof msg !== "object" || typeof (msg as { type?: unknown }).type !== "string") {
    return { ...state, dropped: state.dropped + 1 };
  }
  const next: CockpitState = { ...state, processed: state.processed + 1 };
  switch (msg.type) {
    case "hello":
      next.session = msg.session;
      next.mode = msg.mode;
      return next;
    case "status":
      next.mode = msg.mode;
      return next;
    case "script_loaded": {
      const nodes = { ...state.nodes };
      for (const name of msg.nodes) nodes[name] = false;
      next.nodes = nodes;
      return next;
    }
    case "record_stopped":
      next.lastRecording = { name: msg.name, samples: msg.samples };
      return next;
    case "error":
      next.lastError = msg.message;
      return next;
    case "ack":
      return next;
    case "tick": {
      if (!wellFormedTick(msg)) {
        return { ...state, dropped: state.dropped + 1 };
      }
      next.mode = msg.mode;
      next.tick = msg.tick;
      next.time = msg.time;
      next.world = msg.world;
      next.d = msg.d;
      const leaves: Record<string, boolean> = {};
      for (const id of Object.keys(state.leaves)) leaves[id] = false;
      for (const id of msg.activations.leaves) leaves[id] = true;
      const nodes: Record<string, boolean> = {};
      for (const id of Object.keys(state.nodes)) nodes[id] = false;
      for (const id of msg.activations.nodes) nodes[id] = true;
      next.leaves = leaves;
      next.nodes = nodes;
      const column: HistoryColumn = {
        tick: msg.tick,
        d: msg.d,
        leaves: [...msg.activations.leaves].sort(),
        nodes: [...msg.activations.nodes].sort(),
      };
      next.history =
        state.history.length >= HISTORY_LIMIT
          ? [...state.history.slice(1), column]
          : [...state.history, column];
      return next;
    }
    default:
      return { ...state, dropped: state.dropped + 1 };
  }
}

export function applyLog(state: CockpitState, log: unknown[]): CockpitState {
  let cur = state;
  for (const msg of log) cur = applyMessage(cur, msg);
  return cur;
}

/** Stable digest of the view state, used by replay-determinism checks. */
export function stateDigest(state: CockpitState): string {
  return JSON.stringify({
    session: state.session,
    mode: state.mode,
    tick: state.tick,
    d: state.d,
    leaves: Object.entries(state.leaves).sort(),
    nodes: Object.entries(state.nodes).sort(),
    historyLength: state.history.length,
    lastColumn: state.history[state.history.length - 1] ?? null,
    processed: state.processed,
    dropped: state.dropped,
  });
}
