/** Message types of the session-service wire protocol (docs/protocol.md). */

export interface AgentSnapshot {
  x: number;
  y: number;
  body_yaw: number;
  head_yaw: number;
  arm_mode: "idle" | "pointing" | "waving";
  arm_dir: number;
}

export interface Point {
  x: number;
  y: number;
}

export interface WorldSnapshot {
  agent: AgentSnapshot;
  visitor: Point;
  stand: Point;
  front_of_stand: Point;
}

export interface HelloMessage {
  type: "hello";
  version: number;
  session: string;
  mode: string;
  hz: number;
}

export interface TickMessage {
  type: "tick";
  tick: number;
  time: number;
  mode: string;
  world: WorldSnapshot;
  d: number | null;
  activations: { leaves: string[]; nodes: string[] };
}

export interface StatusMessage {
  type: "status";
  mode: string;
  note: string;
  tick: number;
  session: string;
}

export interface ScriptLoadedMessage {
  type: "script_loaded";
  leaves: number;
  nodes: string[];
}

export interface RecordStoppedMessage {
  type: "record_stopped";
  name: string;
  samples: number;
}

export interface ErrorMessage {
  type: "error";
  request?: string;
  message: string;
}

export interface AckMessage {
  type: "ack";
  request: string;
  tick: number;
}

export type ServerMessage =
  | HelloMessage
  | TickMessage
  | StatusMessage
  | ScriptLoadedMessage
  | RecordStoppedMessage
  | ErrorMessage
  | AckMessage;

export interface ControlInput {
  type: "input";
  drive: [number, number];
  turn: number;
  head: number;
  arm: "none" | "wave" | "point_at_stand" | "point_at_visitor" | "freeze";
}

export function zeroInput(): ControlInput {
  return { type: "input", drive: [0, 0], turn: 0, head: 0, arm: "none" };
}

export function sameInput(a: ControlInput, b: ControlInput): boolean {
  return (
    a.drive[0] === b.drive[0] &&
    a.drive[1] === b.drive[1] &&
    a.turn === b.turn &&
    a.head === b.head &&
    a.arm === b.arm
  );
}
