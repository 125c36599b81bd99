/** Held keys to control inputs.
 *
 * Axes come from held keys (forward/back, strafe, turn, head); arm modes
 * are momentary hotkeys that stay in force until another is pressed. The
 * sender transmits at most one input per broadcast frame and only when the
 * input differs from the last one sent, so an idle keyboard produces a
 * single zero message followed by silence.
 */
import { ControlInput, sameInput, zeroInput } from "./protocol";

export const KEY_BINDINGS: Record<string, string> = {
  KeyW: "forward",
  ArrowUp: "forward",
  KeyS: "back",
  ArrowDown: "back",
  KeyA: "left",
  KeyD: "right",
  ArrowLeft: "turnLeft",
  ArrowRight: "turnRight",
  KeyQ: "headLeft",
  KeyE: "headRight",
};

export const ARM_HOTKEYS: Record<string, ControlInput["arm"]> = {
  Digit1: "wave",
  Digit2: "point_at_stand",
  Digit3: "point_at_visitor",
  Digit4: "freeze",
  Digit0: "none",
};

export class InputTracker {
  private held = new Set<string>();
  private arm: ControlInput["arm"] = "none";
  private lastSent: ControlInput | null = null;

  keyDown(code: string): void {
    if (code in KEY_BINDINGS) this.held.add(KEY_BINDINGS[code]);
    if (code in ARM_HOTKEYS) this.arm = ARM_HOTKEYS[code];
  }

  keyUp(code: string): void {
    if (code in KEY_BINDINGS) this.held.delete(KEY_BINDINGS[code]);
  }

  releaseAll(): void {
    this.held.clear();
  }

  current(): ControlInput {
    const axis = (pos: string, neg: string) =>
      (this.held.has(pos) ? 1 : 0) - (this.held.has(neg) ? 1 : 0);
    const input = zeroInput();
    input.drive = [axis("forward", "back"), axis("left", "right")];
    input.turn = axis("turnLeft", "turnRight");
    input.head = axis("headLeft", "headRight");
    input.arm = this.arm;
    return input;
  }

  /** Input to transmit this frame, or null when nothing changed. */
  nextToSend(): ControlInput | null {
    const input = this.current();
    if (this.lastSent !== null && sameInput(this.lastSent, input)) {
      return null;
    }
    this.lastSent = input;
    return input;
  }

  /** Forget the transmission state (used on reconnect). */
  reset(): void {
    this.lastSent = null;
    this.held.clear();
    this.arm = "none";
  }
}
