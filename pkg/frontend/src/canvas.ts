/** World canvas: corridor, stand, greeting spot, visitor, agent glyphs. */
import type { CockpitState } from "./state";

const CORRIDOR: [number, number] = [6.5, 3.0];
const MARGIN = 24;

function scaler(canvas: HTMLCanvasElement) {
  const sx = (canvas.width - 2 * MARGIN) / CORRIDOR[0];
  const sy = (canvas.height - 2 * MARGIN) / CORRIDOR[1];
  const s = Math.min(sx, sy);
  return (x: number, y: number): [number, number] => [
    MARGIN + x * s,
    canvas.height - MARGIN - y * s, // world y grows upward
  ];
}

export function drawWorld(canvas: HTMLCanvasElement, state: CockpitState): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const w2c = scaler(canvas);

  ctx.strokeStyle = "#888";
  ctx.lineWidth = 2;
  const [x0, y0] = w2c(0, CORRIDOR[1]);
  const [x1, y1] = w2c(CORRIDOR[0], 0);
  ctx.strokeRect(x0, y0, x1 - x0, y1 - y0);

  const world = state.world;
  if (!world) return;

  // stand and the greeting spot
  const [sx, sy] = w2c(world.stand.x, world.stand.y);
  ctx.fillStyle = "#8a5a2b";
  ctx.fillRect(sx - 8, sy - 8, 16, 16);
  const [fx, fy] = w2c(world.front_of_stand.x, world.front_of_stand.y);
  ctx.strokeStyle = "#8a5a2b";
  ctx.beginPath();
  ctx.arc(fx, fy, 6, 0, 2 * Math.PI);
  ctx.setLineDash([3, 3]);
  ctx.stroke();
  ctx.setLineDash([]);

  // visitor
  const [vx, vy] = w2c(world.visitor.x, world.visitor.y);
  ctx.fillStyle = "#c0392b";
  ctx.beginPath();
  ctx.arc(vx, vy, 7, 0, 2 * Math.PI);
  ctx.fill();

  // agent: body circle, body heading, gaze, arm glyph
  const a = world.agent;
  const [ax, ay] = w2c(a.x, a.y);
  ctx.fillStyle = "#2471a3";
  ctx.beginPath();
  ctx.arc(ax, ay, 9, 0, 2 * Math.PI);
  ctx.fill();
  const ray = (angle: number, len: number, style: string, width: number) => {
    ctx.strokeStyle = style;
    ctx.lineWidth = width;
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(ax + len * Math.cos(angle), ay - len * Math.sin(angle));
    ctx.stroke();
  };
  ray(a.body_yaw, 18, "#1a5276", 3);
  ray(a.body_yaw + a.head_yaw, 26, "#7d3c98", 1.5);
  if (a.arm_mode === "pointing") {
    ray(a.arm_dir, 22, "#239b56", 2);
  } else if (a.arm_mode === "waving") {
    const swing = Math.sin(a.arm_dir) * 0.5;
    ray(a.body_yaw + Math.PI / 2 + swing, 16, "#239b56", 2);
  }

  ctx.fillStyle = "#333";
  ctx.font = "12px sans-serif";
  const dText = state.d === null ? "?" : state.d.toFixed(2);
  ctx.fillText(`d = ${dText} m   tick ${state.tick}   ${state.mode}`, MARGIN, 16);
}
