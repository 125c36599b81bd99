/** Tree activation panel and the scrolling activation-history strip. */
import type { CockpitState } from "./state";

export function renderTreePanel(root: HTMLElement, state: CockpitState): void {
  const lines: string[] = [];
  const nodeNames = Object.keys(state.nodes).sort();
  const leafIds = Object.keys(state.leaves).sort();
  for (const name of nodeNames) {
    lines.push(row(name, state.nodes[name], 0));
    for (const id of leafIds) {
      if (id.startsWith(`${name}/`)) lines.push(row(id.slice(name.length + 1), state.leaves[id], 1));
    }
  }
  for (const id of leafIds) {
    if (!id.includes("/")) lines.push(row(id, state.leaves[id], 0));
  }
  root.innerHTML = lines.join("") || "<div class='row dim'>no script loaded</div>";
}

function row(label: string, on: boolean, depth: number): string {
  const cls = on ? "row on" : "row dim";
  const pad = 8 + depth * 18;
  return `<div class="${cls}" style="padding-left:${pad}px">${escapeHtml(label)}</div>`;
}

function escapeHtml(text: string): string {
  return text.replace(/[&<>]/g, (c) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;" })[c] as string);
}

/** One column per tick message: rows are branches, overlaid with the d curve. */
export function drawHistory(canvas: HTMLCanvasElement, state: CockpitState): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const columns = state.history.slice(-canvas.width);
  const nodeNames = Object.keys(state.nodes).sort();
  const rowHeight = nodeNames.length > 0 ? canvas.height / (nodeNames.length + 1) : canvas.height;
  const palette = ["#2471a3", "#c0392b", "#239b56", "#b7950b", "#7d3c98"];

  columns.forEach((col, x) => {
    col.nodes.forEach((name) => {
      const rowIdx = nodeNames.indexOf(name);
      if (rowIdx < 0) return;
      ctx.fillStyle = palette[rowIdx % palette.length];
      ctx.fillRect(x, rowIdx * rowHeight + 2, 1, rowHeight - 4);
    });
  });

  // distance overlay, scaled to the corridor diagonal
  ctx.strokeStyle = "#555";
  ctx.lineWidth = 1;
  ctx.beginPath();
  let started = false;
  columns.forEach((col, x) => {
    if (col.d === null) return;
    const y = canvas.height - (col.d / 7.2) * canvas.height;
    if (!started) {
      ctx.moveTo(x, y);
      started = true;
    } else {
      ctx.lineTo(x, y);
    }
  });
  ctx.stroke();

  ctx.fillStyle = "#333";
  ctx.font = "10px sans-serif";
  nodeNames.forEach((name, i) => {
    ctx.fillText(name, 4, i * rowHeight + 12);
  });
}
