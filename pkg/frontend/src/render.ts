// Canvas rendering of the arena and fleet. All geometry comes from the
// session hello; this module carries no environment constants.

import { Session } from "./session.js";

const MODE_COLORS: Record<string, string> = {
  autonomous: "#2e7dd1",
  queued: "#e0a800",
  serving: "#d64545",
  supervisor: "#d64545",
};

export function drawArena(ctx: CanvasRenderingContext2D, session: Session, size: number): void {
  ctx.clearRect(0, 0, size, size);
  ctx.fillStyle = "#f7f7f2";
  ctx.fillRect(0, 0, size, size);
  const geo = session.geometry;
  if (!geo) return;

  // arena coordinates are [0,1]^2 with y up; canvas y grows down
  const sx = (x: number) => x * size;
  const sy = (y: number) => (1 - y) * size;

  // wall band with its gap
  const [wx0, wx1] = geo.wall_x_band;
  const [gy0, gy1] = geo.gap_y;
  ctx.fillStyle = "#444";
  ctx.fillRect(sx(wx0), sy(1), sx(wx1) - sx(wx0), sy(gy1) - sy(1));
  ctx.fillRect(sx(wx0), sy(gy0), sx(wx1) - sx(wx0), sy(0) - sy(gy0));

  // goal disc
  ctx.beginPath();
  ctx.fillStyle = "rgba(70, 160, 90, 0.55)";
  ctx.arc(sx(geo.goal_center[0]), sy(geo.goal_center[1]), geo.goal_radius * size, 0, 2 * Math.PI);
  ctx.fill();

  // robots
  for (const robot of session.robots.values()) {
    ctx.beginPath();
    ctx.fillStyle = MODE_COLORS[robot.mode] ?? "#999";
    ctx.arc(sx(robot.position[0]), sy(robot.position[1]), 7, 0, 2 * Math.PI);
    ctx.fill();
    if (robot.id === session.focus) {
      ctx.strokeStyle = "#111";
      ctx.lineWidth = 2;
      ctx.stroke();
    }
    ctx.fillStyle = "#111";
    ctx.font = "12px sans-serif";
    ctx.fillText(String(robot.id), sx(robot.position[0]) + 9, sy(robot.position[1]) - 9);
  }
}

export function renderPanels(session: Session): string {
  const rows = [...session.robots.values()]
    .sort((a, b) => a.id - b.id)
    .map((r) => {
      const nov = r.novelty !== undefined ? r.novelty.toExponential(2) : "-";
      const risk = r.risk !== undefined ? r.risk.toFixed(3) : "-";
      const wait = session.waitTicks.get(r.id);
      const waiting = wait !== undefined ? ` (waiting ${wait} ticks)` : "";
      return `<tr class="${r.mode}"><td>${r.id}</td><td>${r.mode}${waiting}</td>` +
        `<td>${r.position[0].toFixed(3)}, ${r.position[1].toFixed(3)}</td>` +
        `<td>${r.episodeStep}</td><td>${nov}</td><td>${risk}</td></tr>`;
    })
    .join("");
  const queue = session.queue.length > 0 ? session.queue.join(" , ") : "empty";
  return `
    <table>
      <tr><th>robot</th><th>mode</th><th>position</th><th>step</th><th>novelty</th><th>risk</th></tr>
      ${rows}
    </table>
    <p>queue: ${queue} | serving: ${session.serving ?? "none"} | focus: ${session.focus ?? "none"}</p>
  `;
}
