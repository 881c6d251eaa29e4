/** Canvas drawing: seam line, paced target in its cue color, trainee trace.
 *  Pure function of the view state; all quantities come off the wire.
 */
import { g6 } from "./protocol.js";
import { ViewState } from "./state.js";

export const CUE_FILL: Record<string, string> = {
  green: "#35c04f",
  red: "#e04545",
  blue: "#4a7dff",
  none: "#8a8f98",
};

const SEAM_COLOR = "#d8dce2";
const TRACE_COLOR = "#f2b234";
const BG = "#101418";

function hudLines(state: ViewState): string[] {
  const lines: string[] = [];
  if (state.phase === "idle") {
    lines.push("connecting...");
    return lines;
  }
  const u = state.last;
  if (u) {
    lines.push(`frame ${u.frame}`);
    lines.push(u.valid ? `arc ${g6(u.csx ?? 0)}, ${g6(u.csy ?? 0)}` : "arc lost");
    lines.push(u.err === null ? "err -" : `err ${g6(u.err)} px`);
    lines.push(u.eps === null ? "eps -" : `eps ${g6(u.eps)}`);
  }
  if (state.report) {
    lines.push(`score ${g6(state.report.score)}`);
    lines.push(`samples ${state.report.n}`);
  }
  if (state.lastError) lines.push(`! ${state.lastError}`);
  return lines;
}

export function render(
  ctx: CanvasRenderingContext2D,
  state: ViewState,
  width: number,
  height: number,
): void {
  ctx.fillStyle = BG;
  ctx.fillRect(0, 0, width, height);

  if (state.seam) {
    const s = state.seam;
    ctx.strokeStyle = SEAM_COLOR;
    ctx.lineWidth = 2;
    ctx.setLineDash([8, 6]);
    ctx.beginPath();
    ctx.moveTo(s.x0, s.y0);
    ctx.lineTo(s.x1, s.y1);
    ctx.stroke();
    ctx.setLineDash([]);
    // start gets a ring, end gets a tick
    ctx.beginPath();
    ctx.arc(s.x0, s.y0, 6, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.fillStyle = SEAM_COLOR;
    ctx.fillRect(s.x1 - 3, s.y1 - 3, 6, 6);
  }

  if (state.trace.length > 1) {
    ctx.strokeStyle = TRACE_COLOR;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.moveTo(state.trace[0].x, state.trace[0].y);
    for (const p of state.trace) ctx.lineTo(p.x, p.y);
    ctx.stroke();
  }

  const u = state.last;
  if (u && u.valid && u.csx !== null && u.csy !== null) {
    ctx.fillStyle = TRACE_COLOR;
    ctx.beginPath();
    ctx.arc(u.csx, u.csy, 4, 0, 2 * Math.PI);
    ctx.fill();
  }

  if (state.target) {
    const tol = Number(state.config["tolerance_px"] ?? "12");
    ctx.strokeStyle = CUE_FILL[state.target.cue];
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.arc(state.target.x, state.target.y, tol, 0, 2 * Math.PI);
    ctx.stroke();
  }

  ctx.fillStyle = "#c7ccd4";
  ctx.font = "13px ui-monospace, monospace";
  let y = 18;
  for (const line of hudLines(state)) {
    ctx.fillText(line, 10, y);
    y += 16;
  }

  if (state.phase === "done" && state.report) {
    const msg = `score ${g6(state.report.score)}`;
    ctx.font = "bold 34px ui-monospace, monospace";
    const w = ctx.measureText(msg).width;
    ctx.fillStyle = "#101418cc";
    ctx.fillRect(width / 2 - w / 2 - 18, height / 2 - 34, w + 36, 58);
    ctx.fillStyle = CUE_FILL.green;
    ctx.fillText(msg, width / 2 - w / 2, height / 2 + 6);
  }
}
