/** Wire protocol: plain text lines over a WebSocket.
 *
 * Server to client:
 *   HELLO id=<sid> <key=value ...>
 *   SEAM x0=.. y0=.. x1=.. y1=.. samples=.. length_mm=.. dropped=..
 *   UPDATE frame,Cx,Cy,Csx,Csy,Qx,Qy,cue,err,eps,valid
 *   REPORT n,eps,score
 *   ERROR <code> <stage>
 * Client to server (drive mode only):
 *   INPUT <t> <x> <y>         t = -1 finalizes the trial
 *
 * Everything the HUD shows comes out of these fields verbatim; the client
 * performs no guidance math of its own.
 */

export type CueColor = "green" | "red" | "blue" | "none";

export interface Hello {
  kind: "hello";
  id: string;
  config: Record<string, string>;
}

export interface Seam {
  kind: "seam";
  x0: number;
  y0: number;
  x1: number;
  y1: number;
  samples: number;
  lengthMm: number;
  dropped: number;
}

export interface Update {
  kind: "update";
  frame: number;
  cx: number | null;
  cy: number | null;
  csx: number | null;
  csy: number | null;
  qx: number | null;
  qy: number | null;
  cue: CueColor;
  err: number | null;
  eps: number | null;
  valid: boolean;
}

export interface Report {
  kind: "report";
  n: number;
  eps: number;
  score: number;
}

export interface WireError {
  kind: "error";
  code: string;
  stage: string;
}

export type ServerMessage = Hello | Seam | Update | Report | WireError;

const CUES: readonly string[] = ["green", "red", "blue", "none"];

class ProtocolError extends Error {}

function num(field: string, s: string): number {
  const v = Number(s);
  if (s === "" || Number.isNaN(v)) {
    throw new ProtocolError(`bad number for ${field}: ${JSON.stringify(s)}`);
  }
  return v;
}

function optNum(field: string, s: string): number | null {
  return s === "nan" ? null : num(field, s);
}

function kvMap(rest: string): Record<string, string> {
  const out: Record<string, string> = {};
  for (const tok of rest.split(/\s+/)) {
    if (tok === "") continue;
    const eq = tok.indexOf("=");
    if (eq <= 0) throw new ProtocolError(`expected key=value, got ${tok}`);
    out[tok.slice(0, eq)] = tok.slice(eq + 1);
  }
  return out;
}

function parseUpdate(rest: string): Update {
  const f = rest.split(",");
  if (f.length !== 11) {
    throw new ProtocolError(`UPDATE needs 11 fields, got ${f.length}`);
  }
  const cue = f[7];
  if (!CUES.includes(cue)) throw new ProtocolError(`unknown cue ${cue}`);
  if (f[10] !== "0" && f[10] !== "1") {
    throw new ProtocolError(`valid flag must be 0/1, got ${f[10]}`);
  }
  return {
    kind: "update",
    frame: num("frame", f[0]),
    cx: optNum("Cx", f[1]),
    cy: optNum("Cy", f[2]),
    csx: optNum("Csx", f[3]),
    csy: optNum("Csy", f[4]),
    qx: optNum("Qx", f[5]),
    qy: optNum("Qy", f[6]),
    cue: cue as CueColor,
    err: optNum("err", f[8]),
    eps: optNum("eps", f[9]),
    valid: f[10] === "1",
  };
}

export function parseMessage(line: string): ServerMessage {
  const sp = line.indexOf(" ");
  const tag = sp < 0 ? line : line.slice(0, sp);
  const rest = sp < 0 ? "" : line.slice(sp + 1);
  switch (tag) {
    case "HELLO": {
      const kv = kvMap(rest);
      const id = kv["id"];
      if (!id) throw new ProtocolError("HELLO without id");
      delete kv["id"];
      return { kind: "hello", id, config: kv };
    }
    case "SEAM": {
      const kv = kvMap(rest);
      return {
        kind: "seam",
        x0: num("x0", kv["x0"] ?? ""),
        y0: num("y0", kv["y0"] ?? ""),
        x1: num("x1", kv["x1"] ?? ""),
        y1: num("y1", kv["y1"] ?? ""),
        samples: num("samples", kv["samples"] ?? ""),
        lengthMm: num("length_mm", kv["length_mm"] ?? ""),
        dropped: num("dropped", kv["dropped"] ?? ""),
      };
    }
    case "UPDATE":
      return parseUpdate(rest);
    case "REPORT": {
      const f = rest.split(",");
      if (f.length !== 3) throw new ProtocolError("REPORT needs n,eps,score");
      return {
        kind: "report",
        n: num("n", f[0]),
        eps: num("eps", f[1]),
        score: num("score", f[2]),
      };
    }
    case "ERROR": {
      const parts = rest.split(/\s+/).filter((p) => p !== "");
      if (parts.length < 2) throw new ProtocolError("ERROR needs code+stage");
      return { kind: "error", code: parts[0], stage: parts.slice(1).join(" ") };
    }
    default:
      throw new ProtocolError(`unknown message tag ${JSON.stringify(tag)}`);
  }
}

/** Full-precision input line; the server quantizes coordinates itself. */
export function formatInput(t: number, x: number, y: number): string {
  if (!Number.isInteger(t)) throw new ProtocolError(`t must be integer: ${t}`);
  return `INPUT ${t} ${String(x)} ${String(y)}`;
}

export const FINALIZE_LINE = "INPUT -1 0 0";

function expForm(v: number): string {
  const [m0, e0] = v.toExponential(5).split("e");
  let m = m0;
  if (m.includes(".")) m = m.replace(/0+$/, "").replace(/\.$/, "");
  const sign = e0.startsWith("-") ? "-" : "+";
  const digits = e0.replace(/^[+-]/, "").padStart(2, "0");
  return `${m}e${sign}${digits}`;
}

/** Mirror of the wire float style (6 significant digits) for HUD display. */
export function g6(v: number): string {
  if (Number.isNaN(v)) return "nan";
  if (!Number.isFinite(v)) return v > 0 ? "inf" : "-inf";
  if (v === 0) return Object.is(v, -0) ? "-0" : "0";
  const a = Math.abs(v);
  if (a >= 1e-4 && a < 1e6) {
    let s = v.toPrecision(6);
    if (s.includes("e")) return expForm(v); // rounding pushed it over 1e6
    if (s.includes(".")) s = s.replace(/0+$/, "").replace(/\.$/, "");
    return s;
  }
  return expForm(v);
}
