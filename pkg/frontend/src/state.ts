/** View state as a pure fold over received protocol lines.
 *
 * The reducer copies server fields into the state; it never derives
 * guidance quantities (cue, error, target position) on its own.
 */
import {
  CueColor,
  Report,
  Seam,
  ServerMessage,
  Update,
  parseMessage,
} from "./protocol.js";

export type Phase = "idle" | "live" | "done" | "failed";

export interface TracePoint {
  x: number;
  y: number;
}

export interface ViewState {
  phase: Phase;
  sid: string | null;
  config: Record<string, string>;
  seam: Seam | null;
  trace: TracePoint[];
  target: { x: number; y: number; cue: CueColor } | null;
  last: Update | null;
  report: Report | null;
  lastError: string | null;
}

export function initialState(): ViewState {
  return {
    phase: "idle",
    sid: null,
    config: {},
    seam: null,
    trace: [],
    target: null,
    last: null,
    report: null,
    lastError: null,
  };
}

// errors that end the session rather than describing one bad input
const FATAL_CODES = new Set(["UnknownSession", "TooFewFrames"]);

function applyUpdate(state: ViewState, u: Update): ViewState {
  const trace =
    u.valid && u.csx !== null && u.csy !== null
      ? [...state.trace, { x: u.csx, y: u.csy }]
      : state.trace;
  const target =
    u.qx !== null && u.qy !== null ? { x: u.qx, y: u.qy, cue: u.cue } : null;
  return { ...state, trace, target, last: u };
}

export function apply(state: ViewState, msg: ServerMessage): ViewState {
  switch (msg.kind) {
    case "hello":
      return {
        ...initialState(),
        phase: "live",
        sid: msg.id,
        config: msg.config,
      };
    case "seam":
      return { ...state, seam: msg };
    case "update":
      return applyUpdate(state, msg);
    case "report":
      return { ...state, phase: "done", report: msg };
    case "error": {
      const text = `${msg.code} (${msg.stage})`;
      if (FATAL_CODES.has(msg.code)) {
        return { ...state, phase: "failed", lastError: text };
      }
      return { ...state, lastError: text };
    }
  }
}

/** Fold one raw line; malformed lines mark the state failed. */
export function reduce(state: ViewState, line: string): ViewState {
  let msg: ServerMessage;
  try {
    msg = parseMessage(line);
  } catch (e) {
    return {
      ...state,
      phase: "failed",
      lastError: e instanceof Error ? e.message : String(e),
    };
  }
  return apply(state, msg);
}
