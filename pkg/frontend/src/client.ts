/** WebSocket plumbing. Drive mode samples the pointer on the scenario's
 *  frame clock and emits one INPUT line per frame; observe mode only reads.
 *  The socket and timer are injectable so the sampling loop is testable
 *  without a browser.
 */
import { FINALIZE_LINE, formatInput } from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: ((ev: unknown) => void) | null;
}

export interface DriveOptions {
  frames: number;
  frameRate: number;
  getPointer: () => { x: number; y: number } | null;
  onLine: (line: string) => void;
  onClose?: () => void;
  setTimer?: (fn: () => void, ms: number) => unknown;
  clearTimer?: (handle: unknown) => void;
}

export class DriveClient {
  private t = 0;
  private timer: unknown = null;
  private finished = false;

  constructor(
    private socket: SocketLike,
    private opts: DriveOptions,
  ) {
    socket.onmessage = (ev) => this.opts.onLine(String(ev.data));
    socket.onclose = () => {
      this.stopTimer();
      this.opts.onClose?.();
    };
    socket.onerror = () => {
      this.stopTimer();
      this.opts.onClose?.();
    };
    const setTimer = opts.setTimer ?? ((fn, ms) => setInterval(fn, ms));
    this.timer = setTimer(() => this.tick(), 1000 / opts.frameRate);
  }

  /** One frame: forward the pointer if present, finalize past the end. */
  tick(): void {
    if (this.finished) return;
    if (this.t >= this.opts.frames) {
      this.finish();
      return;
    }
    const p = this.opts.getPointer();
    if (p === null) return; // pointer not over the canvas yet; frame unused
    this.socket.send(formatInput(this.t, p.x, p.y));
    this.t += 1;
  }

  finish(): void {
    if (this.finished) return;
    this.finished = true;
    this.stopTimer();
    this.socket.send(FINALIZE_LINE);
  }

  private stopTimer(): void {
    if (this.timer !== null) {
      const clear = this.opts.clearTimer ?? ((h) => clearInterval(h as never));
      clear(this.timer);
      this.timer = null;
    }
  }
}

export interface ObserveOptions {
  onLine: (line: string) => void;
  onClose?: () => void;
}

export class ObserveClient {
  constructor(socket: SocketLike, opts: ObserveOptions) {
    socket.onmessage = (ev) => opts.onLine(String(ev.data));
    socket.onclose = () => opts.onClose?.();
    socket.onerror = () => opts.onClose?.();
  }
}

export function wsUrl(path: string, base: Location | URL): string {
  const proto = base.protocol === "https:" ? "wss:" : "ws:";
  return `${proto}//${base.host}${path}`;
}
