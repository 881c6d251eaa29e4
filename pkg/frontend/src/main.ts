import { DriveClient, ObserveClient, SocketLike, wsUrl } from "./client.js";
import { render } from "./render.js";
import { initialState, reduce } from "./state.js";

interface Meta {
  width: number;
  height: number;
  frames: number;
  frame_rate: number;
  tolerance_px: number;
}

async function boot(): Promise<void> {
  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const status = document.getElementById("status") as HTMLElement;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("no 2d context");

  const meta: Meta = await (await fetch("/meta")).json();
  canvas.width = meta.width;
  canvas.height = meta.height;

  let state = initialState();
  const onLine = (line: string) => {
    state = reduce(state, line);
    if (state.phase === "done" && state.report) {
      status.textContent =
        `finished: score ${state.report.score.toFixed(2)} over ` +
        `${state.report.n} samples (reload to run again)`;
    } else if (state.phase === "failed") {
      status.textContent = `failed: ${state.lastError}`;
    }
  };

  const observeSid = new URLSearchParams(location.search).get("observe");
  if (observeSid !== null) {
    const sock = new WebSocket(
      wsUrl(`/ws/observe/${observeSid}`, location),
    ) as unknown as SocketLike;
    new ObserveClient(sock, { onLine });
    status.textContent = `observing session ${observeSid}`;
  } else {
    let pointer: { x: number; y: number } | null = null;
    canvas.addEventListener("pointermove", (ev) => {
      const r = canvas.getBoundingClientRect();
      pointer = {
        x: ((ev.clientX - r.left) / r.width) * meta.width,
        y: ((ev.clientY - r.top) / r.height) * meta.height,
      };
    });
    canvas.addEventListener("pointerleave", () => {
      pointer = null;
    });
    const sock = new WebSocket(
      wsUrl("/ws/drive", location),
    ) as unknown as SocketLike;
    new DriveClient(sock, {
      frames: meta.frames,
      frameRate: meta.frame_rate,
      getPointer: () => pointer,
      onLine,
      onClose: () => {
        if (state.phase !== "done" && state.phase !== "failed") {
          status.textContent = "connection closed";
        }
      },
    });
    status.textContent =
      `follow the seam with the pointer; ${meta.frames} frames at ` +
      `${meta.frame_rate} fps`;
  }

  const loop = () => {
    render(ctx, state, meta.width, meta.height);
    requestAnimationFrame(loop);
  };
  loop();
}

boot().catch((e) => {
  const status = document.getElementById("status");
  if (status) status.textContent = `boot failed: ${e}`;
});
