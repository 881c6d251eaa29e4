"""WebSocket transport for the session protocol.

Two endpoints, both speaking one protocol line per WebSocket text message:

    /ws/drive            driver mode; the server creates a session, sends
                         HELLO and SEAM, then answers every
                         "INPUT <t> <x> <y>" with an UPDATE line.
                         "INPUT -1 0 0" finalizes: REPORT, then close.
    /ws/observe/{sid}    read-only subscription to a live or finished
                         session: header first, then updates from the
                         join point on; after finalize just the footer.

A stalled observer whose queue overflows is disconnected rather than
allowed to buffer without bound.  Errors cross the wire as
"ERROR <code> <stage>"; pipeline errors carry their stage, transport
problems use the pseudo-stages protocol and input.

GET /meta returns canvas geometry and pacing for clients; it carries no
guidance state.
"""
from __future__ import annotations

import asyncio
import os

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .errors import UnknownSession, WeldError
from .session import SessionConfig, SessionService, Subscriber

OBSERVER_POLL_S = 0.01


def error_line(exc: Exception) -> str:
    if isinstance(exc, WeldError):
        return f"ERROR {exc.code} {exc.stage}"
    if isinstance(exc, ValueError):
        return "ERROR BadInput input"
    return f"ERROR {type(exc).__name__} internal"


def _parse_input(message: str) -> tuple[int, float, float]:
    parts = message.split()
    if len(parts) != 4 or parts[0] != "INPUT":
        raise _BadMessage(message)
    try:
        return int(parts[1]), float(parts[2]), float(parts[3])
    except ValueError:
        raise _BadMessage(message) from None


class _BadMessage(Exception):
    pass


def build_app(service: SessionService, config: SessionConfig,
              static_dir: str | None = None) -> FastAPI:
    """Wire the service and a session config template into an ASGI app.

    Every drive connection gets a fresh session built from the template;
    the scenario object is shared so its workpiece cache is reused.
    """
    app = FastAPI(title="weldtrainer", docs_url=None, redoc_url=None)

    @app.get("/meta")
    def meta() -> dict:
        sc = config.scenario
        return {
            "width": sc.camera.width,
            "height": sc.camera.height,
            "frames": sc.frames,
            "frame_rate": sc.frame_rate,
            "tolerance_px": config.tolerance_px,
        }

    @app.websocket("/ws/drive")
    async def drive(ws: WebSocket) -> None:
        await ws.accept()
        try:
            sid = service.create_session(config)
        except (WeldError, ValueError) as exc:
            await ws.send_text(error_line(exc))
            await ws.close()
            return
        session = service.get(sid)
        await ws.send_text(session.hello_line())
        await ws.send_text(session.seam_line())
        try:
            while True:
                message = await ws.receive_text()
                try:
                    t, x, y = _parse_input(message)
                except _BadMessage:
                    await ws.send_text("ERROR BadMessage protocol")
                    continue
                if t < 0:
                    try:
                        service.finalize_session(sid)
                    except WeldError as exc:
                        await ws.send_text(error_line(exc))
                        continue
                    await ws.send_text(f"REPORT {session.footer_payload}")
                    await ws.close()
                    return
                try:
                    update = session.ingest_input(t, x, y)
                except (WeldError, ValueError) as exc:
                    await ws.send_text(error_line(exc))
                    continue
                await ws.send_text(f"UPDATE {update.record_line()}")
        except WebSocketDisconnect:
            pass

    @app.websocket("/ws/observe/{sid}")
    async def observe(ws: WebSocket, sid: str) -> None:
        await ws.accept()
        try:
            sub: Subscriber = service.subscribe(sid)
        except UnknownSession as exc:
            await ws.send_text(error_line(exc))
            await ws.close()
            return
        session = service.get(sid)
        try:
            while True:
                line = sub.pop()
                if line is None:
                    if sub.finished:
                        break
                    if sub.dropped:
                        break
                    await asyncio.sleep(OBSERVER_POLL_S)
                    continue
                await ws.send_text(line)
            await ws.close()
        except WebSocketDisconnect:
            pass
        finally:
            session.unsubscribe(sub)

    if static_dir is not None and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True))
    return app
