"""Trial orchestration: seam once, then per-frame confidence/track/guidance.

One session is one trial over one seam.  Frames go through
partition -> confidence update -> normalize -> binarize -> contours ->
dimension filter -> confidence gate -> arc tracking, then guidance against
the moving target once the travel direction has locked (20 valid smoothed
centers with enough net motion).  Every frame appends one line to the
session record and broadcasts one UPDATE to subscribers.

Record grammar, one UTF-8 line each, all floats at 6 significant digits:

    config <key=value ...>          session parameters, fixed key order
    scenario <directive ...>        one line per scenario directive
    seam <key=value ...>            localized seam summary
    <frame>,Cx,Cy,Csx,Csy,Qx,Qy,cue,err,eps,valid     one per frame
    footer,<n>,<eps>,<gamma>
    sha256 <hex digest of everything above>

Missing values (no detection, no target yet) serialize as nan; cue is one
of green/red/blue/none; valid is 0/1.  The record deliberately excludes
the session id and stage timings so that two runs of the same scenario
and config produce byte-identical records.

Protocol grammar (newline-delimited messages over any byte stream):

    HELLO id=<sid> <config payload>
    SEAM <seam payload>
    UPDATE <record update line>
    REPORT <footer payload>
    ERROR <code> <stage>
    INPUT <t> <x> <y>               client -> server, drive mode only

UPDATE payloads are byte-identical to the record's update lines, so a
subscriber's message log can be diffed directly against the record.
"""
from __future__ import annotations

import hashlib
import threading
import uuid
from collections import deque
from dataclasses import dataclass, field, fields as dc_fields, replace

import numpy as np

from .confidence import (CLASS_HIGH, CLASS_MEDIUM, DEFAULT_FLOOR,
                         DEFAULT_GROWTH_BASE, HIGH_THRESHOLD,
                         MEDIUM_THRESHOLD, classify_tiles, normalize_map,
                         partition_tiles, update_confidence)
from .core import GrayFrame, ImagePoint
from .errors import (CorruptRecord, InvalidConfig, OutOfOrderFrame,
                     TooFewFrames, UnknownSession, WeldError)
from .guidance import (DEFAULT_TOLERANCE_PX, DIRECTION_WINDOW,
                       DirectionEstimate, TargetSchedule, TrialReport, cue,
                       estimate_direction, oriented_path, project_arc_length,
                       score, target_point)
from .seam import SeamConfig, SeamReport, localize_seam
from .sim import (Scenario, TraceScript, parse_scenario, render_hdr_frame,
                  scenario_to_text)
from .tracking import (DEFAULT_BINARIZE_THRESHOLD, DEFAULT_MAX_AREA,
                       DEFAULT_MIN_AREA, TrackerState, binarize,
                       confidence_gate, dimension_filter, extract_contours,
                       track_arc)

SUBSCRIBER_QUEUE_LIMIT = 256
MIN_VALID_FRAMES = DIRECTION_WINDOW


def _f6(x) -> str:
    return f"{float(x):.6g}"


@dataclass
class SessionConfig:
    """Every knob of the per-frame pipeline, validated against the module
    preconditions it feeds.  speed_mm_s = None takes the scenario's speed."""

    scenario: Scenario
    session_id: str = ""
    live_feed: bool = False
    tile_size: int = 32
    growth_base: float = DEFAULT_GROWTH_BASE
    floor: float = DEFAULT_FLOOR
    high_threshold: float = HIGH_THRESHOLD
    medium_threshold: float = MEDIUM_THRESHOLD
    binarize_threshold: int = DEFAULT_BINARIZE_THRESHOLD
    min_area: float = DEFAULT_MIN_AREA
    max_area: float = DEFAULT_MAX_AREA
    gate_px: float | None = None
    tolerance_px: float = DEFAULT_TOLERANCE_PX
    speed_mm_s: float | None = None
    seam: SeamConfig = field(default_factory=SeamConfig)

    def __post_init__(self):
        if not isinstance(self.scenario, Scenario):
            raise InvalidConfig("config needs a scenario")
        if self.tile_size < 1:
            raise InvalidConfig("tile_size must be positive")
        if self.growth_base <= 0 or self.floor <= 0:
            raise InvalidConfig("growth base and floor must be positive")
        if not 0 < self.medium_threshold < self.high_threshold <= 1:
            raise InvalidConfig("need 0 < medium < high <= 1")
        if not 0 <= self.binarize_threshold <= 255:
            raise InvalidConfig("binarize threshold outside [0, 255]")
        if not 0 < self.min_area < self.max_area:
            raise InvalidConfig("need 0 < min_area < max_area")
        if self.gate_px is not None and self.gate_px <= 0:
            raise InvalidConfig("gate distance must be positive")
        if self.tolerance_px <= 0:
            raise InvalidConfig("cue tolerance must be positive")
        if self.speed_mm_s is not None and self.speed_mm_s <= 0:
            raise InvalidConfig("target speed must be positive")


# record config line: fixed key order, session id deliberately excluded
_CFG_INT = ("live_feed", "tile_size", "binarize_threshold")
_CFG_FLOAT = ("growth_base", "floor", "high_threshold", "medium_threshold",
              "min_area", "max_area", "tolerance_px")
_CFG_OPT = ("gate_px", "speed_mm_s")  # float or the word auto


def config_payload(config: SessionConfig) -> str:
    parts = []
    for k in _CFG_INT:
        parts.append(f"{k}={int(getattr(config, k))}")
    for k in _CFG_FLOAT:
        parts.append(f"{k}={_f6(getattr(config, k))}")
    for k in _CFG_OPT:
        v = getattr(config, k)
        parts.append(f"{k}=auto" if v is None else f"{k}={_f6(v)}")
    for f in dc_fields(SeamConfig):
        v = getattr(config.seam, f.name)
        parts.append(f"seam_{f.name}={v}" if f.type == "int"
                     else f"seam_{f.name}={_f6(v)}")
    return " ".join(parts)


def _parse_config(payload: str, scenario: Scenario) -> SessionConfig:
    kv = {}
    for tok in payload.split():
        if "=" not in tok:
            raise CorruptRecord(f"bad config token {tok!r}")
        k, v = tok.split("=", 1)
        kv[k] = v
    try:
        seam_kwargs = {}
        for f in dc_fields(SeamConfig):
            raw = kv.pop(f"seam_{f.name}")
            seam_kwargs[f.name] = int(raw) if f.type == "int" else float(raw)
        kwargs = {}
        for k in _CFG_INT:
            kwargs[k] = int(kv.pop(k))
        for k in _CFG_FLOAT:
            kwargs[k] = float(kv.pop(k))
        for k in _CFG_OPT:
            raw = kv.pop(k)
            kwargs[k] = None if raw == "auto" else float(raw)
        kwargs["live_feed"] = bool(kwargs["live_feed"])
    except KeyError as missing:
        raise CorruptRecord(f"config line missing {missing}") from None
    if kv:
        raise CorruptRecord(f"unknown config keys {sorted(kv)}")
    return SessionConfig(scenario=scenario, seam=SeamConfig(**seam_kwargs),
                         **kwargs)


def seam_payload(report: SeamReport) -> str:
    p2 = report.path.points_2d
    return (f"x0={_f6(p2[0][0])} y0={_f6(p2[0][1])}"
            f" x1={_f6(p2[-1][0])} y1={_f6(p2[-1][1])}"
            f" samples={len(p2)} length_mm={_f6(report.path.length_mm)}"
            f" dropped={report.dropped_points}")


@dataclass(frozen=True)
class GuidanceUpdate:
    """One frame's guidance state; record_line is the normative wire form."""

    frame: int
    c: ImagePoint | None
    c_smooth: ImagePoint | None
    q: ImagePoint | None
    cue: str
    err: float
    eps_running: float
    valid: bool
    n_high: int
    n_medium: int

    def record_line(self) -> str:
        nan = float("nan")
        cx, cy = (self.c.x, self.c.y) if self.c is not None else (nan, nan)
        sx, sy = ((self.c_smooth.x, self.c_smooth.y)
                  if self.c_smooth is not None else (nan, nan))
        qx, qy = (self.q.x, self.q.y) if self.q is not None else (nan, nan)
        return (f"{self.frame},{_f6(cx)},{_f6(cy)},{_f6(sx)},{_f6(sy)},"
                f"{_f6(qx)},{_f6(qy)},{self.cue},{_f6(self.err)},"
                f"{_f6(self.eps_running)},{int(self.valid)}")


class Subscriber:
    """Bounded line queue; overflowing it marks the subscriber dropped."""

    def __init__(self, limit: int = SUBSCRIBER_QUEUE_LIMIT):
        self._q: deque[str] = deque()
        self.limit = limit
        self.dropped = False
        self.finished = False

    def push(self, line: str) -> bool:
        if len(self._q) >= self.limit:
            self.dropped = True
            return False
        self._q.append(line)
        return True

    def pop(self) -> str | None:
        return self._q.popleft() if self._q else None

    def drain(self) -> list[str]:
        out = list(self._q)
        self._q.clear()
        return out

    def __len__(self) -> int:
        return len(self._q)


class Session:
    """Single trial: localized seam at creation, frames via ingest_frame,
    TrialReport and the full record out of finalize.

    The per-frame path is a strict single consumer; only the subscriber
    list is shared with other threads.
    """

    def __init__(self, config: SessionConfig):
        self.config = config
        self.id = config.session_id or uuid.uuid4().hex[:12]
        self.scenario = config.scenario
        cloud, _ = self.scenario.build()
        self.seam: SeamReport = localize_seam(cloud, config.seam)
        self._speed = (config.speed_mm_s if config.speed_mm_s is not None
                       else self.scenario.speed_mm_s)
        self._conf_raw: np.ndarray | None = None
        self._tracker = TrackerState(gate_px=config.gate_px)
        self._last_t: int | None = None
        self._centers: list[ImagePoint] = []  # smoothed, valid frames only
        self._direction: DirectionEstimate | None = None
        self._schedule: TargetSchedule | None = None
        self._err_total = 0.0
        self._trajectory: list[tuple[ImagePoint, ImagePoint]] = []
        self._invalid = 0
        self._update_lines: list[str] = []
        self._trace_rows: list[tuple[int, float, float]] = []
        self._report: TrialReport | None = None
        self._footer_payload: str | None = None
        self._record: str | None = None
        self._subs: list[Subscriber] = []
        self._sub_lock = threading.Lock()

    # --- streaming -------------------------------------------------------

    def hello_line(self) -> str:
        return f"HELLO id={self.id} {config_payload(self.config)}"

    def seam_line(self) -> str:
        return f"SEAM {seam_payload(self.seam)}"

    def subscribe(self) -> Subscriber:
        """Join the update stream: header first, then updates from now on.
        After finalize the stream is just header plus footer."""
        sub = Subscriber()
        sub.push(self.hello_line())
        sub.push(self.seam_line())
        with self._sub_lock:
            if self._footer_payload is not None:
                sub.push(f"REPORT {self._footer_payload}")
                sub.finished = True
            else:
                self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: Subscriber) -> None:
        with self._sub_lock:
            if sub in self._subs:
                self._subs.remove(sub)

    def _broadcast(self, line: str, *, final: bool = False) -> None:
        with self._sub_lock:
            alive = []
            for sub in self._subs:
                if sub.push(line):
                    sub.finished = final
                    if not final:
                        alive.append(sub)
                # a full queue means the consumer stalled; it is cut loose
                # rather than allowed to stall the trainee-facing loop
            self._subs = alive

    # --- per-frame pipeline ------------------------------------------------

    def ingest_frame(self, frame: GrayFrame) -> GuidanceUpdate:
        t = int(frame.timestamp)
        if self._report is not None:
            raise OutOfOrderFrame("session already finalized")
        if self._last_t is not None and t <= self._last_t:
            raise OutOfOrderFrame(f"frame {t} after frame {self._last_t}")
        self._last_t = t

        cfg = self.config
        grid = partition_tiles(frame, cfg.tile_size)
        if self._conf_raw is None:
            self._conf_raw = np.zeros_like(grid.means)
        self._conf_raw = update_confidence(grid, self._conf_raw,
                                           cfg.growth_base, cfg.floor)
        norm = normalize_map(self._conf_raw)
        classes = classify_tiles(norm, cfg.high_threshold, cfg.medium_threshold)
        n_high = int((classes == CLASS_HIGH).sum())
        n_medium = int((classes == CLASS_MEDIUM).sum())

        mask = binarize(frame, cfg.binarize_threshold)
        contours = extract_contours(mask)
        contours = dimension_filter(contours, cfg.min_area, cfg.max_area)
        contours = confidence_gate(contours, norm, cfg.tile_size,
                                   cfg.medium_threshold)
        est = track_arc(contours, self._tracker, frame.diagonal)

        if est.valid:
            self._centers.append(est.smoothed)
        else:
            self._invalid += 1

        if self._schedule is None and len(self._centers) >= DIRECTION_WINDOW:
            self._try_lock(t)

        q = target_point(self._schedule, t) if self._schedule is not None else None
        color = "none"
        err = float("nan")
        if q is not None and est.valid:
            sig = cue(q, est.smoothed, self._direction.direction,
                      cfg.tolerance_px)
            color = sig.color.value
            err = sig.instant_error
            self._err_total += (abs(est.smoothed.x - q.x) / q.x
                                + abs(est.smoothed.y - q.y) / q.y)
            self._trajectory.append((est.smoothed, q))
        eps = (self._err_total / len(self._trajectory)
               if self._trajectory else 0.0)

        update = GuidanceUpdate(frame=t, c=est.center, c_smooth=est.smoothed,
                                q=q, cue=color, err=err, eps_running=eps,
                                valid=est.valid, n_high=n_high,
                                n_medium=n_medium)
        line = update.record_line()
        self._update_lines.append(line)
        self._broadcast(f"UPDATE {line}")
        return update

    def _try_lock(self, t: int) -> None:
        # keep sliding the window until the net motion clears the floor
        try:
            est = estimate_direction(self._centers[-DIRECTION_WINDOW:])
        except WeldError:
            return
        self._direction = est
        p2, p3 = oriented_path(self.seam.path.points_2d,
                               self.seam.path.points_3d, est.direction)
        offset = project_arc_length(p2, p3, self._centers[-1])
        self._schedule = TargetSchedule(points_2d=p2, points_3d=p3,
                                        speed_mm_s=self._speed, start_time=t,
                                        frame_rate=self.scenario.frame_rate,
                                        start_offset_mm=offset)

    def ingest_input(self, t: int, x: float, y: float) -> GuidanceUpdate:
        """Drive mode: render the simulator frame for an externally supplied
        torch position, then ingest it like any sensor frame.

        Coordinates are quantized to the record's 6-significant-digit
        precision first, so a replayed record re-renders the exact frames
        this session saw."""
        t = int(t)
        x = float(f"{float(x):g}")
        y = float(f"{float(y):g}")
        one = replace(self.scenario,
                      script=TraceScript(points=((t, x, y),)))
        frame = render_hdr_frame(one, t)
        frame.timestamp = t
        update = self.ingest_frame(frame)
        self._trace_rows.append((t, float(x), float(y)))
        return update

    def run(self) -> TrialReport:
        """Scenario-driven trial: every frame in order, then finalize."""
        for t in range(self.scenario.frames):
            frame = render_hdr_frame(self.scenario, t)
            frame.timestamp = t
            self.ingest_frame(frame)
        return self.finalize()

    # --- completion ------------------------------------------------------

    def finalize(self) -> TrialReport:
        if self._report is not None:
            return self._report
        if len(self._centers) < MIN_VALID_FRAMES or not self._trajectory:
            raise TooFewFrames(
                f"{len(self._centers)} valid frames, {len(self._trajectory)}"
                f" scored; need {MIN_VALID_FRAMES} valid and a locked target")
        eps = self._err_total / len(self._trajectory)
        gamma = score(eps)
        self._report = TrialReport(trajectory=tuple(self._trajectory),
                                   start_point=self._direction.start,
                                   direction=self._direction.direction,
                                   avg_error=eps, score=gamma,
                                   n=len(self._trajectory),
                                   invalid_count=self._invalid)
        self._footer_payload = f"{self._report.n},{_f6(eps)},{_f6(gamma)}"
        self._record = self._assemble_record()
        self._broadcast(f"REPORT {self._footer_payload}", final=True)
        return self._report

    def _record_scenario(self) -> Scenario:
        if not self._trace_rows:
            return self.scenario
        frames = self._trace_rows[-1][0] + 1
        events = tuple(ev for ev in self.scenario.events if ev.t1 < frames)
        return replace(self.scenario, frames=frames, events=events,
                       script=TraceScript(points=tuple(self._trace_rows)))

    def _assemble_record(self) -> str:
        lines = [f"config {config_payload(self.config)}"]
        for sline in scenario_to_text(self._record_scenario()).splitlines():
            lines.append(f"scenario {sline}")
        lines.append(f"seam {seam_payload(self.seam)}")
        lines.extend(self._update_lines)
        lines.append(f"footer,{self._footer_payload}")
        body = "\n".join(lines) + "\n"
        digest = hashlib.sha256(body.encode()).hexdigest()
        return f"{body}sha256 {digest}\n"

    @property
    def record(self) -> str | None:
        """Full record text; None until the session is finalized."""
        return self._record

    @property
    def footer_payload(self) -> str | None:
        return self._footer_payload


# --- record parsing and replay ----------------------------------------------

@dataclass(frozen=True)
class ParsedRecord:
    config: SessionConfig
    frames: tuple[int, ...]
    update_lines: tuple[str, ...]
    footer: str  # "<n>,<eps>,<gamma>"
    seam: str


def parse_record(text: str) -> ParsedRecord:
    lines = text.splitlines()
    if len(lines) < 2 or not lines[-1].startswith("sha256 "):
        raise CorruptRecord("record has no integrity line")
    body = "\n".join(lines[:-1]) + "\n"
    want = lines[-1].split(" ", 1)[1].strip()
    got = hashlib.sha256(body.encode()).hexdigest()
    if got != want:
        raise CorruptRecord("integrity hash mismatch")

    config_line = None
    scenario_lines: list[str] = []
    seam = None
    updates: list[str] = []
    footer = None
    for line in lines[:-1]:
        if line.startswith("config "):
            if config_line is not None:
                raise CorruptRecord("duplicate config line")
            config_line = line[len("config "):]
        elif line.startswith("scenario "):
            scenario_lines.append(line[len("scenario "):])
        elif line.startswith("seam "):
            seam = line[len("seam "):]
        elif line.startswith("footer,"):
            footer = line[len("footer,"):]
        else:
            updates.append(line)
    if config_line is None or not scenario_lines or seam is None or footer is None:
        raise CorruptRecord("record is missing a section")

    try:
        scenario = parse_scenario("\n".join(scenario_lines) + "\n")
    except (ValueError, IndexError) as exc:
        raise CorruptRecord(f"bad scenario section: {exc}") from None
    config = _parse_config(config_line, scenario)

    frames = []
    for line in updates:
        head = line.split(",", 1)[0]
        try:
            frames.append(int(head))
        except ValueError:
            raise CorruptRecord(f"malformed update line {line!r}") from None
    return ParsedRecord(config=config, frames=tuple(frames),
                        update_lines=tuple(updates), footer=footer, seam=seam)


def replay(text: str) -> TrialReport:
    """Re-run a record's scenario and config from scratch.

    The replayed session must reproduce the record byte for byte; any
    divergence from the recorded footer or update lines is reported as
    corruption rather than returned silently.
    """
    rec = parse_record(text)
    session = Session(rec.config)
    for t in rec.frames:
        frame = render_hdr_frame(session.scenario, t)
        frame.timestamp = t
        session.ingest_frame(frame)
    report = session.finalize()
    if session.record != text:
        raise CorruptRecord("replay diverged from the recorded trial")
    return report


# --- multi-session service ---------------------------------------------------

class SessionService:
    """Holds live sessions and persists finished records under data_dir."""

    def __init__(self, data_dir: str | None = None):
        self.data_dir = data_dir
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create_session(self, config: SessionConfig) -> str:
        session = Session(config)
        with self._lock:
            self._sessions[session.id] = session
        return session.id

    def get(self, session_id: str) -> Session:
        with self._lock:
            try:
                return self._sessions[session_id]
            except KeyError:
                raise UnknownSession(session_id) from None

    def ingest_frame(self, session_id: str, frame: GrayFrame) -> GuidanceUpdate:
        return self.get(session_id).ingest_frame(frame)

    def finalize_session(self, session_id: str) -> TrialReport:
        session = self.get(session_id)
        report = session.finalize()
        if self.data_dir is not None:
            self._persist(session)
        return report

    def subscribe(self, session_id: str) -> Subscriber:
        return self.get(session_id).subscribe()

    def _persist(self, session: Session) -> None:
        import os

        records = os.path.join(self.data_dir, "records")
        os.makedirs(records, exist_ok=True)
        path = os.path.join(records, f"{session.id}.rec")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(session.record)
        index = os.path.join(self.data_dir, "index.csv")
        fresh = not os.path.exists(index)
        with open(index, "a", encoding="utf-8") as fh:
            if fresh:
                fh.write("session,record,score\n")
            fh.write(f"{session.id},records/{session.id}.rec,"
                     f"{_f6(session._report.score)}\n")
