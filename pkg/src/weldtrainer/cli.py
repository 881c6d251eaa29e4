"""Operator entry points.

    weldtrainer simulate --scenario FILE --out REC     headless trial
    weldtrainer bench --scenario FILE --methods a,b --out CSV
    weldtrainer replay --in REC                        verify a record
    weldtrainer serve --config FILE [--host H --port P --static DIR]
    weldtrainer report --session SID --out CSV         plot-ready series
    weldtrainer scenario --preset NAME [--out FILE]    write scenario text

All paths resolve against --data-dir (default ".").  A --scenario or
--config argument that is not an existing file is tried as a preset name.

Exit codes: 0 success, 2 usage, 3 pipeline stage error, 4 data corruption.
"""
from __future__ import annotations

import argparse
import hashlib
import os
import sys

import numpy as np
from scipy import ndimage

from .confidence import (classify_tiles, normalize_map, partition_tiles,
                         softmax_update, update_confidence)
from .errors import CorruptRecord, NoArcDetected, WeldError
from .session import (Session, SessionConfig, SessionService, parse_record,
                      replay)
from .sim import (PRESET_NAMES, preset_scenario, parse_scenario, run_scenario,
                  scenario_to_text)
from .tracking import (TrackerState, baseline_contour_center, binarize,
                       confidence_gate, dimension_filter, extract_contours,
                       track_arc)

BENCH_METHODS = ("lic", "softmax", "contour", "intensity")


class UsageError(Exception):
    pass


def _resolve(data_dir: str, path: str) -> str:
    return path if os.path.isabs(path) else os.path.join(data_dir, path)


def _load_scenario(data_dir: str, ref: str):
    path = _resolve(data_dir, ref)
    if os.path.isfile(path):
        with open(path, encoding="utf-8") as fh:
            try:
                return parse_scenario(fh.read())
            except (ValueError, IndexError) as exc:
                raise UsageError(f"bad scenario file {ref}: {exc}") from None
    if ref in PRESET_NAMES:
        return preset_scenario(ref)
    raise UsageError(f"scenario {ref!r}: no such file or preset "
                     f"(presets: {', '.join(PRESET_NAMES)})")


def cmd_simulate(args) -> int:
    scenario = _load_scenario(args.data_dir, args.scenario)
    session = Session(SessionConfig(scenario=scenario))
    report = session.run()
    out = _resolve(args.data_dir, args.out)
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(session.record)
    print(f"score={report.score:.2f} eps={report.avg_error:.6g} "
          f"n={report.n} record={args.out}")
    return 0


def _bench_confidence(frames, truth, update_fn, config: SessionConfig):
    """Shared per-frame loop for the map-gated trackers."""
    raw = None
    tracker = TrackerState(gate_px=config.gate_px)
    rows = []
    for t, frame in enumerate(frames):
        grid = partition_tiles(frame, config.tile_size)
        if raw is None:
            raw = np.zeros_like(grid.means)
        raw = update_fn(grid, raw)
        norm = normalize_map(raw)
        mask = binarize(frame, config.binarize_threshold)
        contours = dimension_filter(extract_contours(mask),
                                    config.min_area, config.max_area)
        contours = confidence_gate(contours, norm, config.tile_size,
                                   config.medium_threshold)
        est = track_arc(contours, tracker, frame.diagonal)
        if est.valid:
            err = float(np.hypot(est.center.x - truth.centers[t][0],
                                 est.center.y - truth.centers[t][1]))
        else:
            err = float("nan")
        rows.append((t, err,
                     int((raw >= config.medium_threshold).sum()),
                     int((raw >= config.high_threshold).sum())))
    return rows


def _bench_baseline(frames, truth, config: SessionConfig, center_fn):
    rows = []
    for t, frame in enumerate(frames):
        mask = binarize(frame, config.binarize_threshold)
        try:
            c = center_fn(frame, mask)
            err = float(np.hypot(c[0] - truth.centers[t][0],
                                 c[1] - truth.centers[t][1]))
        except WeldError:
            err = float("nan")
        rows.append((t, err, float("nan"), float("nan")))
    return rows


def _contour_center(frame, mask):
    c = baseline_contour_center(extract_contours(mask))
    return (c.x, c.y)


def _intensity_center(frame, mask):
    if not mask.any():
        raise NoArcDetected("no bright pixels")
    r, c = ndimage.center_of_mass(mask)
    return (float(c), float(r))


def cmd_bench(args) -> int:
    methods = [m for m in args.methods.split(",") if m]
    if not methods:
        raise UsageError("need at least one method")
    for m in methods:
        if m not in BENCH_METHODS:
            raise UsageError(f"unknown method {m!r} "
                             f"(choose from {', '.join(BENCH_METHODS)})")
    scenario = _load_scenario(args.data_dir, args.scenario)
    config = SessionConfig(scenario=scenario)
    frames, truth = run_scenario(scenario)
    digest = hashlib.sha256()
    for frame in frames:
        digest.update(frame.pixels.tobytes())
    print(f"frames sha256={digest.hexdigest()} n={len(frames)}")

    results = {}
    for m in methods:
        if m == "lic":
            rows = _bench_confidence(
                frames, truth,
                lambda g, p: update_confidence(g, p, config.growth_base,
                                               config.floor),
                config)
        elif m == "softmax":
            rows = _bench_confidence(
                frames, truth, lambda g, p: softmax_update(g, p), config)
        elif m == "contour":
            rows = _bench_baseline(frames, truth, config, _contour_center)
        else:
            rows = _bench_baseline(frames, truth, config, _intensity_center)
        results[m] = rows

    out = _resolve(args.data_dir, args.out)
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("method,frame,err_px,tiles_ge_medium,tiles_ge_high\n")
        for m in methods:
            for t, err, n65, n95 in results[m]:
                fh.write(f"{m},{t},{err:.6g},{n65:.6g},{n95:.6g}\n")

    for m in methods:
        errs = np.array([r[1] for r in results[m]])
        med = float(np.nanmedian(errs))
        p95 = float(np.nanpercentile(errs, 95))
        lost = int(np.isnan(errs).sum())
        line = (f"{m}: median_err={med:.3g}px p95_err={p95:.3g}px"
                f" lost_frames={lost}")
        if m in ("lic", "softmax"):
            n65 = sum(r[2] for r in results[m])
            n95 = sum(r[3] for r in results[m])
            line += f" tiles_ge065_total={n65} tiles_ge095_total={n95}"
        print(line)
    return 0


def cmd_replay(args) -> int:
    path = _resolve(args.data_dir, args.infile)
    if not os.path.isfile(path):
        raise UsageError(f"no record at {args.infile}")
    with open(path, encoding="utf-8") as fh:
        report = replay(fh.read())
    print(f"OK identical score={report.score:.2f} eps={report.avg_error:.6g}")
    return 0


def cmd_serve(args) -> int:
    import socket

    import uvicorn

    from .server import build_app

    scenario = _load_scenario(args.data_dir, args.config)
    config = SessionConfig(scenario=scenario)
    service = SessionService(data_dir=args.data_dir)
    static = _resolve(args.data_dir, args.static) if args.static else None
    app = build_app(service, config, static_dir=static)
    # probe the port up front: uvicorn buries bind errors in its own exit
    try:
        probe = socket.socket()
        probe.bind((args.host, args.port))
        probe.close()
    except OSError as exc:
        print(f"error[serve] cannot bind {args.host}:{args.port}: {exc}",
              file=sys.stderr)
        return 3
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_report(args) -> int:
    index = os.path.join(args.data_dir, "index.csv")
    rec_path = None
    if os.path.isfile(index):
        with open(index, encoding="utf-8") as fh:
            for line in fh.read().splitlines()[1:]:
                sid, rel, _ = line.split(",")
                if sid == args.session:
                    rec_path = os.path.join(args.data_dir, rel)
    if rec_path is None:
        fallback = os.path.join(args.data_dir, "records",
                                f"{args.session}.rec")
        if os.path.isfile(fallback):
            rec_path = fallback
    if rec_path is None or not os.path.isfile(rec_path):
        print(f"error[session] unknown session {args.session}",
              file=sys.stderr)
        return 3
    with open(rec_path, encoding="utf-8") as fh:
        rec = parse_record(fh.read())
    out = _resolve(args.data_dir, args.out)
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    rows = 0
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("frame,Csx,Csy,Qx,Qy,cue,err_px,eps_running\n")
        for line in rec.update_lines:
            f, _, _, sx, sy, qx, qy, cue, err, eps, valid = line.split(",")
            if valid != "1" or qx == "nan":
                continue
            fh.write(f"{f},{sx},{sy},{qx},{qy},{cue},{err},{eps}\n")
            rows += 1
    n = int(rec.footer.split(",")[0])
    print(f"wrote {rows} rows (trajectory n={n}) to {args.out}")
    return 0


def cmd_scenario(args) -> int:
    if args.list:
        print("\n".join(PRESET_NAMES))
        return 0
    if not args.preset:
        raise UsageError("need --preset NAME or --list")
    if args.preset not in PRESET_NAMES:
        raise UsageError(f"unknown preset {args.preset!r} "
                         f"(presets: {', '.join(PRESET_NAMES)})")
    text = scenario_to_text(preset_scenario(args.preset))
    if args.out:
        out = _resolve(args.data_dir, args.out)
        os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="weldtrainer",
                                description=__doc__.splitlines()[0])
    p.add_argument("--data-dir", default=".",
                   help="root for all relative paths and persisted records")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario headless")
    s.add_argument("--scenario", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("bench", help="compare trackers on one frame stream")
    s.add_argument("--scenario", required=True)
    s.add_argument("--methods", required=True,
                   help=f"comma list from: {', '.join(BENCH_METHODS)}")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("replay", help="verify a session record")
    s.add_argument("--in", dest="infile", required=True)
    s.set_defaults(func=cmd_replay)

    s = sub.add_parser("serve", help="run the WebSocket session service")
    s.add_argument("--config", required=True,
                   help="scenario file or preset for new sessions")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    s.add_argument("--static", default=None,
                   help="directory of built client files to serve at /")
    s.set_defaults(func=cmd_serve)

    s = sub.add_parser("report", help="emit plot-ready series for a session")
    s.add_argument("--session", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("scenario", help="write a preset scenario file")
    s.add_argument("--preset", default=None)
    s.add_argument("--out", default=None)
    s.add_argument("--list", action="store_true")
    s.set_defaults(func=cmd_scenario)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except CorruptRecord as exc:
        print(f"error[{exc.stage}] {exc.code}: {exc}", file=sys.stderr)
        return 4
    except WeldError as exc:
        print(f"error[{exc.stage}] {exc.code}: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error[io] {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
