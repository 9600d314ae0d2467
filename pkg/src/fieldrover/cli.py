"""Command-line harness: run scenarios, replay traces, export artifacts.

Exit codes are a stable contract: 0 success, 1 unexpected outcome or internal
error, 2 configuration error, 3 collision, 4 replay mismatch.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from fieldrover.geometry import eval_path_batch, guidance_field_batch
from fieldrover.scenarios import (
    ScenarioError,
    builtin_scenarios,
    load_scenario,
    scenario_from_ini,
)
from fieldrover.simulate import Trace, run_scenario

__all__ = ["main"]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_COLLISION = 3
EXIT_MISMATCH = 4


def _out_root(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get("FIELDROVER_OUT", "out"))


def _apply_overrides(scenario, args):
    planner = scenario.planner
    rates = scenario.rates
    if args.plan_hz is not None:
        rates = replace(rates, plan_hz=args.plan_hz)
    if args.sense_hz is not None:
        rates = replace(rates, sense_hz=args.sense_hz)
    if args.control_hz is not None:
        rates = replace(rates, control_hz=args.control_hz)
    if args.theta is not None:
        planner = replace(planner, theta=args.theta)
    if args.score_eps is not None:
        planner = replace(planner, score_eps=args.score_eps)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    if args.duration is not None:
        scenario = replace(scenario, duration=args.duration)
    return replace(scenario, planner=planner, rates=rates)


def cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
        scenario = _apply_overrides(scenario, args)
    except (ScenarioError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    trace, report = run_scenario(scenario)

    out = _out_root(args) / scenario.name
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.txt").write_text(trace.to_text())
    (out / "report.txt").write_text(report.to_text())
    _export_point_map(trace, out / "points.xyz", filter_n=1)

    print(
        f"{scenario.name}: outcome={report.outcome} "
        f"coverage={report.coverage_fraction:.3f} distance={report.distance:.1f}m "
        f"sim_time={report.sim_time:.1f}s"
    )
    if report.outcome == "collision":
        return EXIT_COLLISION
    if report.outcome == scenario.expected_outcome:
        return EXIT_OK
    print(
        f"expected outcome {scenario.expected_outcome!r}, got {report.outcome!r}",
        file=sys.stderr,
    )
    return EXIT_ERROR


def _load_trace(path: str) -> Trace:
    return Trace.from_text(Path(path).read_text())


def cmd_replay(args) -> int:
    try:
        original = _load_trace(args.trace)
        scenario = scenario_from_ini(original.scenario_ini)
    except (OSError, ValueError, ScenarioError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    fresh, _ = run_scenario(scenario)
    if fresh.lines == original.lines:
        print(f"replay match: {len(original.lines)} records identical")
        return EXIT_OK
    limit = min(len(fresh.lines), len(original.lines))
    for i in range(limit):
        if fresh.lines[i] != original.lines[i]:
            print(f"replay mismatch at record {i}:", file=sys.stderr)
            print(f"  trace : {original.lines[i]}", file=sys.stderr)
            print(f"  replay: {fresh.lines[i]}", file=sys.stderr)
            return EXIT_MISMATCH
    print(
        f"replay mismatch: record counts differ "
        f"({len(original.lines)} vs {len(fresh.lines)})",
        file=sys.stderr,
    )
    return EXIT_MISMATCH


def _export_trajectory(trace: Trace, path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["tick", "t", "x", "y", "heading", "v", "omega", "decision", "path_id"]
        )
        for r in trace.records():
            w.writerow(
                [r.tick, r.t, r.x, r.y, r.heading, r.v, r.omega, r.decision, r.path_id]
            )


def _export_point_map(trace: Trace, path: Path, filter_n: int, z: float = 0.0) -> int:
    """Accumulated sensed points, every filter_n-th kept, as x y z lines."""
    kept = 0
    index = 0
    with path.open("w") as fh:
        for rec in trace.point_records():
            for x, y in rec.points:
                if index % filter_n == 0:
                    fh.write(f"{repr(x)} {repr(y)} {repr(z)}\n")
                    kept += 1
                index += 1
    return kept


def _export_field_svg(trace: Trace, path: Path, tick: int) -> None:
    """Guidance-field arrows, the active contour, and the trajectory so far."""
    records = list(trace.records())
    if not records:
        raise ValueError("trace has no state records")
    if not (0 <= tick < len(records)):
        raise ValueError(f"tick {tick} out of range 0..{len(records) - 1}")
    rec = records[tick]
    paths = {p.path_id: p for p in trace.path_records()}
    phi = paths[rec.path_id].to_path_function() if rec.path_id in paths else None

    half = 6.0
    x0, x1 = rec.x - half, rec.x + half
    y0, y1 = rec.y - half, rec.y + half
    scale = 60.0  # px per meter
    width = int((x1 - x0) * scale)
    height = int((y1 - y0) * scale)

    def sx(x: float) -> float:
        return (x - x0) * scale

    def sy(y: float) -> float:
        return (y1 - y) * scale  # svg y grows downward

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#111"/>',
    ]

    if phi is not None:
        n = 21
        gx, gy = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n))
        ux, uy = guidance_field_batch(phi, gx.ravel(), gy.ravel())
        mag = np.hypot(ux, uy)
        mag[mag < 1e-9] = 1.0
        ux, uy = ux / mag * 0.22, uy / mag * 0.22
        for px, py, dx, dy in zip(gx.ravel(), gy.ravel(), ux, uy):
            parts.append(
                f'<line class="arrow" x1="{sx(px):.1f}" y1="{sy(py):.1f}" '
                f'x2="{sx(px + dx):.1f}" y2="{sy(py + dy):.1f}" '
                f'stroke="#888" stroke-width="1"/>'
            )
        # Contour: march the local x-axis and plot the curve where it stays
        # inside the panel.
        ch, shd = math.cos(phi.heading), math.sin(phi.heading)
        a, b, c, d = (
            paths[rec.path_id].a,
            paths[rec.path_id].b,
            paths[rec.path_id].c,
            paths[rec.path_id].d,
        )
        pts = []
        for xl in np.linspace(-2.0, 8.0, 200):
            yl = ((a * xl + b) * xl + c) * xl + d
            wx = phi.anchor.x + ch * xl - shd * yl
            wy = phi.anchor.y + shd * xl + ch * yl
            if x0 <= wx <= x1 and y0 <= wy <= y1:
                pts.append(f"{sx(wx):.1f},{sy(wy):.1f}")
        if len(pts) >= 2:
            parts.append(
                f'<polyline class="contour" points="{" ".join(pts)}" '
                f'fill="none" stroke="#00e5ff" stroke-width="2"/>'
            )

    traj = [
        f"{sx(r.x):.1f},{sy(r.y):.1f}"
        for r in records[: tick + 1]
        if x0 <= r.x <= x1 and y0 <= r.y <= y1
    ]
    if len(traj) >= 2:
        parts.append(
            f'<polyline class="trajectory" points="{" ".join(traj)}" '
            f'fill="none" stroke="#ffd54f" stroke-width="1.5"/>'
        )
    parts.append(
        f'<circle class="robot" cx="{sx(rec.x):.1f}" cy="{sy(rec.y):.1f}" '
        f'r="6" fill="#ff5252"/>'
    )
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")


def cmd_export(args) -> int:
    try:
        trace = _load_trace(args.trace)
    except (OSError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = _out_root(args)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.what == "trajectory-table":
            dest = out / "trajectory.csv"
            _export_trajectory(trace, dest)
        elif args.what == "point-map":
            if args.filter_n < 1:
                raise ValueError("filter-n must be >= 1")
            dest = out / "points.xyz"
            kept = _export_point_map(trace, dest, filter_n=args.filter_n)
            print(f"kept {kept} points")
        else:
            dest = out / f"field-{args.tick}.svg"
            _export_field_svg(trace, dest, tick=args.tick)
    except ValueError as e:
        print(f"export error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {dest}")
    return EXIT_OK


def cmd_list(args) -> int:
    for name in sorted(builtin_scenarios()):
        sc = builtin_scenarios()[name]()
        print(f"{name}: expected={sc.expected_outcome} duration={sc.duration:.0f}s")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fieldrover", description="Deterministic exploration simulator"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and write its artifacts")
    p_run.add_argument("scenario", help="builtin name or scenario file path")
    p_run.add_argument("--out", help="output root (default $FIELDROVER_OUT or ./out)")
    p_run.add_argument("--plan-hz", type=float, dest="plan_hz")
    p_run.add_argument("--sense-hz", type=float, dest="sense_hz")
    p_run.add_argument("--control-hz", type=float, dest="control_hz")
    p_run.add_argument("--theta", type=float, help="tracker step size")
    p_run.add_argument("--score-eps", type=float, dest="score_eps")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--duration", type=float)
    p_run.set_defaults(func=cmd_run)

    p_replay = sub.add_parser("replay", help="re-run a trace's embedded config")
    p_replay.add_argument("trace")
    p_replay.set_defaults(func=cmd_replay)

    p_export = sub.add_parser("export", help="derive artifacts from a trace")
    p_export.add_argument("trace")
    p_export.add_argument(
        "what", choices=["trajectory-table", "point-map", "field-svg"]
    )
    p_export.add_argument("--filter-n", type=int, default=1, dest="filter_n")
    p_export.add_argument("--tick", type=int, default=0)
    p_export.add_argument("--out")
    p_export.set_defaults(func=cmd_export)

    p_list = sub.add_parser("list-scenarios", help="show builtin scenarios")
    p_list.set_defaults(func=cmd_list)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
