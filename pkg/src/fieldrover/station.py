"""Operator-side base station: sessions, command arbitration, and a live
event feed bridging UI clients to the simulated robot over the radio link.

All request/response and event bodies use "kvlines": one ``key=value`` pair
per line, UTF-8, sorted keys, no escaping (values must not contain newlines).
Polygons serialize as ``x,y; x,y; ...`` vertex lists. The service runs either
headless (tests drive simulated time through ``advance``) or in real time.
"""

from __future__ import annotations

import argparse
import asyncio
import itertools
import time
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass
from typing import Optional

from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse

from fieldrover.protocol import (
    AckPayload,
    ControlPayload,
    Frame,
    LinkConfig,
    LinkSimulator,
    PositionPayload,
    StuckPayload,
    TelemetryPayload,
)
from fieldrover.scenarios import Scenario, builtin_scenarios, load_scenario
from fieldrover.simulate import Simulation

__all__ = [
    "kv_encode",
    "kv_decode",
    "OperatorCommand",
    "Session",
    "BaseStation",
    "create_app",
]


def kv_encode(record: dict) -> str:
    lines = []
    for k in sorted(record):
        v = record[k]
        if isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{k}={v}")
    return "\n".join(lines) + "\n"


def kv_decode(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        k, sep, v = line.partition("=")
        if not sep:
            raise ValueError(f"malformed kvlines entry {line!r}")
        out[k.strip()] = v.strip()
    return out


def _fmt_poly(points) -> str:
    return "; ".join(f"{repr(float(p.x))},{repr(float(p.y))}" for p in points)


@dataclass(frozen=True)
class OperatorCommand:
    kind: str  # drive | goto | stop | resume_autonomy
    vx: float = 0.0
    vy: float = 0.0
    x: float = 0.0
    y: float = 0.0

    KINDS = ("drive", "goto", "stop", "resume_autonomy")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown command kind {self.kind!r}")


@dataclass
class Session:
    id: str
    role: str  # observer | driver
    created_at: float
    cursor: int = 0  # event index already delivered to this client


class BaseStation:
    """Deterministic, single-threaded core; transports layer on top.

    Commands travel to the robot through the downlink simulator (drive and
    goto become wire frames); stop and resume_autonomy act directly, modeling
    the session-local override lifecycle. Robot telemetry and stuck alerts
    travel back over the uplink. Map polygons bypass the narrowband link:
    in this artifact the station shares the simulator's coverage state, a
    stand-in for the robot's wideband map channel.
    """

    def __init__(
        self,
        scenario: Scenario,
        uplink: Optional[LinkConfig] = None,
        downlink: Optional[LinkConfig] = None,
        # One telemetry frame costs ~25 ms of airtime; at the default 1% duty
        # cycle the link sustains only ~0.4 frames/s, so a 3 s cadence leaves
        # headroom for alert frames instead of building a transmit backlog.
        telemetry_period: float = 3.0,
        heartbeat_period: float = 1.0,
    ):
        self.scenario = scenario
        self.sim = Simulation(scenario, terminate_on_stuck=False)
        self.uplink = LinkSimulator(uplink or LinkConfig())
        self.downlink = LinkSimulator(downlink or LinkConfig(seed=1))
        self.telemetry_period = telemetry_period
        self.heartbeat_period = heartbeat_period

        self.sessions: dict = {}
        self.driver_session: Optional[str] = None
        self.events: list = []
        self._next_telemetry = 0.0
        self._last_event_t = 0.0
        self._seq_up = itertools.cycle(range(256))
        self._seq_down = itertools.cycle(range(256))
        self._known_paths = 0
        self._known_area = 0.0
        self._last_seen_decision = "none"
        self.sim.on_decision = self._on_robot_decision

    # -- sessions -----------------------------------------------------------

    def create_session(self, role: str = "observer") -> Session:
        if role not in ("observer", "driver"):
            raise ValueError(f"unknown role {role!r}")
        s = Session(id=uuid.uuid4().hex[:12], role=role, created_at=self.sim.t)
        self.sessions[s.id] = s
        return s

    def _session(self, session_id: str) -> Session:
        s = self.sessions.get(session_id)
        if s is None:
            raise KeyError(f"unknown session {session_id!r}")
        return s

    # -- commands -----------------------------------------------------------

    def submit_command(self, session_id: str, cmd: OperatorCommand) -> tuple[bool, str]:
        """Returns (accepted, reason); reason is empty when accepted."""
        try:
            session = self._session(session_id)
        except KeyError as e:
            return False, str(e)

        if cmd.kind in ("drive", "goto", "stop"):
            if self.driver_session not in (None, session.id):
                return False, "conflict: another session holds the driver slot"
            self.driver_session = session.id
        elif cmd.kind == "resume_autonomy":
            if self.driver_session not in (None, session.id):
                return False, "conflict: another session holds the driver slot"

        now = self.sim.t
        if cmd.kind == "drive":
            try:
                frame = Frame(next(self._seq_down), ControlPayload(cmd.vx, cmd.vy))
                self.downlink.send(frame, now)
            except ValueError as e:
                return False, f"encoding failure: {e}"
        elif cmd.kind == "goto":
            try:
                frame = Frame(next(self._seq_down), PositionPayload(cmd.x, cmd.y))
                self.downlink.send(frame, now)
            except ValueError as e:
                return False, f"encoding failure: {e}"
        elif cmd.kind == "stop":
            self.sim.stop()
        elif cmd.kind == "resume_autonomy":
            # Cancel in-flight motion frames: a drive command delivered
            # after the hand-back must not silently re-enter teleop.
            self.downlink.flush_pending()
            self.sim.resume_autonomy()
            self.driver_session = None

        self._emit(
            {
                "event": "command",
                "kind": cmd.kind,
                "session": session.id,
            }
        )
        return True, ""

    # -- robot side ---------------------------------------------------------

    def _on_robot_decision(self, name: str, t: float) -> None:
        if name == "stuck":
            pos = self.sim.robot.pose.position
            frame = Frame(next(self._seq_up), StuckPayload(pos.x, pos.y))
            self.uplink.send(frame, t)

    def _robot_tick(self) -> None:
        now = self.sim.t
        for rec in self.downlink.poll(now):
            payload = rec.frame.payload
            if isinstance(payload, ControlPayload):
                self.sim.set_override(payload.vx, payload.vy)
            elif isinstance(payload, PositionPayload):
                self.sim.set_goto(payload.x, payload.y)
        if now + 1e-9 >= self._next_telemetry:
            pose = self.sim.robot.pose
            frame = Frame(
                next(self._seq_up),
                TelemetryPayload(
                    x=pose.position.x,
                    y=pose.position.y,
                    heading=pose.heading,
                    coverage=min(1.0, self.sim.coverage_fraction()),
                    decision=self.sim.last_decision
                    if self.sim.last_decision in
                    ("none", "continue_tracking", "new_path", "stuck", "complete")
                    else "tick",
                ),
            )
            self.uplink.send(frame, now)
            self._next_telemetry += self.telemetry_period

    # -- station side -------------------------------------------------------

    def _emit(self, record: dict) -> None:
        record = dict(record)
        record["t"] = self.sim.t
        record["seq"] = len(self.events)
        self.events.append(record)
        self._last_event_t = self.sim.t

    def _station_tick(self) -> None:
        now = self.sim.t
        for rec in self.uplink.poll(now):
            payload = rec.frame.payload
            if isinstance(payload, TelemetryPayload):
                self._emit(
                    {
                        "event": "pose",
                        "x": payload.x,
                        "y": payload.y,
                        "heading": payload.heading,
                        "coverage": payload.coverage,
                        "decision": payload.decision,
                    }
                )
                if payload.decision != self._last_seen_decision:
                    self._last_seen_decision = payload.decision
                    self._emit({"event": "decision", "decision": payload.decision})
            elif isinstance(payload, StuckPayload):
                self._emit(
                    {
                        "event": "alert",
                        "reason": "stuck",
                        "x": payload.x,
                        "y": payload.y,
                    }
                )
        # Map-channel increments (shared simulator state, not wire frames).
        stack = self.sim.stack
        if len(stack.entries) > self._known_paths:
            phi = stack.entries[-1].path
            self._emit(
                {
                    "event": "path",
                    "anchor_x": phi.anchor.x,
                    "anchor_y": phi.anchor.y,
                    "heading": phi.heading,
                    "a": phi.coeffs[0],
                    "b": phi.coeffs[1],
                    "c": phi.coeffs[2],
                    "d": phi.coeffs[3],
                    "direction": phi.direction.value,
                }
            )
            self._known_paths = len(stack.entries)
        area = stack.explored.area
        if area > self._known_area + 0.5:
            rec: dict = {"event": "map", "area": area}
            for i, poly in enumerate(stack.explored.polygons[-8:], start=1):
                rec[f"polygon.{i}"] = _fmt_poly(poly)
            vs = self.sim.pstate.last_vertices
            if vs is not None:
                for i, cluster in enumerate(vs.obstacles, start=1):
                    rec[f"cluster.{i}"] = _fmt_poly(cluster)
            self._emit(rec)
            self._known_area = area
        if now - self._last_event_t >= self.heartbeat_period:
            self._emit({"event": "heartbeat"})

    # -- time ---------------------------------------------------------------

    def advance(self, dt: float) -> None:
        """Advance simulated time by dt seconds (headless stepping)."""
        target = self.sim.t + dt
        while self.sim.t < target - 1e-9:
            self._robot_tick()
            if self.sim.outcome is None:
                self.sim.step()
            else:
                self.sim.t = round(self.sim.t + self.sim.dt, 9)
            self._station_tick()

    # -- views --------------------------------------------------------------

    def snapshot(self) -> dict:
        pose = self.sim.robot.pose
        snap: dict = {
            "event": "snapshot",
            "scenario": self.scenario.name,
            "t": self.sim.t,
            "x": pose.position.x,
            "y": pose.position.y,
            "heading": pose.heading,
            "decision": self.sim.last_decision,
            "coverage": min(1.0, self.sim.coverage_fraction()),
            "stuck": self.sim.stuck,
            "outcome": self.sim.outcome or "running",
            "driver_busy": self.driver_session is not None,
            "teleop_active": self.sim.teleop_active,
        }
        for i, poly in enumerate(self.sim.stack.explored.polygons[-16:], start=1):
            snap[f"polygon.{i}"] = _fmt_poly(poly)
        vs = self.sim.pstate.last_vertices
        if vs is not None:
            for i, cluster in enumerate(vs.obstacles, start=1):
                snap[f"cluster.{i}"] = _fmt_poly(cluster)
        phi = self.sim.stack.current_path
        if phi is not None:
            snap.update(
                path_anchor_x=phi.anchor.x,
                path_anchor_y=phi.anchor.y,
                path_heading=phi.heading,
                path_a=phi.coeffs[0],
                path_b=phi.coeffs[1],
                path_c=phi.coeffs[2],
                path_d=phi.coeffs[3],
            )
        return snap

    def events_since(self, cursor: int) -> tuple[int, list]:
        new = self.events[cursor:]
        return len(self.events), new


# ---------------------------------------------------------------------------
# HTTP / WebSocket transport


def create_app(station: BaseStation, realtime_speed: float = 0.0):
    """FastAPI app over a station. ``realtime_speed`` > 0 starts a background
    clock advancing simulated time at that multiple of wall time; 0 leaves
    stepping to the POST /api/advance endpoint (headless test mode)."""
    lock = asyncio.Lock()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        task = None
        if realtime_speed > 0.0:
            async def clock():
                last = time.monotonic()
                while True:
                    await asyncio.sleep(0.05)
                    now = time.monotonic()
                    dt = (now - last) * realtime_speed
                    last = now
                    async with lock:
                        if station.sim.outcome is None or station.sim.teleop_active:
                            station.advance(dt)
            task = asyncio.create_task(clock())
        try:
            yield
        finally:
            if task is not None:
                task.cancel()

    app = FastAPI(title="fieldrover base station", lifespan=lifespan)
    app.state.station = station

    @app.get("/api/scenarios", response_class=PlainTextResponse)
    async def scenarios():
        return kv_encode({"scenarios": ",".join(sorted(builtin_scenarios()))})

    @app.get("/api/snapshot", response_class=PlainTextResponse)
    async def snapshot():
        async with lock:
            return kv_encode(station.snapshot())

    @app.post("/api/session", response_class=PlainTextResponse)
    async def session(request: Request):
        body = kv_decode((await request.body()).decode())
        role = body.get("role", "observer")
        try:
            async with lock:
                s = station.create_session(role)
        except ValueError as e:
            return PlainTextResponse(kv_encode({"error": str(e)}), status_code=400)
        return kv_encode({"session": s.id, "role": s.role})

    @app.post("/api/command", response_class=PlainTextResponse)
    async def command(request: Request):
        body = kv_decode((await request.body()).decode())
        try:
            cmd = OperatorCommand(
                kind=body.get("kind", ""),
                vx=float(body.get("vx", 0.0)),
                vy=float(body.get("vy", 0.0)),
                x=float(body.get("x", 0.0)),
                y=float(body.get("y", 0.0)),
            )
        except ValueError as e:
            return PlainTextResponse(
                kv_encode({"status": "rejected", "reason": str(e)}), status_code=400
            )
        async with lock:
            ok, reason = station.submit_command(body.get("session", ""), cmd)
        record = {"status": "accepted" if ok else "rejected"}
        if reason:
            record["reason"] = reason
        return PlainTextResponse(kv_encode(record), status_code=200 if ok else 409)

    @app.post("/api/advance", response_class=PlainTextResponse)
    async def advance(request: Request):
        body = kv_decode((await request.body()).decode())
        dt = float(body.get("dt", 0.0))
        if not (0.0 < dt <= 600.0):
            return PlainTextResponse(
                kv_encode({"error": "dt must be in (0, 600]"}), status_code=400
            )
        async with lock:
            station.advance(dt)
        return kv_encode({"t": station.sim.t})

    @app.websocket("/api/events")
    async def events(ws: WebSocket):
        await ws.accept()
        # Reconnecting clients get a full snapshot before any increments.
        async with lock:
            await ws.send_text(kv_encode(station.snapshot()))
            cursor = len(station.events)
        try:
            while True:
                async with lock:
                    cursor, new = station.events_since(cursor)
                for record in new:
                    await ws.send_text(kv_encode(record))
                await asyncio.sleep(0.05)
        except WebSocketDisconnect:
            return

    return app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Run the base-station service")
    parser.add_argument("--scenario", default="tunnel-open")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8750)
    parser.add_argument(
        "--speed", type=float, default=1.0,
        help="simulated seconds per wall second (0 = headless stepping only)",
    )
    parser.add_argument("--loss", type=float, default=0.0)
    args = parser.parse_args(argv)

    import uvicorn

    scenario = load_scenario(args.scenario)
    link = LinkConfig(loss_probability=args.loss)
    station = BaseStation(scenario, uplink=link, downlink=link)
    app = create_app(station, realtime_speed=args.speed)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
