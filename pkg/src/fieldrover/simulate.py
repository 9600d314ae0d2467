"""Fixed-step scenario execution with decoupled sense/plan/control rates,
and the line-oriented trace format that makes every run replayable."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from fieldrover.exploration import (
    CoverageStack,
    Decision,
    PlannerConfig,
    PlannerState,
    PointCloud,
    plan_step,
)
from fieldrover.geometry import (
    OrbitDirection,
    PathFunction,
    Point2,
    RobotPose,
    Vec2,
    track_step,
)
from fieldrover.scenarios import Scenario, scenario_hash, scenario_to_ini
from fieldrover.world import (
    Command,
    RobotState,
    collision_check,
    make_pose_provider,
    sense,
    steer_from_tracker,
    step_robot,
)

__all__ = [
    "Trace",
    "TraceRecord",
    "PathRecord",
    "PointsRecord",
    "RunReport",
    "Simulation",
    "run_scenario",
]

_TRACE_MAGIC = "#fieldrover-trace v1"


def _f(x: float) -> str:
    """Shortest round-trip decimal form; keeps traces byte-stable."""
    return repr(float(x))


@dataclass(frozen=True)
class TraceRecord:
    tick: int
    t: float
    x: float
    y: float
    heading: float
    v: float
    omega: float
    decision: str
    path_id: int
    cloud_points: int
    collision: bool

    def to_line(self) -> str:
        return " ".join(
            [
                "T",
                str(self.tick),
                _f(self.t),
                _f(self.x),
                _f(self.y),
                _f(self.heading),
                _f(self.v),
                _f(self.omega),
                self.decision,
                str(self.path_id),
                str(self.cloud_points),
                "1" if self.collision else "0",
            ]
        )

    @classmethod
    def from_line(cls, line: str) -> "TraceRecord":
        p = line.split()
        return cls(
            tick=int(p[1]),
            t=float(p[2]),
            x=float(p[3]),
            y=float(p[4]),
            heading=float(p[5]),
            v=float(p[6]),
            omega=float(p[7]),
            decision=p[8],
            path_id=int(p[9]),
            cloud_points=int(p[10]),
            collision=p[11] == "1",
        )


@dataclass(frozen=True)
class PathRecord:
    path_id: int
    t: float
    anchor_x: float
    anchor_y: float
    heading: float
    a: float
    b: float
    c: float
    d: float
    direction: str
    attraction_rate: float

    def to_line(self) -> str:
        return " ".join(
            [
                "F",
                str(self.path_id),
                _f(self.t),
                _f(self.anchor_x),
                _f(self.anchor_y),
                _f(self.heading),
                _f(self.a),
                _f(self.b),
                _f(self.c),
                _f(self.d),
                self.direction,
                _f(self.attraction_rate),
            ]
        )

    @classmethod
    def from_line(cls, line: str) -> "PathRecord":
        p = line.split()
        return cls(
            path_id=int(p[1]),
            t=float(p[2]),
            anchor_x=float(p[3]),
            anchor_y=float(p[4]),
            heading=float(p[5]),
            a=float(p[6]),
            b=float(p[7]),
            c=float(p[8]),
            d=float(p[9]),
            direction=p[10],
            attraction_rate=float(p[11]),
        )

    def to_path_function(self) -> PathFunction:
        return PathFunction(
            anchor=Point2(self.anchor_x, self.anchor_y),
            heading=self.heading,
            coeffs=(self.a, self.b, self.c, self.d),
            direction=(
                OrbitDirection.COUNTERCLOCKWISE
                if self.direction == "ccw"
                else OrbitDirection.CLOCKWISE
            ),
            attraction_rate=self.attraction_rate,
        )


@dataclass(frozen=True)
class PointsRecord:
    """World-frame hit points of one sweep (for point-map exports)."""

    t: float
    points: tuple[tuple[float, float], ...]

    def to_line(self) -> str:
        coords = " ".join(f"{_f(x)} {_f(y)}" for x, y in self.points)
        return f"P {_f(self.t)} {len(self.points)}" + (" " + coords if coords else "")

    @classmethod
    def from_line(cls, line: str) -> "PointsRecord":
        p = line.split()
        n = int(p[2])
        coords = tuple(
            (float(p[3 + 2 * i]), float(p[4 + 2 * i])) for i in range(n)
        )
        return cls(t=float(p[1]), points=coords)


@dataclass
class Trace:
    metadata: dict
    scenario_ini: str
    lines: list = field(default_factory=list)  # event-ordered record lines

    def records(self):
        for line in self.lines:
            if line.startswith("T "):
                yield TraceRecord.from_line(line)

    def path_records(self):
        for line in self.lines:
            if line.startswith("F "):
                yield PathRecord.from_line(line)

    def point_records(self):
        for line in self.lines:
            if line.startswith("P "):
                yield PointsRecord.from_line(line)

    def to_text(self) -> str:
        out = [_TRACE_MAGIC]
        for k in sorted(self.metadata):
            out.append(f"#meta {k}={self.metadata[k]}")
        for line in self.scenario_ini.splitlines():
            out.append(f"#cfg {line}")
        out.extend(self.lines)
        return "\n".join(out) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Trace":
        lines = text.splitlines()
        if not lines or lines[0] != _TRACE_MAGIC:
            raise ValueError("not a fieldrover trace")
        metadata: dict = {}
        cfg_lines: list = []
        body: list = []
        for line in lines[1:]:
            if line.startswith("#meta "):
                k, _, v = line[len("#meta "):].partition("=")
                metadata[k] = v
            elif line.startswith("#cfg"):
                cfg_lines.append(line[5:] if len(line) > 4 else "")
            elif line:
                body.append(line)
        return cls(metadata=metadata, scenario_ini="\n".join(cfg_lines) + "\n", lines=body)


@dataclass
class RunReport:
    outcome: str
    coverage_fraction: float
    distance: float
    sim_time: float
    wall_time: float
    decision_counts: dict
    config_hash: str
    stuck_position: Optional[tuple[float, float]] = None

    def to_text(self) -> str:
        out = [
            f"outcome={self.outcome}",
            f"coverage_fraction={_f(self.coverage_fraction)}",
            f"distance={_f(self.distance)}",
            f"sim_time={_f(self.sim_time)}",
            f"config_hash={self.config_hash}",
        ]
        for name in sorted(self.decision_counts):
            out.append(f"decisions.{name}={self.decision_counts[name]}")
        if self.stuck_position is not None:
            out.append(f"stuck_x={_f(self.stuck_position[0])}")
            out.append(f"stuck_y={_f(self.stuck_position[1])}")
        out.append("[volatile]")
        out.append(f"wall_time={_f(self.wall_time)}")
        return "\n".join(out) + "\n"


class Simulation:
    """One deterministic scenario run, advanced a control tick at a time.

    The teleop layer can inject a tracker override through
    :meth:`set_override`; while active it preempts the planner's tracker but
    planning (and coverage accounting) keeps running.
    """

    def __init__(
        self,
        scenario: Scenario,
        terminate_on_stuck: bool = True,
        terminate_on_collision: bool = True,
        collect_points: bool = True,
    ):
        self.scenario = scenario
        self.terminate_on_stuck = terminate_on_stuck
        self.terminate_on_collision = terminate_on_collision
        self.collect_points = collect_points

        self.world = scenario.world
        self.free_space = self.world.free_region()
        self.planner_cfg = replace(
            scenario.planner,
            free_space=self.free_space,
            half_angle=scenario.sensor.half_angle,
            max_range=scenario.sensor.max_range,
        )
        self.robot = RobotState(pose=scenario.start)
        self.pose_provider = make_pose_provider(
            scenario.pose_provider,
            scenario.pose_sigma_xy,
            scenario.pose_sigma_heading,
            scenario.pose_seed,
        )
        self.rng = np.random.default_rng(scenario.seed)
        self.stack = CoverageStack.new()
        self.pstate = PlannerState()

        self.dt = 1.0 / scenario.rates.control_hz
        self.sense_period = 1.0 / scenario.rates.sense_hz
        self.plan_period = 1.0 / scenario.rates.plan_hz
        self.next_sense = 0.0
        self.next_plan = 0.0

        self.t = 0.0
        self.tick_index = 0
        self.latest_cloud: Optional[PointCloud] = None
        self.latest_cloud_size = 0
        self.last_decision = "none"
        self.stuck = False
        self.collided = False
        self.outcome: Optional[str] = None
        self.distance = 0.0
        self.decision_counts: dict = {}
        self.stuck_position: Optional[tuple[float, float]] = None

        self.override: Optional[Vec2] = None
        self.goto_target: Optional[Point2] = None
        self.halted = False

        self._paths: dict = {}
        self._current_path_id = -1
        ini = scenario_to_ini(scenario)
        self.trace = Trace(
            metadata={
                "name": scenario.name,
                "seed": str(scenario.seed),
                "config_hash": scenario_hash(scenario),
            },
            scenario_ini=ini,
        )
        self.on_decision: Optional[Callable[[str, float], None]] = None

    # -- teleop hooks -------------------------------------------------------

    def set_override(self, vx: float, vy: float) -> None:
        self.override = Vec2(vx, vy)
        self.goto_target = None
        self.halted = False

    def set_goto(self, x: float, y: float) -> None:
        self.goto_target = Point2(x, y)
        self.override = None
        self.halted = False

    def stop(self) -> None:
        self.override = None
        self.goto_target = None
        self.halted = True

    def resume_autonomy(self) -> None:
        self.override = None
        self.goto_target = None
        self.halted = False

    @property
    def teleop_active(self) -> bool:
        return self.override is not None or self.goto_target is not None or self.halted

    # -- bookkeeping --------------------------------------------------------

    def _register_path(self, phi: PathFunction) -> int:
        pid = len(self._paths)
        self._paths[pid] = phi
        rec = PathRecord(
            path_id=pid,
            t=self.t,
            anchor_x=phi.anchor.x,
            anchor_y=phi.anchor.y,
            heading=phi.heading,
            a=phi.coeffs[0],
            b=phi.coeffs[1],
            c=phi.coeffs[2],
            d=phi.coeffs[3],
            direction=(
                "ccw" if phi.direction is OrbitDirection.COUNTERCLOCKWISE else "cw"
            ),
            attraction_rate=phi.attraction_rate,
        )
        self.trace.lines.append(rec.to_line())
        return pid

    def coverage_fraction(self) -> float:
        total = self.free_space.area
        if total <= 0.0:
            return 1.0
        covered = self.stack.explored.geom.intersection(self.free_space.geom).area
        return covered / total

    def _note_decision(self, name: str) -> None:
        self.decision_counts[name] = self.decision_counts.get(name, 0) + 1
        if name != self.last_decision:
            self.last_decision = name
            if self.on_decision is not None:
                self.on_decision(name, self.t)

    # -- main loop ----------------------------------------------------------

    def step(self) -> None:
        """Advance one control tick."""
        if self.outcome is not None:
            return
        sc = self.scenario

        if self.t + 1e-9 >= self.next_sense:
            self.latest_cloud = sense(
                self.world, self.robot.pose, sc.sensor, self.rng, stamp=self.t
            )
            self.latest_cloud_size = sum(1 for r in self.latest_cloud.rays if r.hit)
            if self.collect_points:
                h = self.robot.pose.heading
                px, py = self.robot.pose.position.x, self.robot.pose.position.y
                pts = tuple(
                    (
                        px + r.range * math.cos(h + r.bearing),
                        py + r.range * math.sin(h + r.bearing),
                    )
                    for r in self.latest_cloud.rays
                    if r.hit
                )
                self.trace.lines.append(PointsRecord(self.t, pts).to_line())
            self.next_sense += self.sense_period

        est_pose = self.pose_provider(self.robot.pose)

        decision_name = "tick"
        if self.latest_cloud is not None and self.t + 1e-9 >= self.next_plan:
            planner_view = RobotState(pose=est_pose, tracker=self.robot.tracker)
            output, self.stack, self.pstate = plan_step(
                planner_view, self.latest_cloud, self.stack, self.pstate, self.planner_cfg
            )
            decision_name = output.decision.value
            self._note_decision(decision_name)
            if output.decision is Decision.NEW_PATH:
                self._current_path_id = self._register_path(output.new_path)
                self.stuck = False
            elif output.decision is Decision.STUCK:
                if not self.stuck:
                    self.stuck_position = (
                        self.robot.pose.position.x,
                        self.robot.pose.position.y,
                    )
                self.stuck = True
            elif output.decision is Decision.COMPLETE:
                self.outcome = "complete"
            self.robot = replace(self.robot, tracker=output.tracker)
            self.next_plan += self.plan_period
            if self.outcome == "complete":
                self._emit_record(decision_name, Command(0.0, 0.0))
                return
            if self.stuck and self.terminate_on_stuck and not self.teleop_active:
                self.outcome = "stuck"
                self._emit_record(decision_name, Command(0.0, 0.0))
                return
        else:
            # Tracking integration runs at the control rate: between planning
            # steps the tracker keeps accumulating the guidance field of the
            # current trajectory at the estimated position.
            path = self.stack.current_path
            if path is not None and not self.stuck:
                t = track_step(
                    self.robot.tracker, path, est_pose.position, self.planner_cfg.theta
                )
                cap = self.planner_cfg.tracker_cap
                n = t.norm()
                if n > cap:
                    t = t.scaled(cap / n)
                self.robot = replace(self.robot, tracker=t)

        cmd = self._control_command()
        before = self.robot.pose.position
        self.robot = step_robot(self.robot, cmd, self.dt, sc.robot)
        after = self.robot.pose.position
        self.distance += math.hypot(after.x - before.x, after.y - before.y)

        if collision_check(self.world, self.robot.pose, sc.robot.radius):
            self.collided = True
            if self.terminate_on_collision:
                self.outcome = "collision"

        self._emit_record(decision_name, cmd)
        if self.outcome is None and self.t >= sc.duration:
            self.outcome = "timeout"

    def _control_command(self) -> Command:
        sc = self.scenario
        if self.halted:
            return Command(0.0, 0.0)
        if self.override is not None:
            view = replace(self.robot, tracker=self.override)
            return steer_from_tracker(view, sc.robot)
        if self.goto_target is not None:
            dx = self.goto_target.x - self.robot.pose.position.x
            dy = self.goto_target.y - self.robot.pose.position.y
            if math.hypot(dx, dy) < 0.3:
                self.goto_target = None
                return Command(0.0, 0.0)
            view = replace(self.robot, tracker=Vec2(dx, dy))
            return steer_from_tracker(view, sc.robot)
        if self.stuck:
            return Command(0.0, 0.0)
        return steer_from_tracker(self.robot, sc.robot)

    def _emit_record(self, decision_name: str, cmd: Command) -> None:
        rec = TraceRecord(
            tick=self.tick_index,
            t=self.t,
            x=self.robot.pose.position.x,
            y=self.robot.pose.position.y,
            heading=self.robot.pose.heading,
            v=cmd.v,
            omega=cmd.omega,
            decision=decision_name,
            path_id=self._current_path_id,
            cloud_points=self.latest_cloud_size,
            collision=self.collided,
        )
        self.trace.lines.append(rec.to_line())
        self.t = round((self.tick_index + 1) * self.dt, 9)
        self.tick_index += 1

    def run(self) -> RunReport:
        start = time.perf_counter()
        while self.outcome is None:
            self.step()
        wall = time.perf_counter() - start
        return RunReport(
            outcome=self.outcome,
            coverage_fraction=self.coverage_fraction(),
            distance=self.distance,
            sim_time=self.t,
            wall_time=wall,
            decision_counts=dict(self.decision_counts),
            config_hash=self.trace.metadata["config_hash"],
            stuck_position=self.stuck_position,
        )


def run_scenario(
    scenario: Scenario,
    terminate_on_stuck: bool = True,
    collect_points: bool = True,
) -> tuple[Trace, RunReport]:
    sim = Simulation(
        scenario,
        terminate_on_stuck=terminate_on_stuck,
        collect_points=collect_points,
    )
    report = sim.run()
    return sim.trace, report
