"""Scenario library and the flat key=value scenario file format.

Three shipped worlds: a closed four-corridor circuit with a door obstacle, an
open-ended corridor-plus-tunnel with a small wheel obstacle and a blocked
entrance, and an obstacle-free field for the straight-line property. A
scenario file is an INI document with sections for world geometry (vertex
lists), sensor, planner, robot, rates, and run control; see
docs/scenario-format.md.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass, field, fields, replace

from fieldrover.exploration import PlannerConfig
from fieldrover.geometry import Point2, RobotPose
from fieldrover.world import RobotConfig, SensorConfig, World

__all__ = [
    "RateConfig",
    "Scenario",
    "ScenarioError",
    "builtin_scenarios",
    "load_scenario",
    "scenario_from_ini",
    "scenario_to_ini",
    "scenario_hash",
]


class ScenarioError(Exception):
    """Malformed scenario file or unknown scenario name."""


@dataclass(frozen=True)
class RateConfig:
    control_hz: float = 20.0
    sense_hz: float = 4.0
    plan_hz: float = 2.0

    def __post_init__(self) -> None:
        if min(self.control_hz, self.sense_hz, self.plan_hz) <= 0.0:
            raise ValueError("all rates must be > 0")
        if self.control_hz < self.plan_hz:
            raise ValueError("control_hz must be >= plan_hz")


@dataclass(frozen=True)
class Scenario:
    name: str
    world: World
    start: RobotPose
    sensor: SensorConfig = SensorConfig()
    planner: PlannerConfig = PlannerConfig()
    robot: RobotConfig = RobotConfig()
    rates: RateConfig = RateConfig()
    duration: float = 300.0
    seed: int = 1
    expected_outcome: str = "complete"
    pose_provider: str = "ground_truth"
    pose_sigma_xy: float = 0.0
    pose_sigma_heading: float = 0.0
    pose_seed: int = 0


def _rect(x0: float, y0: float, x1: float, y1: float) -> tuple[Point2, ...]:
    return (Point2(x0, y0), Point2(x1, y0), Point2(x1, y1), Point2(x0, y1))


def _octagon(cx: float, cy: float, r: float) -> tuple[Point2, ...]:
    pts = []
    for i in range(8):
        a = math.pi / 8 + i * math.pi / 4
        pts.append(Point2(cx + r * math.cos(a), cy + r * math.sin(a)))
    return tuple(pts)


def open_field() -> Scenario:
    """Obstacle-free survey strip; the selected trajectory must stay a line."""
    world = World(
        name="open-field",
        boundary=_rect(0.0, 0.0, 60.0, 6.0),
        obstacles=(),
        boundary_sensed=False,
    )
    return Scenario(
        name="open-field",
        world=world,
        start=RobotPose(Point2(0.5, 3.0), 0.0),
        duration=200.0,
        expected_outcome="complete",
    )


def hallway_circuit() -> Scenario:
    """Closed ring of four corridors (~84 m centerline) with a door obstacle.

    The outer corners are chamfered: each 90-degree turn becomes two
    45-degree ones, the way building corridors meet in lobbies.
    """
    world = World(
        name="hallway-circuit",
        boundary=(
            Point2(3.0, 0.0),
            Point2(23.0, 0.0),
            Point2(26.0, 3.0),
            Point2(26.0, 23.0),
            Point2(23.0, 26.0),
            Point2(3.0, 26.0),
            Point2(0.0, 23.0),
            Point2(0.0, 3.0),
        ),
        obstacles=(
            _rect(3.5, 3.5, 22.5, 22.5),  # inner block forming the ring
            _rect(12.8, 22.5, 13.2, 23.7),  # door leaf jutting into the top corridor
        ),
    )
    return Scenario(
        name="hallway-circuit",
        world=world,
        start=RobotPose(Point2(4.0, 1.75), 0.0),
        duration=600.0,
        expected_outcome="complete",
    )


def tunnel_open() -> Scenario:
    """Open 100 m corridor: small wheel obstacle, then a blocked entrance.

    The wheel (0.42 m wide) sits left of the centerline around 17 m in; the
    entrance wall at 50 m leaves a gap too narrow for the planner's inflated
    corridors but wide enough to drive through under teleoperation.
    """
    world = World(
        name="tunnel-open",
        boundary=_rect(0.0, 0.0, 100.0, 5.0),
        obstacles=(
            _octagon(17.0, 3.35, 0.21),  # the wheel
            _rect(49.8, 0.0, 50.2, 0.7),  # entrance wall, lower leaf
            _rect(49.8, 2.0, 50.2, 5.0),  # entrance wall, upper leaf
        ),
    )
    return Scenario(
        name="tunnel-open",
        world=world,
        start=RobotPose(Point2(1.5, 2.5), 0.0),
        duration=300.0,
        expected_outcome="stuck",
    )


def builtin_scenarios() -> dict:
    return {
        "open-field": open_field,
        "hallway-circuit": hallway_circuit,
        "tunnel-open": tunnel_open,
    }


# ---------------------------------------------------------------------------
# INI serialization


def _fmt_points(points) -> str:
    return "; ".join(f"{repr(p.x)},{repr(p.y)}" for p in points)


def _parse_points(text: str, where: str) -> tuple[Point2, ...]:
    pts = []
    for token in text.split(";"):
        token = token.strip()
        if not token:
            continue
        parts = token.split(",")
        if len(parts) != 2:
            raise ScenarioError(f"bad vertex {token!r} in {where}")
        try:
            pts.append(Point2(float(parts[0]), float(parts[1])))
        except ValueError as e:
            raise ScenarioError(f"bad vertex {token!r} in {where}: {e}") from e
    if len(pts) < 3:
        raise ScenarioError(f"{where} needs at least 3 vertices")
    return tuple(pts)


_PLANNER_FIELDS = [
    f.name for f in fields(PlannerConfig) if f.name != "free_space"
]


def scenario_to_ini(sc: Scenario) -> str:
    cp = configparser.ConfigParser()
    cp["scenario"] = {
        "name": sc.name,
        "duration": repr(sc.duration),
        "seed": str(sc.seed),
        "expected_outcome": sc.expected_outcome,
        "pose_provider": sc.pose_provider,
        "pose_sigma_xy": repr(sc.pose_sigma_xy),
        "pose_sigma_heading": repr(sc.pose_sigma_heading),
        "pose_seed": str(sc.pose_seed),
    }
    wsec = {
        "boundary_sensed": str(sc.world.boundary_sensed).lower(),
        "boundary": _fmt_points(sc.world.boundary),
    }
    for i, obs in enumerate(sc.world.obstacles, start=1):
        wsec[f"obstacle.{i}"] = _fmt_points(obs)
    cp["world"] = wsec
    cp["sensor"] = {
        "half_angle": repr(sc.sensor.half_angle),
        "max_range": repr(sc.sensor.max_range),
        "rays": str(sc.sensor.rays),
        "range_noise_sigma": repr(sc.sensor.range_noise_sigma),
        "seed": str(sc.sensor.seed),
    }
    cp["planner"] = {
        name: repr(getattr(sc.planner, name)) for name in _PLANNER_FIELDS
    }
    cp["robot"] = {
        "v_max": repr(sc.robot.v_max),
        "omega_max": repr(sc.robot.omega_max),
        "k_heading": repr(sc.robot.k_heading),
        "radius": repr(sc.robot.radius),
        "start_x": repr(sc.start.position.x),
        "start_y": repr(sc.start.position.y),
        "start_heading": repr(sc.start.heading),
    }
    cp["rates"] = {
        "control_hz": repr(sc.rates.control_hz),
        "sense_hz": repr(sc.rates.sense_hz),
        "plan_hz": repr(sc.rates.plan_hz),
    }
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def scenario_from_ini(text: str) -> Scenario:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ScenarioError(f"cannot parse scenario file: {e}") from e

    def need(section: str) -> configparser.SectionProxy:
        if section not in cp:
            raise ScenarioError(f"missing [{section}] section")
        return cp[section]

    try:
        ssec = need("scenario")
        wsec = need("world")
        boundary = _parse_points(wsec.get("boundary", ""), "world.boundary")
        obstacles = []
        i = 1
        while f"obstacle.{i}" in wsec:
            obstacles.append(_parse_points(wsec[f"obstacle.{i}"], f"world.obstacle.{i}"))
            i += 1
        world = World(
            name=ssec.get("name", "scenario"),
            boundary=boundary,
            obstacles=tuple(obstacles),
            boundary_sensed=wsec.getboolean("boundary_sensed", fallback=True),
        )
        sensec = need("sensor")
        sensor = SensorConfig(
            half_angle=sensec.getfloat("half_angle"),
            max_range=sensec.getfloat("max_range"),
            rays=sensec.getint("rays"),
            range_noise_sigma=sensec.getfloat("range_noise_sigma", fallback=0.0),
            seed=sensec.getint("seed", fallback=0),
        )
        psec = need("planner")
        planner_kwargs = {}
        for name in _PLANNER_FIELDS:
            if name in psec:
                if name in ("fan_size", "arc_points", "curve_samples"):
                    planner_kwargs[name] = psec.getint(name)
                else:
                    planner_kwargs[name] = psec.getfloat(name)
        planner = PlannerConfig(**planner_kwargs)
        rsec = need("robot")
        robot = RobotConfig(
            v_max=rsec.getfloat("v_max"),
            omega_max=rsec.getfloat("omega_max"),
            k_heading=rsec.getfloat("k_heading", fallback=2.0),
            radius=rsec.getfloat("radius"),
        )
        start = RobotPose(
            Point2(rsec.getfloat("start_x"), rsec.getfloat("start_y")),
            rsec.getfloat("start_heading"),
        )
        tsec = need("rates")
        rates = RateConfig(
            control_hz=tsec.getfloat("control_hz"),
            sense_hz=tsec.getfloat("sense_hz"),
            plan_hz=tsec.getfloat("plan_hz"),
        )
        return Scenario(
            name=ssec.get("name", "scenario"),
            world=world,
            start=start,
            sensor=sensor,
            planner=planner,
            robot=robot,
            rates=rates,
            duration=ssec.getfloat("duration", fallback=300.0),
            seed=ssec.getint("seed", fallback=1),
            expected_outcome=ssec.get("expected_outcome", "complete"),
            pose_provider=ssec.get("pose_provider", "ground_truth"),
            pose_sigma_xy=ssec.getfloat("pose_sigma_xy", fallback=0.0),
            pose_sigma_heading=ssec.getfloat("pose_sigma_heading", fallback=0.0),
            pose_seed=ssec.getint("pose_seed", fallback=0),
        )
    except ScenarioError:
        raise
    except (ValueError, configparser.Error) as e:
        raise ScenarioError(f"bad scenario value: {e}") from e


def load_scenario(name_or_path: str) -> Scenario:
    """Resolve a builtin scenario name or parse a scenario file path."""
    builders = builtin_scenarios()
    if name_or_path in builders:
        return builders[name_or_path]()
    try:
        with open(name_or_path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ScenarioError(
            f"{name_or_path!r} is neither a builtin scenario nor a readable file: {e}"
        ) from e
    return scenario_from_ini(text)


def scenario_hash(sc: Scenario) -> str:
    return "sha256:" + hashlib.sha256(scenario_to_ini(sc).encode()).hexdigest()[:16]
