"""Deterministic planar world: ray-cast sensing, differential-drive kinematics,
collision tests, and pose providers standing in for an external localizer."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional

import numpy as np
from shapely.geometry import Point as ShapelyPoint
from shapely.geometry import Polygon

from fieldrover.exploration import PointCloud, RayPoint, Region2
from fieldrover.geometry import Point2, RobotPose, Vec2, wrap_angle

__all__ = [
    "World",
    "SensorConfig",
    "RobotConfig",
    "RobotState",
    "Command",
    "sense",
    "step_robot",
    "steer_from_tracker",
    "collision_check",
    "GroundTruthPoseProvider",
    "NoisyOdometryPoseProvider",
    "make_pose_provider",
]


@dataclass(frozen=True)
class World:
    """Boundary polygon plus disjoint obstacle polygons.

    ``boundary_sensed`` distinguishes physical walls from a pure survey
    extent: an open field has a boundary for coverage accounting but returns
    no echoes from it.
    """

    name: str
    boundary: tuple[Point2, ...]
    obstacles: tuple[tuple[Point2, ...], ...] = ()
    boundary_sensed: bool = True

    @cached_property
    def boundary_polygon(self) -> Polygon:
        return Polygon([(p.x, p.y) for p in self.boundary])

    @cached_property
    def obstacle_polygons(self) -> tuple[Polygon, ...]:
        return tuple(Polygon([(p.x, p.y) for p in o]) for o in self.obstacles)

    @cached_property
    def _segments(self) -> np.ndarray:
        """(S, 4) array of sensed wall segments: ax, ay, bx, by."""
        segs = []

        def ring(points):
            n = len(points)
            for i in range(n):
                a = points[i]
                b = points[(i + 1) % n]
                segs.append((a.x, a.y, b.x, b.y))

        if self.boundary_sensed:
            ring(self.boundary)
        for o in self.obstacles:
            ring(o)
        if not segs:
            return np.zeros((0, 4))
        return np.array(segs, dtype=float)

    def free_region(self) -> Region2:
        geom = self.boundary_polygon
        for o in self.obstacle_polygons:
            geom = geom.difference(o)
        return Region2.from_geometry(geom)


@dataclass(frozen=True)
class SensorConfig:
    """Planar range sweep standing in for a depth camera's horizontal slice."""

    half_angle: float = math.radians(43.5)
    max_range: float = 6.0
    rays: int = 96
    range_noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.rays < 2:
            raise ValueError("need at least 2 rays")
        if not (self.max_range > 0.0):
            raise ValueError("max_range must be > 0")
        if self.range_noise_sigma < 0.0:
            raise ValueError("noise sigma must be >= 0")


@dataclass(frozen=True)
class RobotConfig:
    v_max: float = 0.5
    omega_max: float = 1.0
    k_heading: float = 4.0
    radius: float = 0.5


@dataclass(frozen=True)
class Command:
    v: float
    omega: float


@dataclass(frozen=True)
class RobotState:
    pose: RobotPose
    linear_velocity: float = 0.0
    angular_velocity: float = 0.0
    tracker: Vec2 = Vec2(0.0, 0.0)


def sense(
    world: World,
    pose: RobotPose,
    cfg: SensorConfig,
    rng: Optional[np.random.Generator] = None,
    stamp: float = 0.0,
) -> PointCloud:
    """One sweep: evenly spaced bearings, nearest wall hit per ray.

    Rays that reach nothing within range come back flagged free at max range.
    Gaussian range noise is drawn from ``rng`` (or a fresh generator seeded
    from the config when omitted, which makes a single call reproducible).
    """
    if not world.boundary_polygon.contains(
        ShapelyPoint(pose.position.x, pose.position.y)
    ):
        raise ValueError(f"pose {pose.position} outside world boundary")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)

    bearings = np.linspace(-cfg.half_angle, cfg.half_angle, cfg.rays)
    angles = pose.heading + bearings
    dx = np.cos(angles)
    dy = np.sin(angles)

    segs = world._segments
    if len(segs):
        ax = segs[:, 0][None, :] - pose.position.x
        ay = segs[:, 1][None, :] - pose.position.y
        ex = (segs[:, 2] - segs[:, 0])[None, :]
        ey = (segs[:, 3] - segs[:, 1])[None, :]
        den = dx[:, None] * ey - dy[:, None] * ex
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (ax * ey - ay * ex) / den
            s = (ax * dy[:, None] - ay * dx[:, None]) / den
        valid = (np.abs(den) > 1e-12) & (t >= 0.0) & (s >= -1e-9) & (s <= 1.0 + 1e-9)
        t = np.where(valid, t, np.inf)
        ranges = t.min(axis=1)
    else:
        ranges = np.full(cfg.rays, np.inf)

    hit = ranges <= cfg.max_range
    out_ranges = np.where(hit, ranges, cfg.max_range)
    if cfg.range_noise_sigma > 0.0:
        noise = rng.normal(0.0, cfg.range_noise_sigma, size=cfg.rays)
        out_ranges = np.where(
            hit, np.clip(out_ranges + noise, 0.01, cfg.max_range), out_ranges
        )

    rays = tuple(
        RayPoint(range=float(out_ranges[i]), bearing=float(bearings[i]), hit=bool(hit[i]))
        for i in range(cfg.rays)
    )
    return PointCloud(rays=rays, stamp=stamp)


def step_robot(
    state: RobotState,
    cmd: Command,
    dt: float,
    limits: RobotConfig = RobotConfig(),
) -> RobotState:
    """Unicycle integration with midpoint heading; tracker carried through."""
    if not (dt > 0.0):
        raise ValueError("dt must be > 0")
    v = max(-limits.v_max, min(limits.v_max, cmd.v))
    w = max(-limits.omega_max, min(limits.omega_max, cmd.omega))
    mid = state.pose.heading + 0.5 * w * dt
    pos = state.pose.position
    new_pose = RobotPose(
        position=Point2(pos.x + v * math.cos(mid) * dt, pos.y + v * math.sin(mid) * dt),
        heading=wrap_angle(state.pose.heading + w * dt),
    )
    return RobotState(
        pose=new_pose,
        linear_velocity=v,
        angular_velocity=w,
        tracker=state.tracker,
    )


def steer_from_tracker(state: RobotState, limits: RobotConfig = RobotConfig()) -> Command:
    """Map the tracker vector to wheel commands.

    Turn rate proportional to heading error (clamped); forward speed scales
    with the cosine of the error and never reverses. A zero tracker stops.
    """
    t = state.tracker
    if t.norm() < 1e-12:
        return Command(0.0, 0.0)
    err = wrap_angle(math.atan2(t.dy, t.dx) - state.pose.heading)
    omega = max(-limits.omega_max, min(limits.omega_max, limits.k_heading * err))
    v = limits.v_max * max(0.0, math.cos(err))
    return Command(v, omega)


def collision_check(world: World, pose: RobotPose, radius: float) -> bool:
    """True when the robot disc clips an obstacle or exits the boundary."""
    if not (radius > 0.0):
        raise ValueError("radius must be > 0")
    pt = ShapelyPoint(pose.position.x, pose.position.y)
    if not world.boundary_polygon.contains(pt):
        return True
    if world.boundary_polygon.exterior.distance(pt) < radius:
        return True
    for poly in world.obstacle_polygons:
        if poly.distance(pt) < radius:
            return True
    return False


class GroundTruthPoseProvider:
    """Passes the simulator's true pose straight through."""

    def __call__(self, true_pose: RobotPose) -> RobotPose:
        return true_pose

    def describe(self) -> str:
        return "ground_truth"


class NoisyOdometryPoseProvider:
    """Integrates seeded Gaussian drift on top of the true pose, per tick."""

    def __init__(self, sigma_xy: float, sigma_heading: float, seed: int):
        if sigma_xy < 0.0 or sigma_heading < 0.0:
            raise ValueError("sigmas must be >= 0")
        self.sigma_xy = sigma_xy
        self.sigma_heading = sigma_heading
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._dx = 0.0
        self._dy = 0.0
        self._dh = 0.0

    def __call__(self, true_pose: RobotPose) -> RobotPose:
        if self.sigma_xy > 0.0:
            self._dx += float(self._rng.normal(0.0, self.sigma_xy))
            self._dy += float(self._rng.normal(0.0, self.sigma_xy))
        if self.sigma_heading > 0.0:
            self._dh += float(self._rng.normal(0.0, self.sigma_heading))
        return RobotPose(
            position=Point2(
                true_pose.position.x + self._dx, true_pose.position.y + self._dy
            ),
            heading=wrap_angle(true_pose.heading + self._dh),
        )

    def describe(self) -> str:
        return f"noisy_odometry({self.sigma_xy},{self.sigma_heading},{self.seed})"


def make_pose_provider(
    kind: str,
    sigma_xy: float = 0.0,
    sigma_heading: float = 0.0,
    seed: int = 0,
):
    if kind == "ground_truth":
        return GroundTruthPoseProvider()
    if kind == "noisy_odometry":
        return NoisyOdometryPoseProvider(sigma_xy, sigma_heading, seed)
    raise ValueError(f"unknown pose provider kind {kind!r}")
