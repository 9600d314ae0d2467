"""Frontier/spline exploration planner.

One planning step: cluster the depth sweep into obstacle vertex sets, fan out
candidate cubic trajectories whose terminals sit on the edge of the visible
free space, drop candidates whose swept corridor clips an obstacle, score the
survivors by the frontier chord they pass through (middle of the largest
contiguous feasible run on ties), then accumulate the chosen trajectory and
the newly seen region onto the coverage stack. A tracker vector integrated
from the guidance field is what the motion controller actually follows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

from shapely.geometry import Polygon
from shapely.ops import unary_union

from fieldrover.geometry import (
    OrbitDirection,
    PathFunction,
    Point2,
    RobotPose,
    Vec2,
    eval_path,
    guidance_field,
    track_step,
    wrap_angle,
)

__all__ = [
    "RayPoint",
    "PointCloud",
    "LocalVertexSet",
    "Frontier",
    "CandidateSet",
    "Region2",
    "CoverageEntry",
    "CoverageStack",
    "Decision",
    "PlannerOutput",
    "PlannerConfig",
    "PlannerState",
    "extract_vertices",
    "vertex_sets_changed",
    "frontiers_from_vertices",
    "generate_candidates",
    "score_and_select",
    "vertices_to_region",
    "update_coverage",
    "is_complete",
    "plan_step",
]


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class RayPoint:
    """One return of the planar depth sweep, sensor frame."""

    range: float
    bearing: float
    hit: bool = True


@dataclass(frozen=True)
class PointCloud:
    """An ordered angular sweep of range returns."""

    rays: tuple[RayPoint, ...]
    stamp: float = 0.0

    def __post_init__(self) -> None:
        for a, b in zip(self.rays, self.rays[1:]):
            if not (b.bearing > a.bearing):
                raise ValueError("cloud bearings must be strictly increasing")
        for r in self.rays:
            if r.range < 0.0:
                raise ValueError(f"negative range {r.range}")


@dataclass(frozen=True)
class LocalVertexSet:
    """Per-step sensing result in the world frame.

    ``fov_vertices`` polygonize the sensing horizon arc (closing the free-space
    polygon through the sensor origin); ``obstacles`` holds one reduced vertex
    hull (first, extreme-range, last point) per cluster, the compact form used
    for scene-change tests and frontier bookkeeping. ``cluster_points`` keeps
    the full point chain per cluster for clearance and occlusion tests, where
    the reduced chord would misstate the obstacle surface.
    """

    fov_vertices: tuple[Point2, ...]
    obstacles: tuple[tuple[Point2, ...], ...]
    stamp: float = 0.0
    cluster_points: tuple[tuple[Point2, ...], ...] = ()

    def __post_init__(self) -> None:
        for cluster in self.obstacles:
            if len(cluster) < 1:
                raise ValueError("empty obstacle cluster")
        if self.cluster_points and len(self.cluster_points) != len(self.obstacles):
            raise ValueError("cluster_points must parallel obstacles")

    def collision_chains(self) -> tuple[tuple[Point2, ...], ...]:
        return self.cluster_points if self.cluster_points else self.obstacles


@dataclass(frozen=True)
class Frontier:
    """A chord across a gap between known obstacles (or to the FOV edge)."""

    endpoints: tuple[Point2, Point2]
    width: float

    def __post_init__(self) -> None:
        if not (self.width > 0.0):
            raise ValueError(f"frontier width must be > 0, got {self.width}")


@dataclass(frozen=True)
class CandidateSet:
    """Candidate trajectories ordered by terminal bearing, with feasibility."""

    candidates: tuple[PathFunction, ...]
    feasible_mask: tuple[bool, ...]
    terminal_points: tuple[Point2, ...]
    terminal_bearings: tuple[float, ...]


class Region2:
    """Union of convex polygons with a cached area.

    Sensed regions are triangle fans from the sensor origin, so each part is
    convex; free-space regions built from world geometry may be arbitrary.
    """

    def __init__(self, polygons: Sequence[tuple[Point2, ...]], geom=None):
        self.polygons = [tuple(p) for p in polygons]
        if geom is None:
            shp = [Polygon([(v.x, v.y) for v in poly]) for poly in self.polygons]
            geom = unary_union([g for g in shp if g.is_valid and g.area > 0.0])
        self._geom = geom

    @classmethod
    def empty(cls) -> "Region2":
        return cls([], geom=Polygon())

    @classmethod
    def from_geometry(cls, geom) -> "Region2":
        polys = []
        parts = getattr(geom, "geoms", [geom])
        for part in parts:
            if part.is_empty:
                continue
            polys.append(tuple(Point2(x, y) for x, y in part.exterior.coords[:-1]))
        return cls(polys, geom=geom)

    @property
    def geom(self):
        return self._geom

    @property
    def area(self) -> float:
        return self._geom.area

    def union(self, other: "Region2") -> "Region2":
        return Region2(
            self.polygons + other.polygons, geom=self._geom.union(other._geom)
        )


@dataclass(frozen=True)
class CoverageEntry:
    path: PathFunction
    stamp: float


@dataclass(frozen=True)
class CoverageStack:
    """Append-only record of chosen trajectories plus the explored region."""

    entries: tuple[CoverageEntry, ...] = ()
    explored: Region2 = field(default_factory=Region2.empty)

    @classmethod
    def new(cls) -> "CoverageStack":
        return cls((), Region2.empty())

    @property
    def current_path(self) -> Optional[PathFunction]:
        return self.entries[-1].path if self.entries else None


class Decision(Enum):
    CONTINUE_TRACKING = "continue_tracking"
    NEW_PATH = "new_path"
    STUCK = "stuck"
    COMPLETE = "complete"


@dataclass(frozen=True)
class PlannerOutput:
    decision: Decision
    tracker: Vec2
    new_path: Optional[PathFunction] = None
    chosen_frontier: Optional[Frontier] = None

    def __post_init__(self) -> None:
        if self.decision is Decision.NEW_PATH and self.chosen_frontier is None:
            raise ValueError("new_path decision requires a chosen frontier")


@dataclass(frozen=True)
class PlannerConfig:
    """Knobs of the planning pipeline; defaults match the shipped scenarios."""

    half_angle: float = math.radians(43.5)
    max_range: float = 6.0
    cluster_eps: float = 0.5
    change_eps: float = 0.2
    score_eps: float = 0.5
    fan_size: int = 9
    robot_radius: float = 0.5
    safety_margin: float = 0.2
    terminal_margin: float = 0.85
    min_terminal: float = 0.8
    # Clearance is enforced over the leading stretch of each candidate only:
    # the fan refreshes every plan step, long before the terminal is reached,
    # so demanding a clear corridor all the way to a terminal that by design
    # sits at the edge of visibility would veto every candidate near corners.
    clearance_horizon: float = 3.5
    theta: float = 0.3
    tracker_cap: float = 0.5
    arc_points: int = 17
    curve_samples: int = 32
    completion_threshold: float = 0.95
    # Attraction rate picked from the chosen candidate's curvature at the
    # anchor (|2b|): near-line, moderate, sharp.
    ke_line: float = 0.05
    ke_mid: float = 0.1
    ke_sharp: float = 0.4
    curvature_line: float = 0.05
    curvature_sharp: float = 0.5
    free_space: Optional[Region2] = None


@dataclass(frozen=True)
class PlannerState:
    """Carry-over between planning steps (scene-change reference scan)."""

    last_vertices: Optional[LocalVertexSet] = None


# ---------------------------------------------------------------------------
# Low-level geometry helpers


def _to_world(pose: RobotPose, r: float, bearing: float) -> Point2:
    a = pose.heading + bearing
    return Point2(
        pose.position.x + r * math.cos(a), pose.position.y + r * math.sin(a)
    )


def _bearing_range(pose: RobotPose, p: Point2) -> tuple[float, float]:
    dx = p.x - pose.position.x
    dy = p.y - pose.position.y
    return wrap_angle(math.atan2(dy, dx) - pose.heading), math.hypot(dx, dy)


def _cluster_segments(
    obstacles: Sequence[tuple[Point2, ...]]
) -> list[tuple[Point2, Point2]]:
    segs = []
    for cluster in obstacles:
        if len(cluster) == 1:
            segs.append((cluster[0], cluster[0]))
        else:
            for a, b in zip(cluster, cluster[1:]):
                segs.append((a, b))
    return segs


def _ray_segment_t(
    ox: float, oy: float, dx: float, dy: float, a: Point2, b: Point2
) -> Optional[float]:
    """Distance along the ray (o, d) to segment ab, or None if no hit."""
    ex = b.x - a.x
    ey = b.y - a.y
    den = dx * ey - dy * ex
    if abs(den) < 1e-12:
        return None
    qx = a.x - ox
    qy = a.y - oy
    t = (qx * ey - qy * ex) / den
    s = (qx * dy - qy * dx) / den
    if t >= 0.0 and -1e-9 <= s <= 1.0 + 1e-9:
        return t
    return None


def _visible_range(
    pose: RobotPose,
    bearing: float,
    segments: Sequence[tuple[Point2, Point2]],
    max_range: float,
) -> float:
    a = pose.heading + bearing
    dx = math.cos(a)
    dy = math.sin(a)
    best = max_range
    for p, q in segments:
        t = _ray_segment_t(pose.position.x, pose.position.y, dx, dy, p, q)
        if t is not None and t < best:
            best = t
    return best


def _point_segment_distance(p: Point2, a: Point2, b: Point2) -> float:
    ax, ay = a.x, a.y
    ex = b.x - ax
    ey = b.y - ay
    ll = ex * ex + ey * ey
    if ll < 1e-18:
        return math.hypot(p.x - ax, p.y - ay)
    t = ((p.x - ax) * ex + (p.y - ay) * ey) / ll
    t = min(1.0, max(0.0, t))
    return math.hypot(p.x - (ax + t * ex), p.y - (ay + t * ey))


# ---------------------------------------------------------------------------
# Operations


def extract_vertices(
    cloud: PointCloud,
    eps: float,
    fov: tuple[float, float],
    pose: RobotPose,
    arc_points: int = 17,
) -> LocalVertexSet:
    """Cluster a sweep into obstacle vertex hulls plus the FOV horizon arc.

    Clusters are maximal chains of consecutive hit returns whose Euclidean gap
    is within ``eps``; each is reduced to first / extreme-range / last point.
    ``fov`` is (half_angle, max_range). All outputs are in the world frame.
    """
    if not (eps > 0.0):
        raise ValueError(f"eps must be > 0, got {eps}")
    half_angle, max_range = fov
    if arc_points < 2:
        raise ValueError("arc_points must be >= 2")

    hits = [r for r in cloud.rays if r.hit]
    clusters: list[list[RayPoint]] = []
    for r in hits:
        if clusters:
            prev = clusters[-1][-1]
            gap = math.hypot(
                r.range * math.cos(r.bearing) - prev.range * math.cos(prev.bearing),
                r.range * math.sin(r.bearing) - prev.range * math.sin(prev.bearing),
            )
            if gap <= eps:
                clusters[-1].append(r)
                continue
        clusters.append([r])

    obstacle_hulls = []
    chains = []
    for cluster in clusters:
        extreme = max(range(len(cluster)), key=lambda i: cluster[i].range)
        order = sorted({0, extreme, len(cluster) - 1})
        hull = tuple(
            _to_world(pose, cluster[i].range, cluster[i].bearing) for i in order
        )
        obstacle_hulls.append(hull)
        chains.append(tuple(_to_world(pose, r.range, r.bearing) for r in cluster))

    step = 2.0 * half_angle / (arc_points - 1)
    fov_vertices = tuple(
        _to_world(pose, max_range, -half_angle + i * step) for i in range(arc_points)
    )
    return LocalVertexSet(
        fov_vertices=fov_vertices,
        obstacles=tuple(obstacle_hulls),
        stamp=cloud.stamp,
        cluster_points=tuple(chains),
    )


def vertex_sets_changed(
    prev: LocalVertexSet, cur: LocalVertexSet, eps: float
) -> bool:
    """Scene-change test: cluster count differs, or any matched cluster vertex
    or FOV vertex moved more than ``eps``."""
    if len(prev.obstacles) != len(cur.obstacles):
        return True
    for a, b in zip(prev.obstacles, cur.obstacles):
        if len(a) != len(b):
            return True
        for va, vb in zip(a, b):
            if math.hypot(va.x - vb.x, va.y - vb.y) > eps:
                return True
    for va, vb in zip(prev.fov_vertices, cur.fov_vertices):
        if math.hypot(va.x - vb.x, va.y - vb.y) > eps:
            return True
    return False


@dataclass(frozen=True)
class _Gap:
    lo: float
    hi: float
    frontier: Frontier


def _fov_of(local: LocalVertexSet, pose: RobotPose) -> tuple[float, float]:
    b0, r0 = _bearing_range(pose, local.fov_vertices[0])
    b1, _ = _bearing_range(pose, local.fov_vertices[-1])
    return max(abs(b0), abs(b1)), r0


def _frontier_gaps(local: LocalVertexSet, pose: RobotPose) -> list[_Gap]:
    half_angle, max_range = _fov_of(local, pose)
    # Blocked bearing intervals, annotated with the edge vertices.
    intervals: list[tuple[float, float, Point2, Point2]] = []
    for cluster in local.obstacles:
        brs = [(_bearing_range(pose, v)[0], v) for v in cluster]
        brs.sort(key=lambda t: t[0])
        intervals.append((brs[0][0], brs[-1][0], brs[0][1], brs[-1][1]))
    intervals.sort(key=lambda t: t[0])

    merged: list[tuple[float, float, Point2, Point2]] = []
    for lo, hi, plo, phi_ in intervals:
        if merged and lo <= merged[-1][1] + 1e-9:
            mlo, mhi, mplo, mphi = merged[-1]
            if hi > mhi:
                merged[-1] = (mlo, hi, mplo, phi_)
        else:
            merged.append((lo, hi, plo, phi_))

    corner_lo = _to_world(pose, max_range, -half_angle)
    corner_hi = _to_world(pose, max_range, half_angle)
    gaps: list[_Gap] = []

    def add_gap(lo: float, hi: float, p1: Point2, p2: Point2) -> None:
        if hi - lo <= 1e-6:
            return
        width = math.hypot(p1.x - p2.x, p1.y - p2.y)
        if width <= 1e-9:
            return
        gaps.append(_Gap(lo, hi, Frontier((p1, p2), width)))

    cursor = -half_angle
    cursor_pt = corner_lo
    for lo, hi, plo, phi_ in merged:
        if hi < -half_angle or lo > half_angle:
            continue
        add_gap(cursor, min(lo, half_angle), cursor_pt, plo)
        if hi > cursor:
            cursor = hi
            cursor_pt = phi_
    add_gap(cursor, half_angle, cursor_pt, corner_hi)
    return gaps


def frontiers_from_vertices(
    local: LocalVertexSet, pose: RobotPose
) -> list[Frontier]:
    """Frontier chords across the un-blocked bearing gaps of the sweep."""
    return [g.frontier for g in _frontier_gaps(local, pose)]


def _fit_candidate(
    pose: RobotPose,
    bearing: float,
    terminal_r: float,
    attraction_rate_of,
) -> tuple[PathFunction, tuple[float, float], Point2]:
    """Fit the cubic through the terminal with tangent-continuous endpoints.

    Returns (path, (a, b) robot-frame coefficients, terminal world point).
    Left and center candidates keep the robot frame (counterclockwise orbit);
    right candidates are re-expressed in the half-turn frame so that the
    clockwise orbit direction still traverses the curve forward.
    """
    xt = terminal_r * math.cos(bearing)
    yt = terminal_r * math.sin(bearing)
    if abs(bearing) < 1e-12:
        a = b = 0.0
    else:
        slope = math.tan(bearing)
        b = (3.0 * yt / xt - slope) / xt
        a = (yt - b * xt * xt) / (xt ** 3)
    terminal = _to_world(pose, terminal_r, bearing)
    ke = attraction_rate_of(abs(2.0 * b))
    if bearing >= -1e-12:
        path = PathFunction(
            anchor=pose.position,
            heading=pose.heading,
            coeffs=(a, b, 0.0, 0.0),
            direction=OrbitDirection.COUNTERCLOCKWISE,
            attraction_rate=ke,
        )
    else:
        path = PathFunction(
            anchor=pose.position,
            heading=wrap_angle(pose.heading + math.pi),
            coeffs=(a, -b, 0.0, 0.0),
            direction=OrbitDirection.CLOCKWISE,
            attraction_rate=ke,
        )
    return path, (a, b), terminal


def generate_candidates(
    local: LocalVertexSet,
    pose: RobotPose,
    fan_size: int,
    cfg: PlannerConfig = PlannerConfig(),
) -> CandidateSet:
    """Fan of cubic candidates over evenly spaced terminal bearings.

    Terminals sit on the edge of the visible free space (obstacle-truncated,
    capped at the sensing range). A candidate is feasible when its corridor,
    the curve inflated by the robot radius plus safety margin, stays clear of
    every obstacle cluster.
    """
    if fan_size < 3 or fan_size % 2 == 0:
        raise ValueError(f"fan_size must be odd and >= 3, got {fan_size}")
    half_angle, max_range = _fov_of(local, pose)
    segments = _cluster_segments(local.collision_chains())
    clearance = cfg.robot_radius + cfg.safety_margin

    def ke_of(curvature: float) -> float:
        if curvature < cfg.curvature_line:
            return cfg.ke_line
        if curvature > cfg.curvature_sharp:
            return cfg.ke_sharp
        return cfg.ke_mid

    candidates = []
    feasible = []
    terminals = []
    bearings = []
    step = 2.0 * half_angle / (fan_size - 1)
    ch = math.cos(pose.heading)
    sh = math.sin(pose.heading)
    for i in range(fan_size):
        bearing = -half_angle + i * step
        if abs(bearing) < 1e-12:
            bearing = 0.0
        vis = _visible_range(pose, bearing, segments, max_range)
        terminal_r = min(max_range, vis - cfg.terminal_margin)
        reachable = terminal_r >= cfg.min_terminal
        if not reachable:
            terminal_r = cfg.min_terminal
        path, (a, b), terminal = _fit_candidate(pose, bearing, terminal_r, ke_of)

        ok = reachable
        if ok and segments:
            xt = min(terminal_r * math.cos(bearing), cfg.clearance_horizon)
            n = cfg.curve_samples
            for k in range(n + 1):
                xl = xt * k / n
                yl = (a * xl * xl * xl) + (b * xl * xl)
                wp = Point2(
                    pose.position.x + ch * xl - sh * yl,
                    pose.position.y + sh * xl + ch * yl,
                )
                for sa, sb in segments:
                    if _point_segment_distance(wp, sa, sb) < clearance:
                        ok = False
                        break
                if not ok:
                    break
        candidates.append(path)
        feasible.append(ok)
        terminals.append(terminal)
        bearings.append(bearing)
    return CandidateSet(
        candidates=tuple(candidates),
        feasible_mask=tuple(feasible),
        terminal_points=tuple(terminals),
        terminal_bearings=tuple(bearings),
    )


def score_and_select(
    cands: CandidateSet,
    local: LocalVertexSet,
    pose: RobotPose,
    eps: float,
) -> Optional[tuple[PathFunction, Frontier]]:
    """Pick the candidate intersecting the widest frontier chord.

    A candidate earns a frontier's width when it passes through the chord:
    its sampled curve (continued a little past the terminal along the
    terminal tangent, since frontiers sit at the edge of the visible free
    space) crosses the chord segment, or passes within ``eps`` of it, which
    covers chords the curve skims lengthwise while rounding a corner.
    The continuation is a straight ray rather than the
    cubic itself because a sharp cubic diverges fast beyond its fitted span
    and would sweep across chords the candidate never actually heads for.
    Equal-score
    candidates resolve to the middle of the largest contiguous feasible run
    (lower middle on even runs). Returns None when nothing is feasible (the
    robot is stuck).
    """
    n = len(cands.candidates)
    if not any(cands.feasible_mask):
        return None
    gaps = _frontier_gaps(local, pose)

    def curve_points(i: int, samples: int = 24, reach: float = 1.5) -> list[Point2]:
        bearing = cands.terminal_bearings[i]
        term = cands.terminal_points[i]
        terminal_r = math.hypot(
            term.x - pose.position.x, term.y - pose.position.y
        )
        xt = terminal_r * math.cos(bearing)
        if abs(bearing) < 1e-12 or abs(xt) < 1e-9:
            a = b = 0.0
        else:
            yt = terminal_r * math.sin(bearing)
            slope = math.tan(bearing)
            b = (3.0 * yt / xt - slope) / xt
            a = (yt - b * xt * xt) / (xt ** 3)
        ch = math.cos(pose.heading)
        sh = math.sin(pose.heading)
        pts = []
        for k in range(samples + 1):
            xl = xt * k / samples
            yl = (a * xl * xl * xl) + (b * xl * xl)
            pts.append(
                Point2(
                    pose.position.x + ch * xl - sh * yl,
                    pose.position.y + sh * xl + ch * yl,
                )
            )
        # Straight continuation along the terminal tangent.
        slope = (3.0 * a * xt + 2.0 * b) * xt
        norm = math.hypot(1.0, slope)
        tx = (ch - sh * slope) / norm
        ty = (sh + ch * slope) / norm
        last = pts[-1]
        pts.append(Point2(last.x + reach * tx, last.y + reach * ty))
        return pts

    def dist_to_polyline(p: Point2, pts: list[Point2]) -> float:
        return min(
            _point_segment_distance(p, a, b) for a, b in zip(pts, pts[1:])
        )

    def chord_distance(pts: list[Point2], p1: Point2, p2: Point2) -> float:
        # For non-crossing segments the minimum is attained at an endpoint;
        # crossings are handled separately.
        d = min(dist_to_polyline(p1, pts), dist_to_polyline(p2, pts))
        for p in pts:
            d = min(d, _point_segment_distance(p, p1, p2))
        return d

    def orient(a: Point2, b: Point2, c: Point2) -> float:
        return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)

    def crosses_chord(pts: list[Point2], p1: Point2, p2: Point2) -> bool:
        for a, b in zip(pts, pts[1:]):
            if (
                orient(p1, p2, a) * orient(p1, p2, b) <= 0.0
                and orient(a, b, p1) * orient(a, b, p2) <= 0.0
            ):
                return True
        return False

    scores = [0.0] * n
    matched: list[Optional[Frontier]] = [None] * n
    for i in range(n):
        if not cands.feasible_mask[i]:
            continue
        pts = curve_points(i)
        for gap in gaps:
            p1, p2 = gap.frontier.endpoints
            if crosses_chord(pts, p1, p2) or chord_distance(pts, p1, p2) <= eps:
                if gap.frontier.width > scores[i]:
                    scores[i] = gap.frontier.width
                    matched[i] = gap.frontier
    best = max(scores[i] for i in range(n) if cands.feasible_mask[i])
    eligible = [
        cands.feasible_mask[i] and scores[i] == best for i in range(n)
    ]

    runs: list[list[int]] = []
    for i in range(n):
        if eligible[i]:
            if runs and runs[-1][-1] == i - 1:
                runs[-1].append(i)
            else:
                runs.append([i])
    run = max(runs, key=len)
    chosen = run[(len(run) + 1) // 2 - 1]

    frontier = matched[chosen]
    if frontier is None:
        bearing = cands.terminal_bearings[chosen]
        for gap in gaps:
            if gap.lo - 1e-9 <= bearing <= gap.hi + 1e-9:
                frontier = gap.frontier
                break
    if frontier is None and gaps:
        frontier = max(gaps, key=lambda g: g.frontier.width).frontier
    if frontier is None:
        # Fully blocked sweep but a feasible short candidate: fall back to the
        # sensing-horizon chord so the output contract always carries one.
        half_angle, max_range = _fov_of(local, pose)
        p1 = _to_world(pose, max_range, -half_angle)
        p2 = _to_world(pose, max_range, half_angle)
        frontier = Frontier((p1, p2), math.hypot(p1.x - p2.x, p1.y - p2.y))
    return cands.candidates[chosen], frontier


def vertices_to_region(local: LocalVertexSet, pose: RobotPose) -> Region2:
    """Explored region claimed by one sweep: the visibility fan.

    A triangle fan from the sensor origin out to the visible range at each
    horizon bearing; occluded shadows behind obstacle clusters are never
    claimed.
    """
    segments = _cluster_segments(local.collision_chains())
    origin = pose.position
    pts = []
    for v in local.fov_vertices:
        bearing, r = _bearing_range(pose, v)
        vis = min(r, _visible_range(pose, bearing, segments, r))
        pts.append(_to_world(pose, vis, bearing))
    triangles = []
    for a, b in zip(pts, pts[1:]):
        area2 = abs(
            (a.x - origin.x) * (b.y - origin.y)
            - (a.y - origin.y) * (b.x - origin.x)
        )
        if area2 > 1e-12:
            triangles.append((origin, a, b))
    return Region2(triangles)


def update_coverage(
    stack: CoverageStack, phi: PathFunction, t: float, region: Region2
) -> CoverageStack:
    """Append a chosen trajectory and merge the newly seen region.

    When the planner runs faster than the sensor it may re-plan against the
    same sensing snapshot; an entry with an equal stamp replaces the previous
    one instead of appending a duplicate.
    """
    if stack.entries and t < stack.entries[-1].stamp:
        raise ValueError(
            f"coverage stamps must not decrease: {t} after {stack.entries[-1].stamp}"
        )
    entries = stack.entries
    if entries and entries[-1].stamp == t:
        entries = entries[:-1]
    return CoverageStack(
        entries=entries + (CoverageEntry(phi, t),),
        explored=stack.explored.union(region),
    )


def is_complete(
    stack: CoverageStack, free_space: Region2, threshold: float = 0.95
) -> bool:
    """Fractional-coverage completion test."""
    if not (0.0 < threshold <= 1.0):
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    total = free_space.area
    if total <= 0.0:
        return True
    # Cheap necessary condition first; the polygon difference is the costly op.
    if stack.explored.area < (threshold - 1e-9) * total:
        return False
    uncovered = free_space.geom.difference(stack.explored.geom).area
    return uncovered / total <= (1.0 - threshold) + 1e-12


def _clamp_tracker(v: Vec2, cap: float) -> Vec2:
    n = v.norm()
    if n > cap > 0.0:
        return v.scaled(cap / n)
    return v


def plan_step(
    state,
    cloud: PointCloud,
    stack: CoverageStack,
    pstate: PlannerState,
    cfg: PlannerConfig = PlannerConfig(),
) -> tuple[PlannerOutput, CoverageStack, PlannerState]:
    """One full planning iteration.

    ``state`` needs ``pose`` (RobotPose) and ``tracker`` (Vec2) attributes.
    Order: completion check, vertex extraction, scene-change test, candidate
    generation and selection on change, tracker integration always.
    """
    pose: RobotPose = state.pose
    tracker: Vec2 = state.tracker

    if cfg.free_space is not None and is_complete(
        stack, cfg.free_space, cfg.completion_threshold
    ):
        return (
            PlannerOutput(Decision.COMPLETE, tracker),
            stack,
            pstate,
        )

    local = extract_vertices(
        cloud,
        cfg.cluster_eps,
        (cfg.half_angle, cfg.max_range),
        pose,
        arc_points=cfg.arc_points,
    )
    changed = pstate.last_vertices is None or vertex_sets_changed(
        pstate.last_vertices, local, cfg.change_eps
    )

    decision = Decision.CONTINUE_TRACKING
    new_path: Optional[PathFunction] = None
    frontier: Optional[Frontier] = None
    out_stack = stack
    out_pstate = pstate
    current = stack.current_path

    if changed:
        cands = generate_candidates(local, pose, cfg.fan_size, cfg)
        sel = score_and_select(cands, local, pose, cfg.score_eps)
        if sel is None:
            decision = Decision.STUCK
        else:
            new_path, frontier = sel
            decision = Decision.NEW_PATH
            region = vertices_to_region(local, pose)
            out_stack = update_coverage(stack, new_path, cloud.stamp, region)
            out_pstate = PlannerState(last_vertices=local)
            current = new_path

    if decision is Decision.STUCK or current is None:
        out_tracker = tracker
    elif decision is Decision.NEW_PATH:
        # Fresh trajectory: restart the accumulator so steering re-aims
        # immediately instead of fighting stale momentum.
        g = guidance_field(current, pose.position)
        out_tracker = _clamp_tracker(g.scaled(cfg.theta), cfg.tracker_cap)
    else:
        out_tracker = _clamp_tracker(
            track_step(tracker, current, pose.position, cfg.theta),
            cfg.tracker_cap,
        )

    return (
        PlannerOutput(decision, out_tracker, new_path, frontier),
        out_stack,
        out_pstate,
    )
