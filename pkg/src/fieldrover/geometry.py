"""Path functions and the contour-following guidance vector field.

A path function assigns a scalar to every point of the plane; its zero level
set is the trajectory the robot follows. The guidance field combines a
tangential term (orbiting the level set in a chosen direction) with an
attraction term that pulls onto it at a configurable rate: the robot rides
the contour instead of chasing waypoints.

The curve itself is a cubic expressed in a local frame anchored at the
robot's position when the candidate was created, with the local x-axis along
the travel heading. World-frame evaluation and gradients go through that
rigid transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Point2",
    "Vec2",
    "OrbitDirection",
    "PathFunction",
    "FieldSample",
    "RobotPose",
    "wrap_angle",
    "eval_path",
    "grad_path",
    "apply_direction",
    "guidance_field",
    "track_step",
    "sample_field_grid",
    "eval_path_batch",
    "grad_path_batch",
    "guidance_field_batch",
]


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name} must have finite components, got {values!r}")


@dataclass(frozen=True)
class Point2:
    """A point in the world frame, meters."""

    x: float
    y: float

    def __post_init__(self) -> None:
        _require_finite("Point2", self.x, self.y)


@dataclass(frozen=True)
class Vec2:
    """A free 2D vector (gradients, guidance directions, tracker state)."""

    dx: float
    dy: float

    def __post_init__(self) -> None:
        _require_finite("Vec2", self.dx, self.dy)

    def norm(self) -> float:
        return math.hypot(self.dx, self.dy)

    def scaled(self, s: float) -> "Vec2":
        return Vec2(self.dx * s, self.dy * s)

    def plus(self, other: "Vec2") -> "Vec2":
        return Vec2(self.dx + other.dx, self.dy + other.dy)

    def dot(self, other: "Vec2") -> float:
        return self.dx * other.dx + self.dy * other.dy


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


@dataclass(frozen=True)
class RobotPose:
    """Planar pose in the world frame; heading normalized to (-pi, pi]."""

    position: Point2
    heading: float

    def __post_init__(self) -> None:
        _require_finite("RobotPose.heading", self.heading)
        object.__setattr__(self, "heading", wrap_angle(self.heading))


class OrbitDirection(Enum):
    """Traversal direction along a contour."""

    COUNTERCLOCKWISE = "counterclockwise"
    CLOCKWISE = "clockwise"


@dataclass(frozen=True)
class PathFunction:
    """Cubic path function in a local anchored frame.

    The scalar value at a world point p is  a*x'^3 + b*x'^2 + c*x' + d - y'
    where (x', y') is p expressed with ``anchor`` at the origin and the local
    x-axis along ``heading``. The zero level set is the trajectory.
    """

    anchor: Point2
    heading: float
    coeffs: tuple[float, float, float, float]
    direction: OrbitDirection = OrbitDirection.COUNTERCLOCKWISE
    attraction_rate: float = 0.1

    def __post_init__(self) -> None:
        _require_finite("PathFunction.coeffs", *self.coeffs)
        _require_finite("PathFunction.heading", self.heading)
        if not (self.attraction_rate > 0.0):
            raise ValueError(f"attraction_rate must be > 0, got {self.attraction_rate}")


@dataclass(frozen=True)
class FieldSample:
    """One on-demand sample of the guidance field."""

    at: Point2
    value: float
    gradient: Vec2
    guidance: Vec2


def _local_coords(phi: PathFunction, p: Point2) -> tuple[float, float, float, float]:
    """Return (x', y', cos h, sin h) of p in the path's local frame."""
    ch = math.cos(phi.heading)
    sh = math.sin(phi.heading)
    dx = p.x - phi.anchor.x
    dy = p.y - phi.anchor.y
    return ch * dx + sh * dy, -sh * dx + ch * dy, ch, sh


def eval_path(phi: PathFunction, p: Point2) -> float:
    """Scalar value of the path function at a world point.

    Zero on the trajectory; the sign tells which side of the curve p is on
    (negative above the local curve, i.e. negative lateral offset).
    """
    xl, yl, _, _ = _local_coords(phi, p)
    a, b, c, d = phi.coeffs
    return ((a * xl + b) * xl + c) * xl + d - yl


def grad_path(phi: PathFunction, p: Point2) -> Vec2:
    """Analytic world-frame gradient of :func:`eval_path`."""
    xl, _, ch, sh = _local_coords(phi, p)
    a, b, c, _ = phi.coeffs
    # Local-frame partials, rotated back to the world frame.
    fx = (3.0 * a * xl + 2.0 * b) * xl + c
    fy = -1.0
    return Vec2(fx * ch - fy * sh, fx * sh + fy * ch)


def apply_direction(d: OrbitDirection, v: Vec2) -> Vec2:
    """Rotate a vector a quarter turn in the traversal direction.

    Counterclockwise maps (dx, dy) to (-dy, dx); clockwise to (dy, -dx).
    Applied to a gradient this yields the tangential (contour-following)
    component of the guidance field.
    """
    if d is OrbitDirection.COUNTERCLOCKWISE:
        return Vec2(-v.dy, v.dx)
    return Vec2(v.dy, -v.dx)


def guidance_field(phi: PathFunction, p: Point2) -> Vec2:
    """Contour-following guidance vector at a world point.

    Tangential term rotated from the gradient by the orbit direction, plus an
    attraction term proportional to the scalar value that pulls onto the zero
    level set. On the contour the attraction term vanishes and the result is
    purely tangential (perpendicular to the gradient).
    """
    g = grad_path(phi, p)
    tang = apply_direction(phi.direction, g)
    k = phi.attraction_rate * eval_path(phi, p)
    return Vec2(tang.dx - k * g.dx, tang.dy - k * g.dy)


def track_step(prev: Vec2, phi: PathFunction, p: Point2, theta: float) -> Vec2:
    """One accumulator update of the tracker vector the controller follows."""
    if theta < 0.0:
        raise ValueError(f"step size must be >= 0, got {theta}")
    g = guidance_field(phi, p)
    return Vec2(prev.dx + theta * g.dx, prev.dy + theta * g.dy)


def sample_field_grid(
    phi: PathFunction,
    bounds: Sequence[float],
    resolution: float,
) -> list[FieldSample]:
    """Row-major lattice of field samples over a rectangle.

    ``bounds`` is (xmin, ymin, xmax, ymax); the lattice includes both edges.
    """
    if not (resolution > 0.0):
        raise ValueError(f"resolution must be > 0, got {resolution}")
    xmin, ymin, xmax, ymax = bounds
    if not (xmax > xmin and ymax > ymin):
        raise ValueError(f"degenerate bounds {bounds!r}")
    nx = int(math.floor((xmax - xmin) / resolution + 1e-9)) + 1
    ny = int(math.floor((ymax - ymin) / resolution + 1e-9)) + 1
    out: list[FieldSample] = []
    for j in range(ny):
        y = ymin + j * resolution
        for i in range(nx):
            x = xmin + i * resolution
            p = Point2(x, y)
            out.append(
                FieldSample(
                    at=p,
                    value=eval_path(phi, p),
                    gradient=grad_path(phi, p),
                    guidance=guidance_field(phi, p),
                )
            )
    return out


# Vectorized variants: same math as the scalar operations, over (N,) arrays.
# Used by the field-convergence checks and the SVG field renderer.

def _local_coords_batch(
    phi: PathFunction, xs: np.ndarray, ys: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float, float]:
    ch = math.cos(phi.heading)
    sh = math.sin(phi.heading)
    dx = xs - phi.anchor.x
    dy = ys - phi.anchor.y
    return ch * dx + sh * dy, -sh * dx + ch * dy, ch, sh


def eval_path_batch(phi: PathFunction, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    xl, yl, _, _ = _local_coords_batch(phi, xs, ys)
    a, b, c, d = phi.coeffs
    return ((a * xl + b) * xl + c) * xl + d - yl


def grad_path_batch(
    phi: PathFunction, xs: np.ndarray, ys: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    xl, _, ch, sh = _local_coords_batch(phi, xs, ys)
    a, b, c, _ = phi.coeffs
    fx = (3.0 * a * xl + 2.0 * b) * xl + c
    fy = -1.0
    return fx * ch - fy * sh, fx * sh + fy * ch


def guidance_field_batch(
    phi: PathFunction, xs: np.ndarray, ys: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    gx, gy = grad_path_batch(phi, xs, ys)
    if phi.direction is OrbitDirection.COUNTERCLOCKWISE:
        tx, ty = -gy, gx
    else:
        tx, ty = gy, -gx
    k = phi.attraction_rate * eval_path_batch(phi, xs, ys)
    return tx - k * gx, ty - k * gy
