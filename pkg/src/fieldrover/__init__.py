"""Deterministic planar exploration stack.

Frontier/spline candidate planning with a contour-following guidance vector
field, a differential-drive world simulator, a byte-exact low-rate teleop
protocol with a lossy link model, and an operator-facing base station.
"""

from fieldrover.geometry import (
    FieldSample,
    OrbitDirection,
    PathFunction,
    Point2,
    Vec2,
    apply_direction,
    eval_path,
    grad_path,
    guidance_field,
    sample_field_grid,
    track_step,
)

__all__ = [
    "FieldSample",
    "OrbitDirection",
    "PathFunction",
    "Point2",
    "Vec2",
    "apply_direction",
    "eval_path",
    "grad_path",
    "guidance_field",
    "sample_field_grid",
    "track_step",
]

__version__ = "0.1.0"
