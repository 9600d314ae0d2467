"""Acceptance gate: one test per headline guarantee, one verdict line each.

Run with ``pytest -v -s tests/test_acceptance.py`` to see the verdict lines
as they print; without ``-s`` they appear in captured output on failure.
"""

import math
import random
import time
from dataclasses import replace

import numpy as np
from shapely.geometry import Point as ShapelyPoint
from shapely.geometry import Polygon as ShapelyPolygon

from conftest import record_verdict
from test_exploration import (
    FOV,
    ORIGIN,
    bearing_sorted,
    chain_oracle,
    cloud_from_points,
    extract_vertices,
    run_middle_selection,
)

from fieldrover.cli import main as cli_main
from fieldrover.geometry import Point2, eval_path, grad_path, guidance_field
from fieldrover.protocol import (
    AckPayload,
    ControlPayload,
    Frame,
    FrameError,
    LinkConfig,
    LinkSimulator,
    PositionPayload,
    StuckPayload,
    TelemetryPayload,
    decode_frame,
    encode_frame,
)
from fieldrover.scenarios import builtin_scenarios
from fieldrover.simulate import run_scenario
from test_geometry import make_path

WHEEL_CENTER = (17.0, 3.35)
WHEEL_RADIUS = 0.21
ROBOT_RADIUS = 0.5


def verdict(name: str, ok: bool, detail: str = "") -> None:
    line = f"[acceptance] {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    print(line)
    record_verdict(line)  # echoed in the terminal summary despite capture
    assert ok, line


def test_straight_line_optimum(open_field_run):
    """Unobstructed travel always selects the zero-coefficient line."""
    trace, report, wall = open_field_run
    paths = list(trace.path_records())
    all_lines = bool(paths) and all(
        (p.a, p.b, p.c, p.d) == (0.0, 0.0, 0.0, 0.0) for p in paths
    )
    ok = all_lines and report.outcome == "complete" and wall < 10.0
    verdict(
        "straight-line-optimum",
        ok,
        f"{len(paths)} paths, outcome={report.outcome}, wall={wall:.1f}s",
    )


def test_middle_selection_rule():
    """Of a contiguous equal-score feasible run, the middle candidate wins."""
    t0 = time.perf_counter()
    rng = random.Random(20260823)
    ok = True
    chosen, start = run_middle_selection(5)
    ok &= chosen - start == 2  # run of five -> third, one-based
    for _ in range(40):
        n = rng.randint(1, 15)
        fan = rng.choice([17, 23, 31])
        if n > fan:
            n = fan
        chosen, start = run_middle_selection(n, fan_size=fan)
        ok &= chosen - start == (n + 1) // 2 - 1
    wall = time.perf_counter() - t0
    verdict("middle-selection", ok and wall < 1.0, f"wall={wall:.2f}s")


def test_field_convergence():
    """Guidance-field integration reaches the contour for every attraction
    rate, with |phi| monotone non-increasing after the discretization
    transient."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    h = 0.02
    ok = True
    for _ in range(100):
        b = float(rng.uniform(-0.5, 0.5))
        start = np.array([rng.uniform(-2, 2), rng.uniform(-2, 2)])
        for ke in (0.05, 0.1, 0.4):
            phi = make_path(b=b, ke=ke)
            p = start.copy()
            v = eval_path(phi, Point2(*p))
            if abs(v) > 1.0:
                p[1] += v  # slide down the local normal into |phi| <= 1
            prev = abs(eval_path(phi, Point2(*p)))
            increased_after_transient = False
            converged = False
            settled = False  # first decrease marks the end of the transient

            def step_dir(q):
                u = guidance_field(phi, Point2(*q))
                n = math.hypot(u.dx, u.dy)
                return np.array([u.dx, u.dy]) / max(n, 1e-12)

            for _ in range(12000):
                # midpoint step: the continuous field decreases |phi|
                # strictly, and second order is accurate enough that the
                # discrete sequence inherits the monotonicity
                p += h * step_dir(p + 0.5 * h * step_dir(p))
                cur = abs(eval_path(phi, Point2(*p)))
                if settled and cur > prev + 1e-9:
                    increased_after_transient = True
                if cur < prev - 1e-12:
                    settled = True
                prev = cur
                if cur < 1e-2:
                    converged = True
                    break
            ok &= converged and not increased_after_transient
    wall = time.perf_counter() - t0
    verdict("field-convergence", ok and wall < 30.0, f"wall={wall:.1f}s")


def test_gradient_finite_difference():
    """Analytic gradients match central differences to 1e-6 relative."""
    rng = np.random.default_rng(17)
    h = 1e-6
    worst = 0.0
    for _ in range(1000):
        a, b, c, d = rng.normal(0, 0.5, 4)
        phi = make_path(
            a, b, c, d,
            anchor=tuple(rng.uniform(-5, 5, 2)),
            heading=float(rng.uniform(-math.pi, math.pi)),
        )
        p = Point2(*rng.uniform(-3, 3, 2))
        g = grad_path(phi, p)
        fx = (eval_path(phi, Point2(p.x + h, p.y))
              - eval_path(phi, Point2(p.x - h, p.y))) / (2 * h)
        fy = (eval_path(phi, Point2(p.x, p.y + h))
              - eval_path(phi, Point2(p.x, p.y - h))) / (2 * h)
        scale = max(1.0, abs(fx), abs(fy))
        worst = max(worst, abs(g.dx - fx) / scale, abs(g.dy - fy) / scale)
    verdict("gradient-check", worst < 1e-6, f"worst rel err {worst:.2e}")


def test_clustering_oracle_equivalence():
    """Sweep-order chain clustering equals brute-force single linkage."""
    rng = np.random.default_rng(42)
    eps = 0.35
    ok = True
    for _ in range(500):
        n = int(rng.integers(0, 201))
        pts = []
        x, y = rng.uniform(1.0, 4.0), rng.uniform(-1.0, 1.0)
        for _ in range(n):
            if rng.random() < 0.15:
                x, y = rng.uniform(1.0, 4.0), rng.uniform(-1.5, 1.5)
            else:
                x += rng.normal(0, 0.12)
                y += rng.normal(0, 0.12)
            pts.append((x, y))
        ordered = [p for _, _, p in bearing_sorted(pts)]
        local = extract_vertices(cloud_from_points(pts), eps, FOV, ORIGIN)
        got = []
        idx = 0
        for chain in local.cluster_points:
            got.append(list(range(idx, idx + len(chain))))
            idx += len(chain)
        ok &= got == chain_oracle(ordered, eps)
    verdict("clustering-oracle", ok, "500 clouds")


def _octagon(cx, cy, r):
    return ShapelyPolygon(
        [
            (cx + r * math.cos(k * math.pi / 4), cy + r * math.sin(k * math.pi / 4))
            for k in range(8)
        ]
    )


def test_tunnel_obstacle_pass_and_stuck(tunnel_run):
    """Single-obstacle corridor: right-hand pass with full clearance, then a
    stuck report at the blocked entrance."""
    trace, report, wall = tunnel_run
    records = list(trace.records())
    wheel = _octagon(*WHEEL_CENTER, WHEEL_RADIUS)
    near = [r for r in records if abs(r.x - WHEEL_CENTER[0]) < 3.0]
    clearance = min(
        wheel.distance(ShapelyPoint(r.x, r.y)) for r in near
    )
    closest = min(near, key=lambda r: wheel.distance(ShapelyPoint(r.x, r.y)))
    passed_right = closest.y < WHEEL_CENTER[1]  # below the wheel, heading +x
    passed_beyond = max(r.x for r in records) > WHEEL_CENTER[0] + 3.0
    stuck_x = report.stuck_position[0] if report.stuck_position else float("nan")
    ok = (
        report.outcome == "stuck"
        and passed_beyond
        and clearance >= ROBOT_RADIUS
        and passed_right
        and 45.0 <= stuck_x <= 55.0
        and report.sim_time < 120.0  # 60 s at the criteria's implicit 1 m/s
        and wall < 60.0
    )
    verdict(
        "tunnel-obstacle-pass",
        ok,
        f"clearance={clearance:.2f}m, stuck_x={stuck_x:.1f}, "
        f"sim={report.sim_time:.0f}s, wall={wall:.1f}s",
    )


def test_hallway_circuit_coverage(hallway_run):
    """Closed circuit: full coverage, no contact, bounded runtime."""
    trace, report, wall = hallway_run
    collisions = sum(r.collision for r in trace.records())
    ok = (
        report.outcome == "complete"
        and report.coverage_fraction >= 0.95
        and collisions == 0
        and report.sim_time < 240.0  # 120 s at the criteria's implicit 1 m/s
        and wall < 120.0
    )
    verdict(
        "hallway-coverage",
        ok,
        f"coverage={report.coverage_fraction:.3f}, collisions={collisions}, "
        f"sim={report.sim_time:.0f}s, wall={wall:.1f}s",
    )


def test_rate_robustness():
    """Off-nominal planning rates must never cause contact."""
    ok = True
    details = []
    for name in ("hallway-circuit", "tunnel-open"):
        for plan_hz in (1.0, 10.0):
            sc = builtin_scenarios()[name]()
            sc = replace(sc, rates=replace(sc.rates, plan_hz=plan_hz))
            trace, report = run_scenario(sc)
            clean = report.outcome != "collision" and not any(
                r.collision for r in trace.records()
            )
            ok &= clean
            details.append(f"{name}@{plan_hz:g}Hz={report.outcome}")
    verdict("rate-robustness", ok, ", ".join(details))


def _random_frame(rng: random.Random) -> Frame:
    decisions = ("none", "tick", "continue_tracking", "new_path", "stuck", "complete")
    k = rng.randrange(5)
    if k == 0:
        payload = ControlPayload(rng.uniform(-30, 30), rng.uniform(-30, 30))
    elif k == 1:
        payload = PositionPayload(rng.uniform(-2000, 2000), rng.uniform(-2000, 2000))
    elif k == 2:
        payload = StuckPayload(rng.uniform(-2000, 2000), rng.uniform(-2000, 2000))
    elif k == 3:
        payload = TelemetryPayload(
            rng.uniform(-2000, 2000),
            rng.uniform(-2000, 2000),
            rng.uniform(-math.pi, math.pi),
            rng.random(),
            decisions[rng.randrange(6)],
        )
    else:
        payload = AckPayload(rng.randrange(256))
    return Frame(seq=rng.randrange(256), payload=payload)


def test_protocol_robustness():
    """Round-trip identity, fuzz survival, bit-flip rejection, duty cycle."""
    rng = random.Random(1)

    round_trip_ok = True
    for _ in range(1_000_000):
        f = _random_frame(rng)
        g = decode_frame(encode_frame(f))
        if g.seq != f.seq or g.kind != f.kind or encode_frame(g) != encode_frame(f):
            round_trip_ok = False
            break

    fuzz_ok = True
    for _ in range(1_000_000):
        blob = rng.randbytes(rng.randrange(0, 32))
        try:
            decode_frame(blob)
        except FrameError:
            pass
        except Exception:
            fuzz_ok = False
            break

    bitflip_ok = True
    for _ in range(100):
        encoded = encode_frame(_random_frame(rng))
        for bit in range(len(encoded) * 8):
            corrupted = bytearray(encoded)
            corrupted[bit // 8] ^= 1 << (bit % 8)
            try:
                decode_frame(bytes(corrupted))
                bitflip_ok = False
            except FrameError:
                pass

    duty_ok = True
    for seed, window, cap, rate in (
        (0, 60.0, 0.01, 0.5),
        (1, 20.0, 0.02, 2.0),
        (2, 10.0, 0.1, 5.0),
    ):
        srng = random.Random(seed)
        cfg = LinkConfig(duty_window=window, duty_cycle_max=cap)
        link = LinkSimulator(cfg)
        now = 0.0
        for _ in range(400):
            now += srng.expovariate(rate)
            link.send(_random_frame(srng), now)
            if link.airtime_fraction(link._busy_until) > cap + 1e-9:
                duty_ok = False
    ok = round_trip_ok and fuzz_ok and bitflip_ok and duty_ok
    verdict(
        "protocol",
        ok,
        f"round_trip={round_trip_ok}, fuzz={fuzz_ok}, "
        f"bitflip={bitflip_ok}, duty={duty_ok}",
    )


def test_replay_determinism(scenario_runs, tmp_path):
    """Replaying every scenario's trace reproduces it byte for byte."""
    ok = True
    for name, (trace, _, _) in scenario_runs.items():
        p = tmp_path / f"{name}.txt"
        p.write_text(trace.to_text())
        ok &= cli_main(["replay", str(p)]) == 0
    verdict("replay-determinism", ok, f"{len(scenario_runs)} traces")
