"""Ground-truth oracle: scripted walks and matching synthetic traces.

A WalkScript names waypoints on the map; synth_walk turns it into a
per-step ground truth plus an IMU + RSSI trace that the signal pipeline
can consume. Deterministic given the seed.

Gait model: acceleration magnitude 1 + A sin(2 pi f t) g with a slightly
sharpened trough. Turns are rectangular gyro-z pulses placed between
step events and aligned to the sample grid, so trapezoidal integration
recovers them exactly. Heading jitter is injected the same way: one
small random pulse per step interval, which makes the integrated heading
drift like a real gyro.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import geometry, mapmodel
from .errors import ScriptError
from .geometry import Point
from .mapmodel import IndoorMap
from .signals import FilterConfig, SensorTrace
from .validation import check_nonnegative
from .wifi import RssiModelParams, RssiScan, TABLE_SCENARIOS, synth_rssi

TRUTH_COLUMNS = ("step", "x", "y", "theta", "area", "waypoint")


@dataclass(frozen=True)
class WalkScript:
    """Waypoints may be (x, y) pairs or "node:<id>" map references."""

    waypoints: tuple
    speed_steps_per_s: float = 2.0
    step_length: float = 0.7
    pauses: tuple[float, ...] | None = None  # seconds spent at each waypoint

    def __post_init__(self) -> None:
        if len(self.waypoints) < 2:
            raise ScriptError("a walk script needs at least two waypoints")
        if self.step_length <= 0 or self.speed_steps_per_s <= 0:
            raise ScriptError("step_length and speed must be positive")
        if self.pauses is not None and len(self.pauses) != len(self.waypoints):
            raise ScriptError("pauses must have one entry per waypoint")

    def resolve(self, indoor_map: IndoorMap) -> list[Point]:
        points: list[Point] = []
        for wp in self.waypoints:
            if isinstance(wp, str):
                if not wp.startswith("node:"):
                    raise ScriptError(f"waypoint reference must look like 'node:<id>', got {wp!r}")
                node_id = int(wp.split(":", 1)[1])
                node = indoor_map.nodes.get(node_id)
                if node is None:
                    raise ScriptError(f"waypoint references unknown node {node_id}")
                points.append(node.pos)
            else:
                points.append((float(wp[0]), float(wp[1])))
        return points


@dataclass(frozen=True)
class NoiseProfile:
    gyro_bias: float = 0.0  # rad/s, on the z axis
    gyro_noise_sigma: float = 0.0  # rad/s white noise, all axes
    accel_noise_sigma: float = 0.0  # g white noise, all axes
    heading_jitter_sigma: float = 0.0  # radians added per step (random walk)
    rssi_scenario: int = 3

    def __post_init__(self) -> None:
        check_nonnegative("gyro_noise_sigma", self.gyro_noise_sigma)
        check_nonnegative("accel_noise_sigma", self.accel_noise_sigma)
        check_nonnegative("heading_jitter_sigma", self.heading_jitter_sigma)
        if self.rssi_scenario not in TABLE_SCENARIOS:
            raise ValueError(f"rssi_scenario must be one of {sorted(TABLE_SCENARIOS)}")


@dataclass
class GroundTruth:
    """Per-step truth: row 0 is the initial state, one row per step after."""

    step: np.ndarray
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    area: list[str]
    waypoint: np.ndarray  # 1 where the row is a scripted waypoint

    def positions(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    @property
    def start(self) -> tuple[float, float, float, str]:
        return (float(self.x[0]), float(self.y[0]), float(self.theta[0]), self.area[0])


@dataclass(frozen=True)
class _Leg:
    start_t: float
    end_t: float  # gait runs on [start_t, end_t)
    a: Point
    b: Point
    u: Point
    n_steps: int


def synth_walk(
    indoor_map: IndoorMap,
    script: WalkScript,
    noise: NoiseProfile,
    seed: int,
    filter_cfg: FilterConfig | None = None,
    rssi_params: RssiModelParams | None = None,
    scan_hz: float = 1.0,
    gait_amplitude: float = 0.08,
    still_s: float = 2.0,
) -> tuple[SensorTrace, list[RssiScan], GroundTruth]:
    """Synthesize (sensor trace, RSSI scans, ground truth) for a script."""
    cfg = filter_cfg or FilterConfig()
    fs = cfg.sample_rate_hz
    f = script.speed_steps_per_s
    s = script.step_length
    rng = np.random.default_rng(seed)

    points = script.resolve(indoor_map)
    legs, pauses = _build_legs(indoor_map, script, points, still_s)
    truth = _ground_truth(indoor_map, legs, s)

    end_t = legs[-1].end_t + (pauses[-1] if pauses else 0.0) + 1.0
    n = int(round(end_t * fs)) + 1
    t = np.arange(n) / fs

    magnitude = np.ones(n)
    for leg in legs:
        mask = (t >= leg.start_t) & (t < leg.end_t)
        phase = 2.0 * math.pi * f * (t[mask] - leg.start_t)
        sin = np.sin(phase)
        magnitude[mask] = 1.0 + gait_amplitude * sin - 0.25 * gait_amplitude * np.minimum(sin, 0.0) ** 2

    gyro_z = np.zeros(n)
    for start, duration, dtheta in _heading_pulses(legs, f, fs, noise, rng):
        i0 = int(round(start * fs))
        n_pulse = max(1, int(round(duration * fs)))
        gyro_z[i0 : i0 + n_pulse] += dtheta * fs / n_pulse

    gyro_z += noise.gyro_bias
    if noise.gyro_noise_sigma > 0:
        gyro = np.column_stack([
            rng.normal(0.0, noise.gyro_noise_sigma, n),
            rng.normal(0.0, noise.gyro_noise_sigma, n),
            gyro_z + rng.normal(0.0, noise.gyro_noise_sigma, n),
        ])
    else:
        gyro = np.column_stack([np.zeros(n), np.zeros(n), gyro_z])

    accel = np.column_stack([np.zeros(n), np.zeros(n), magnitude])
    if noise.accel_noise_sigma > 0:
        accel = accel + rng.normal(0.0, noise.accel_noise_sigma, (n, 3))

    trace = SensorTrace(t=t, accel=accel, gyro=gyro)
    scans = _rssi_scans(indoor_map, legs, end_t, scan_hz, noise, rssi_params, rng)
    return trace, scans, truth


def _build_legs(
    indoor_map: IndoorMap, script: WalkScript, points: list[Point], still_s: float
) -> tuple[list[_Leg], list[float]]:
    s = script.step_length
    f = script.speed_steps_per_s
    pauses = list(script.pauses) if script.pauses is not None else [0.0] * len(points)
    legs: list[_Leg] = []
    cursor = still_s + pauses[0]
    for i, (a, b) in enumerate(zip(points, points[1:])):
        length = geometry.dist(a, b)
        if length <= 0:
            raise ScriptError(f"waypoints {i} and {i + 1} coincide")
        n_steps = round(length / s)
        # loose enough to absorb lat/lon round-trip rounding in node positions
        if n_steps < 1 or abs(length - n_steps * s) > 1e-6:
            raise ScriptError(
                f"leg {i}->{i + 1} has length {length} which is not a multiple of "
                f"step_length {s}"
            )
        if mapmodel.segment_crosses_wall(indoor_map, a, b) is not None:
            raise ScriptError(f"leg {i}->{i + 1} crosses a wall; waypoints are not connected")
        end = cursor + n_steps / f
        legs.append(_Leg(cursor, end, a, b, geometry.unit(geometry.sub(b, a)), n_steps))
        cursor = end + pauses[i + 1]
    return legs, pauses


def _ground_truth(indoor_map: IndoorMap, legs: list[_Leg], s: float) -> GroundTruth:
    xs = [legs[0].a[0]]
    ys = [legs[0].a[1]]
    thetas = [geometry.angle_of(legs[0].u)]
    waypoint = [1]
    for leg in legs:
        theta = geometry.angle_of(leg.u)
        for j in range(1, leg.n_steps + 1):
            if j == leg.n_steps:
                x, y = leg.b  # land exactly on the waypoint
            else:
                x, y = geometry.add(leg.a, geometry.scale(leg.u, j * s))
            xs.append(x)
            ys.append(y)
            thetas.append(theta)
            waypoint.append(1 if j == leg.n_steps else 0)
    area = [truth_area_label(indoor_map, (x, y)) for x, y in zip(xs, ys)]
    n = len(xs)
    return GroundTruth(
        step=np.arange(n),
        x=np.array(xs),
        y=np.array(ys),
        theta=np.array(thetas),
        area=area,
        waypoint=np.array(waypoint),
    )


def _heading_pulses(
    legs: list[_Leg], f: float, fs: float, noise: NoiseProfile, rng: np.random.Generator
) -> list[tuple[float, float, float]]:
    """(start, duration, total angle) pulse per step interval.

    Pulses sit in the middle portion of the interval between consecutive
    step events, safely clear of the detector's crossing times; scripted
    turns share the interval that follows a leg's final step.
    """
    pulses: list[tuple[float, float, float]] = []
    prev_dir: Point | None = None
    for leg in legs:
        turn = 0.0 if prev_dir is None else geometry.signed_angle(prev_dir, leg.u)
        prev_dir = leg.u
        for k in range(leg.n_steps):
            # interval leading up to step k+1 of this leg; a scripted turn
            # rides in the interval before the new leg's first step
            start = leg.start_t + (k + 0.05) / f
            duration = 0.4 / f
            dtheta = rng.normal(0.0, noise.heading_jitter_sigma) if noise.heading_jitter_sigma > 0 else 0.0
            if k == 0 and turn != 0.0:
                dtheta += turn
            if dtheta != 0.0:
                pulses.append((start, duration, dtheta))
    return pulses


def _rssi_scans(
    indoor_map: IndoorMap,
    legs: list[_Leg],
    end_t: float,
    scan_hz: float,
    noise: NoiseProfile,
    rssi_params: RssiModelParams | None,
    rng: np.random.Generator,
) -> list[RssiScan]:
    if not indoor_map.indicators or scan_hz <= 0:
        return []
    params = rssi_params or RssiModelParams()
    if params.scenario != noise.rssi_scenario:
        params = replace(params, scenario=noise.rssi_scenario)
    scans = []
    n_scans = int(math.floor(end_t * scan_hz)) + 1
    for i in range(n_scans):
        t = i / scan_hz
        pos, heading = _pose_at(legs, t)
        readings = {}
        for router in sorted(indoor_map.indicators):
            rp = indoor_map.indicators[router]
            d = max(geometry.dist(pos, rp), 1e-9)
            facing = "toward" if geometry.dot(heading, geometry.sub(rp, pos)) >= 0 else "away"
            readings[router] = synth_rssi(d, facing, params, rng)
        scans.append(RssiScan(t, readings))
    return scans


def _pose_at(legs: list[_Leg], t: float) -> tuple[Point, Point]:
    """True position and walking direction at an arbitrary time."""
    if t <= legs[0].start_t:
        return legs[0].a, legs[0].u
    for leg in legs:
        if t < leg.start_t:
            return leg.a, leg.u  # pausing at this leg's start
        if t < leg.end_t:
            f = leg.n_steps / (leg.end_t - leg.start_t)
            travelled = (t - leg.start_t) * f * geometry.dist(leg.a, leg.b) / leg.n_steps
            return geometry.add(leg.a, geometry.scale(leg.u, travelled)), leg.u
    return legs[-1].b, legs[-1].u


def truth_area_label(indoor_map: IndoorMap, p: Point) -> str:
    """Area label of a true position, for the truth CSV."""
    for node in sorted(indoor_map.nodes.values(), key=lambda n: n.id):
        if node.kind in (mapmodel.NodeKind.TURNING_POINT, mapmodel.NodeKind.DOOR):
            if geometry.dist(p, node.pos) <= 1e-6:
                return f"intersection:{node.id}"
    for way_id in sorted(indoor_map.corridors):
        c = indoor_map.corridors[way_id]
        if c.is_door_corridor:
            continue
        if geometry.point_segment_distance(p, c.a, c.b) <= 1e-6:
            return f"corridor:{way_id}"
    for room_id in sorted(indoor_map.rooms):
        if indoor_map.rooms[room_id].rings and indoor_map.rooms[room_id].contains(p):
            return f"open:{room_id}"
    return "none"


def write_truth(path: str | Path, truth: GroundTruth) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRUTH_COLUMNS)
        for i in range(len(truth.step)):
            writer.writerow([
                int(truth.step[i]),
                repr(float(truth.x[i])),
                repr(float(truth.y[i])),
                repr(float(truth.theta[i])),
                truth.area[i],
                int(truth.waypoint[i]),
            ])


def read_truth(path: str | Path) -> GroundTruth:
    steps: list[int] = []
    xs: list[float] = []
    ys: list[float] = []
    thetas: list[float] = []
    areas: list[str] = []
    waypoints: list[int] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRUTH_COLUMNS:
            raise ScriptError(f"{path}: not a truth CSV (header {header!r})")
        for row in reader:
            steps.append(int(row[0]))
            xs.append(float(row[1]))
            ys.append(float(row[2]))
            thetas.append(float(row[3]))
            areas.append(row[4])
            waypoints.append(int(row[5]))
    return GroundTruth(
        step=np.array(steps),
        x=np.array(xs),
        y=np.array(ys),
        theta=np.array(thetas),
        area=areas,
        waypoint=np.array(waypoints),
    )
