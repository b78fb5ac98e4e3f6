"""Replay orchestration.

Runs one of the four algorithm variants over a recorded (or synthesized)
trace, measures errors against ground truth at reference points, and
drives batch experiments over seeds. Owns all CSV serialization; outputs
are byte-identical across repeated runs with the same inputs.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import geometry, mapmodel, signals, synth, traceio, wifi
from .engine import (
    FLAG_CALIBRATED,
    AreaState,
    CorridorArea,
    Engine,
    EngineConfig,
    IntersectionArea,
    Observation,
    OpenArea,
    PositionalState,
    area_label,
)
from .errors import ConfigError, LocalizationError
from .mapmodel import IndoorMap
from .signals import FilterConfig, SensorTrace
from .synth import GroundTruth, NoiseProfile, WalkScript
from .wifi import IndicatorConfig, RssiModelParams, RssiScan

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ("step", "x", "y", "theta", "area", "flags")


@dataclass(frozen=True)
class VariantSpec:
    use_area_state: bool
    use_indicator: bool


VARIANTS: dict[str, VariantSpec] = {
    "imu": VariantSpec(False, False),
    "area": VariantSpec(True, False),
    "indicator": VariantSpec(False, True),
    "full": VariantSpec(True, True),
}


@dataclass(frozen=True)
class Row:
    """One trajectory line: joint state flattened for CSV."""

    step: int
    x: float
    y: float
    theta: float
    area: str
    flags: tuple[str, ...]


@dataclass
class ErrorReport:
    steps: list[int]  # reference step indices
    errors: np.ndarray  # meters, one per reference point
    mean: float
    cdf: list[tuple[float, float]]


def compute_cdf(errors) -> list[tuple[float, float]]:
    """Empirical CDF as (value, cumulative fraction) at each distinct value."""
    x = np.asarray(errors, dtype=float)
    if x.size == 0:
        raise ValueError("compute_cdf needs at least one error value")
    values, counts = np.unique(x, return_counts=True)
    cumulative = np.cumsum(counts) / x.size
    return [(float(v), float(c)) for v, c in zip(values, cumulative)]


# ------------------------------------------------------------------ pipeline


def run_pipeline(
    indoor_map: IndoorMap,
    trace: SensorTrace,
    scans: list[RssiScan],
    start: PositionalState,
    start_area: AreaState | None,
    variant: VariantSpec,
    engine_cfg: EngineConfig | None = None,
    indicator_cfg: IndicatorConfig | None = None,
    filter_cfg: FilterConfig | None = None,
    step_delta: float = 0.05,
    step_t_min: float = 0.3,
) -> tuple[list[Row], dict]:
    """Replay a trace under one variant; returns trajectory rows + diagnostics.

    The signal pipeline is shared by all variants: steps from the raw
    acceleration magnitude, headings from bias-removed gyro integration.
    """
    engine_cfg = engine_cfg or EngineConfig()
    indicator_cfg = indicator_cfg or IndicatorConfig()
    filter_cfg = filter_cfg or FilterConfig()

    steps = signals.detect_steps(trace, filter_cfg, delta=step_delta, t_min_s=step_t_min)
    debiased_gyro, _ = signals.remove_bias(trace.gyro, filter_cfg.bias_window)
    heading_trace = SensorTrace(t=trace.t, accel=trace.accel, gyro=debiased_gyro)
    headings = signals.estimate_heading(heading_trace, start.theta, steps)
    observations = [
        Observation.of(h.k, h.h_o, engine_cfg.step_length) for h in headings
    ]

    unknown = {
        router
        for scan in scans
        for router in scan.readings
        if router not in indoor_map.indicators
    }
    for router in sorted(unknown):
        logger.warning("trace reports router %r not on the map; indicator disabled", router)

    if variant.use_area_state:
        rows, diagnostics = _replay_engine(
            indoor_map, observations, steps, scans, start, start_area,
            variant.use_indicator, engine_cfg, indicator_cfg,
        )
    else:
        rows = _replay_dead_reckoning(
            indoor_map, observations, steps, scans, start,
            variant.use_indicator, indicator_cfg,
        )
        diagnostics = {}
    diagnostics["n_steps"] = len(steps)
    diagnostics["unknown_routers"] = sorted(unknown)
    return rows, diagnostics


def _replay_engine(
    indoor_map, observations, steps, scans, start, start_area,
    use_indicator, engine_cfg, indicator_cfg,
):
    if start_area is None:
        raise ConfigError("area-state variants need an initial area state")
    engine = Engine(indoor_map, start, start_area, engine_cfg)
    window = deque(maxlen=indicator_cfg.m_of_w[1])
    scan_queue = deque(sorted(scans, key=lambda s: s.t))
    active: str | None = None  # router currently in vicinity, for edge triggering

    def drain_scans(up_to: float) -> None:
        nonlocal active
        while scan_queue and scan_queue[0].t <= up_to:
            window.append(scan_queue.popleft())
            router = wifi.vicinity_check(window, indicator_cfg, indoor_map)
            # M-of-W keeps firing for W-M scans after leaving the radius;
            # calibrating on the rising edge only avoids being dragged back
            fire = router is not None and router != active
            active = router
            if fire and use_indicator:
                engine.apply_calibration(indoor_map.indicators[router])

    for obs, step in zip(observations, steps):
        drain_scans(step.t)
        engine.step(obs)
    if steps:
        drain_scans(math.inf)

    rows = [
        Row(
            st.k,
            st.positional.x,
            st.positional.y,
            st.positional.theta,
            area_label(st.area),
            tuple(sorted(st.flags)),
        )
        for st in engine.history
    ]
    return rows, dict(engine.diagnostics)


def _replay_dead_reckoning(
    indoor_map, observations, steps, scans, start, use_indicator, indicator_cfg
):
    rows = [Row(0, start.x, start.y, start.theta, "", ())]
    window = deque(maxlen=indicator_cfg.m_of_w[1])
    scan_queue = deque(sorted(scans, key=lambda s: s.t))
    x, y = start.x, start.y
    active: str | None = None

    def drain_scans(up_to: float) -> None:
        nonlocal x, y, active
        while scan_queue and scan_queue[0].t <= up_to:
            window.append(scan_queue.popleft())
            router = wifi.vicinity_check(window, indicator_cfg, indoor_map)
            fire = router is not None and router != active
            active = router
            if not (fire and use_indicator):
                continue
            x, y = indoor_map.indicators[router]
            last = rows[-1]
            flags = tuple(sorted(set(last.flags) | {FLAG_CALIBRATED}))
            rows[-1] = Row(last.step, x, y, last.theta, last.area, flags)

    for obs, step in zip(observations, steps):
        drain_scans(step.t)
        x += obs.displacement[0]
        y += obs.displacement[1]
        rows.append(Row(obs.k, x, y, obs.theta, "", ()))
    if steps:
        drain_scans(math.inf)
    return rows


# ------------------------------------------------------------------- scoring


def evaluate(rows: list[Row], truth: GroundTruth, reference: str = "waypoints") -> ErrorReport:
    """Errors at reference points: scripted waypoints or every step."""
    if reference not in ("waypoints", "steps"):
        raise ConfigError(f"reference must be 'waypoints' or 'steps', got {reference!r}")
    by_step = {row.step: row for row in rows}
    steps: list[int] = []
    errors: list[float] = []
    for i in range(len(truth.step)):
        k = int(truth.step[i])
        if k == 0:
            continue  # the shared start would dilute the metric
        if reference == "waypoints" and not truth.waypoint[i]:
            continue
        row = by_step.get(k)
        if row is None:
            continue  # step not detected; evaluated over the common range
        steps.append(k)
        errors.append(math.hypot(row.x - truth.x[i], row.y - truth.y[i]))
    if not errors:
        raise ValueError("no reference points in common between estimate and truth")
    arr = np.asarray(errors)
    return ErrorReport(steps=steps, errors=arr, mean=float(arr.mean()), cdf=compute_cdf(arr))


# ------------------------------------------------------------- file plumbing


def write_trajectory(path: str | Path, rows: list[Row]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAJECTORY_COLUMNS)
        for row in rows:
            writer.writerow([
                row.step,
                repr(float(row.x)),
                repr(float(row.y)),
                repr(float(row.theta)),
                row.area,
                ";".join(row.flags),
            ])


def write_report(path: str | Path, report: ErrorReport) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("step", "error_m"))
        for step, err in zip(report.steps, report.errors):
            writer.writerow([step, repr(float(err))])
        writer.writerow(("mean", repr(report.mean)))


def write_cdf(path: str | Path, report: ErrorReport) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("error_m", "cum_fraction"))
        for value, fraction in report.cdf:
            writer.writerow([repr(value), repr(fraction)])


def resolve_start(
    indoor_map: IndoorMap, x: float, y: float, theta: float, label: str
) -> tuple[PositionalState, AreaState]:
    """Initial joint state from a position, heading and area label."""
    start = PositionalState.from_theta(x, y, theta)
    kind, _, ident = label.partition(":")
    if kind == "corridor":
        way_id = int(ident)
        c = indoor_map.corridors.get(way_id)
        if c is None:
            raise ConfigError(f"start area names unknown corridor {way_id}")
        direction = "fwd" if geometry.dot(start.h, c.bearing_fwd) >= 0.0 else "rev"
        return start, CorridorArea(way_id, direction)
    if kind == "intersection":
        return start, IntersectionArea(int(ident))
    if kind == "open":
        return start, OpenArea(int(ident))
    raise ConfigError(f"cannot start from area label {label!r}")


def run_replay(
    map_path: str | Path,
    trace_path: str | Path,
    variant_name: str,
    config: dict,
    out_dir: str | Path,
    truth_path: str | Path | None = None,
) -> ErrorReport | None:
    """File-level replay: read inputs, run one variant, write CSVs."""
    if variant_name not in VARIANTS:
        raise ConfigError(f"variant must be one of {sorted(VARIANTS)}, got {variant_name!r}")
    variant = VARIANTS[variant_name]
    indoor_map = _parse_map_file(map_path)
    trace, scans = traceio.read_trace(trace_path)
    truth = synth.read_truth(truth_path) if truth_path is not None else None

    x, y, theta, label = _start_tuple(config, truth)
    start, start_area = resolve_start(indoor_map, x, y, theta, label)

    rows, _ = run_pipeline(
        indoor_map, trace, scans, start,
        start_area if variant.use_area_state else None,
        variant,
        engine_cfg=engine_config_from(config.get("engine", {})),
        indicator_cfg=indicator_config_from(config.get("indicator", {})),
        filter_cfg=filter_config_from(config.get("filter", {})),
        step_delta=float(config.get("step_delta", 0.05)),
        step_t_min=float(config.get("step_t_min", 0.3)),
    )

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trajectory(out_dir / f"trajectory_{variant_name}.csv", rows)
    if truth is None:
        return None
    report = evaluate(rows, truth, reference=config.get("reference", "waypoints"))
    write_report(out_dir / f"report_{variant_name}.csv", report)
    write_cdf(out_dir / f"cdf_{variant_name}.csv", report)
    return report


def _start_tuple(config: dict, truth: GroundTruth | None) -> tuple[float, float, float, str]:
    if "start" in config:
        s = config["start"]
        try:
            return (float(s["x"]), float(s["y"]), float(s["theta"]), str(s["area"]))
        except KeyError as exc:
            raise ConfigError(f"config start is missing key {exc}") from None
    if truth is not None:
        return truth.start
    raise ConfigError("no initial state: provide a truth CSV or a config 'start' entry")


# --------------------------------------------------------------------- batch


def run_batch(
    map_path: str | Path,
    config: dict,
    out_dir: str | Path,
    base_seed: int = 0,
) -> Path:
    """Replay a grid of (script, noise, seed, variant) and summarize errors.

    Single-run failures are recorded in their row; the batch continues.
    """
    indoor_map = _parse_map_file(map_path)
    scripts = config.get("scripts")
    if scripts is None:
        scripts = [config["script"]] if "script" in config else None
    if not scripts:
        raise ConfigError("batch config needs 'script' or 'scripts'")
    noise_grid = config.get("noise_grid")
    if noise_grid is None:
        noise_grid = [config.get("noise", {})]
    seeds = config.get("seeds")
    if seeds is None:
        seeds = [base_seed + i for i in range(int(config.get("n_seeds", 10)))]
    if not seeds:
        raise ConfigError("no seeds")
    variant_names = config.get("variants", sorted(VARIANTS))
    for name in variant_names:
        if name not in VARIANTS:
            raise ConfigError(f"unknown variant {name!r} in batch config")
    reference = config.get("reference", "waypoints")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = out_dir / "summary.csv"
    with open(summary, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ("script", "noise", "seed", "variant", "n_ref", "mean_m", "median_m", "p95_m", "status")
        )
        for si, script_cfg in enumerate(scripts):
            for ni, noise_cfg in enumerate(noise_grid):
                for seed in seeds:
                    for name in variant_names:
                        row = _batch_cell(
                            indoor_map, config, script_cfg, noise_cfg,
                            int(seed), name, si, ni, reference,
                        )
                        writer.writerow(row)
    return summary


def _batch_cell(indoor_map, config, script_cfg, noise_cfg, seed, variant_name, si, ni, reference):
    try:
        script = script_from(script_cfg)
        noise = noise_profile_from(noise_cfg)
        filter_cfg = filter_config_from(config.get("filter", {}))
        trace, scans, truth = synth.synth_walk(
            indoor_map, script, noise, seed,
            filter_cfg=filter_cfg,
            rssi_params=rssi_params_from(config.get("rssi_model", {})),
            scan_hz=float(config.get("scan_hz", 1.0)),
            gait_amplitude=float(config.get("gait_amplitude", 0.08)),
            still_s=float(config.get("still_s", 2.0)),
        )
        x, y, theta, label = truth.start
        start, start_area = resolve_start(indoor_map, x, y, theta, label)
        variant = VARIANTS[variant_name]
        rows, _ = run_pipeline(
            indoor_map, trace, scans, start,
            start_area if variant.use_area_state else None,
            variant,
            engine_cfg=engine_config_from(config.get("engine", {})),
            indicator_cfg=indicator_config_from(config.get("indicator", {})),
            filter_cfg=filter_cfg,
            step_delta=float(config.get("step_delta", 0.05)),
            step_t_min=float(config.get("step_t_min", 0.3)),
        )
        report = evaluate(rows, truth, reference=reference)
        return (
            si, ni, seed, variant_name,
            len(report.errors),
            repr(report.mean),
            repr(float(np.median(report.errors))),
            repr(float(np.percentile(report.errors, 95))),
            "ok",
        )
    except (LocalizationError, ValueError, OSError) as exc:
        return (si, ni, seed, variant_name, 0, "", "", "", f"error: {exc}")


# ------------------------------------------------------------ config loading


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        try:
            config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(config, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return config


def _from_fields(cls, values: dict, what: str):
    allowed = set(cls.__dataclass_fields__)
    unknown = set(values) - allowed
    if unknown:
        raise ConfigError(f"unknown {what} config keys: {sorted(unknown)}")
    return cls(**values)


def engine_config_from(values: dict) -> EngineConfig:
    return _from_fields(EngineConfig, values, "engine")


def indicator_config_from(values: dict) -> IndicatorConfig:
    values = dict(values)
    if "m_of_w" in values:
        values["m_of_w"] = tuple(values["m_of_w"])
    return _from_fields(IndicatorConfig, values, "indicator")


def filter_config_from(values: dict) -> FilterConfig:
    return _from_fields(FilterConfig, values, "filter")


def noise_profile_from(values: dict) -> NoiseProfile:
    return _from_fields(NoiseProfile, values, "noise")


def rssi_params_from(values: dict) -> RssiModelParams | None:
    if not values:
        return None
    return _from_fields(RssiModelParams, values, "rssi_model")


def script_from(values: dict) -> WalkScript:
    values = dict(values)
    if "waypoints" in values:
        values["waypoints"] = tuple(
            wp if isinstance(wp, str) else (float(wp[0]), float(wp[1]))
            for wp in values["waypoints"]
        )
    if values.get("pauses") is not None:
        values["pauses"] = tuple(float(p) for p in values["pauses"])
    return _from_fields(WalkScript, values, "script")


def _parse_map_file(path: str | Path) -> IndoorMap:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise LocalizationError(f"cannot read map {path}: {exc}") from None
    return mapmodel.parse_osm(text)
