"""Shared JSONL trace format.

One JSON object per line, interleaved by time:

    {"t": 0.02, "ax": 0.0, "ay": 0.0, "az": 1.0, "gx": 0.0, "gy": 0.0, "gz": 0.0}
    {"t": 1.0, "rssi": {"ap-7": -38.5}}

Accelerometer in g, gyro in rad/s, RSSI in dBm.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import TraceFormatError
from .signals import SensorTrace
from .wifi import RssiScan

_SENSOR_KEYS = ("ax", "ay", "az", "gx", "gy", "gz")


def read_trace(path: str | Path) -> tuple[SensorTrace, list[RssiScan]]:
    """Parse a JSONL trace into sensor columns and RSSI scans."""
    times: list[float] = []
    accel: list[tuple[float, float, float]] = []
    gyro: list[tuple[float, float, float]] = []
    scans: list[RssiScan] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceFormatError(f"{path}:{lineno}: not valid JSON: {exc}") from None
            if not isinstance(obj, dict) or "t" not in obj:
                raise TraceFormatError(f"{path}:{lineno}: trace line needs a 't' field")
            t = _number(obj["t"], path, lineno, "t")
            if "rssi" in obj:
                readings = obj["rssi"]
                if not isinstance(readings, dict):
                    raise TraceFormatError(f"{path}:{lineno}: 'rssi' must be an object")
                try:
                    scans.append(
                        RssiScan(t, {str(k): _number(v, path, lineno, k) for k, v in readings.items()})
                    )
                except ValueError as exc:
                    raise TraceFormatError(f"{path}:{lineno}: {exc}") from None
            else:
                missing = [k for k in _SENSOR_KEYS if k not in obj]
                if missing:
                    raise TraceFormatError(f"{path}:{lineno}: sensor line missing {missing}")
                vals = [_number(obj[k], path, lineno, k) for k in _SENSOR_KEYS]
                times.append(t)
                accel.append((vals[0], vals[1], vals[2]))
                gyro.append((vals[3], vals[4], vals[5]))
    try:
        trace = SensorTrace(
            t=np.array(times, dtype=float),
            accel=np.array(accel, dtype=float).reshape(-1, 3),
            gyro=np.array(gyro, dtype=float).reshape(-1, 3),
        )
    except ValueError as exc:
        raise TraceFormatError(f"{path}: {exc}") from None
    return trace, scans


def write_trace(path: str | Path, trace: SensorTrace, scans: list[RssiScan]) -> None:
    """Write sensor and scan lines merged by time (sensor first on ties)."""
    events: list[tuple[float, int, str]] = []
    for i in range(len(trace)):
        obj = {
            "t": float(trace.t[i]),
            "ax": float(trace.accel[i, 0]),
            "ay": float(trace.accel[i, 1]),
            "az": float(trace.accel[i, 2]),
            "gx": float(trace.gyro[i, 0]),
            "gy": float(trace.gyro[i, 1]),
            "gz": float(trace.gyro[i, 2]),
        }
        events.append((obj["t"], 0, json.dumps(obj, separators=(",", ":"))))
    for scan in scans:
        obj = {"t": float(scan.t), "rssi": {k: float(v) for k, v in sorted(scan.readings.items())}}
        events.append((obj["t"], 1, json.dumps(obj, separators=(",", ":"))))
    events.sort(key=lambda e: (e[0], e[1]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for _, _, line in events:
            fh.write(line + "\n")


def _number(value, path, lineno: int, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TraceFormatError(f"{path}:{lineno}: field {key!r} must be a number, got {value!r}")
    return float(value)
