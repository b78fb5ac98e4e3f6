"""IMU signal pipeline.

Raw accelerometer/gyroscope streams in, step events and per-step heading
observations out: Butterworth smoothing, stationary-window bias removal,
step detection from the sharp drop of the acceleration magnitude, and
heading by trapezoidal integration of the z gyro.

Units: time in seconds, acceleration in g, angular rate in rad/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, signal

from .errors import ConfigError
from .validation import check_int_at_least, check_positive


@dataclass(frozen=True)
class SensorSample:
    t: float
    accel: tuple[float, float, float]
    gyro: tuple[float, float, float]


@dataclass(frozen=True)
class StepEvent:
    t: float
    index: int  # 1-based, consecutive


@dataclass(frozen=True)
class HeadingObservation:
    k: int
    h_o: tuple[float, float]
    theta: float


@dataclass(frozen=True)
class FilterConfig:
    order: int = 2
    cutoff_hz: float = 3.0
    sample_rate_hz: float = 50.0
    bias_window: int = 100  # samples; 2 s at the default rate

    def __post_init__(self) -> None:
        check_int_at_least("order", self.order, 1)
        check_positive("cutoff_hz", self.cutoff_hz)
        check_positive("sample_rate_hz", self.sample_rate_hz)
        check_int_at_least("bias_window", self.bias_window, 1)
        if self.cutoff_hz >= self.sample_rate_hz / 2.0:
            raise ConfigError(
                f"cutoff_hz {self.cutoff_hz} must be below the Nyquist rate "
                f"{self.sample_rate_hz / 2.0}"
            )


@dataclass
class SensorTrace:
    """Column view of an IMU trace: t (N,), accel (N, 3), gyro (N, 3)."""

    t: np.ndarray
    accel: np.ndarray
    gyro: np.ndarray

    def __post_init__(self) -> None:
        self.t = np.asarray(self.t, dtype=float)
        self.accel = np.asarray(self.accel, dtype=float).reshape(len(self.t), 3)
        self.gyro = np.asarray(self.gyro, dtype=float).reshape(len(self.t), 3)
        if len(self.t) and not np.all(np.diff(self.t) > 0):
            raise ValueError("sample times must be strictly increasing")
        if not (np.isfinite(self.accel).all() and np.isfinite(self.gyro).all()):
            raise ValueError("sensor values must be finite")

    def __len__(self) -> int:
        return len(self.t)

    @classmethod
    def from_samples(cls, samples: list[SensorSample]) -> "SensorTrace":
        return cls(
            t=np.array([s.t for s in samples], dtype=float),
            accel=np.array([s.accel for s in samples], dtype=float).reshape(-1, 3),
            gyro=np.array([s.gyro for s in samples], dtype=float).reshape(-1, 3),
        )


def lowpass(samples: np.ndarray, cfg: FilterConfig) -> np.ndarray:
    """Causal IIR Butterworth low-pass filter, run from zero initial state."""
    x = np.asarray(samples, dtype=float)
    if x.size < 1:
        raise ValueError("lowpass needs at least one sample")
    b, a = signal.butter(cfg.order, cfg.cutoff_hz, btype="low", fs=cfg.sample_rate_hz)
    return signal.lfilter(b, a, x)


def remove_bias(samples: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Subtract the mean of the first `window` samples (stationary start)."""
    x = np.asarray(samples, dtype=float)
    window = check_int_at_least("window", window, 1)
    if len(x) < window:
        raise ValueError(f"need at least {window} samples to estimate bias, got {len(x)}")
    bias = x[:window].mean(axis=0)
    return x - bias, bias


def detect_steps(
    trace: SensorTrace,
    cfg: FilterConfig,
    delta: float = 0.05,
    t_min_s: float = 0.3,
) -> list[StepEvent]:
    """Steps from the filtered acceleration magnitude.

    A step fires when the magnitude drops below (1 - delta) g after having
    exceeded (1 + delta) g in the same gait cycle, with a refractory gap of
    t_min_s between events.
    """
    if len(trace) == 0:
        return []
    magnitude = np.linalg.norm(trace.accel, axis=1)
    filtered = lowpass(magnitude, cfg)
    events: list[StepEvent] = []
    armed = False
    last_t = -math.inf
    for t, m in zip(trace.t, filtered):
        if not armed:
            if m > 1.0 + delta:
                armed = True
        elif m < 1.0 - delta:
            armed = False
            if t - last_t >= t_min_s:
                events.append(StepEvent(t=float(t), index=len(events) + 1))
                last_t = t
    return events


def integrate_heading(trace: SensorTrace, initial_theta: float) -> np.ndarray:
    """Unwrapped heading angle at every sample time (trapezoidal integral)."""
    if len(trace) == 0:
        return np.empty(0)
    gyro_z = trace.gyro[:, 2]
    return initial_theta + integrate.cumulative_trapezoid(gyro_z, trace.t, initial=0.0)


def estimate_heading(
    trace: SensorTrace,
    initial_theta: float,
    steps: list[StepEvent],
) -> list[HeadingObservation]:
    """One heading observation per step, sampled at the step event time.

    Gyro bias is assumed already removed. The integral is piecewise linear
    between samples, so interpolation at event times is exact.
    """
    theta_t = integrate_heading(trace, initial_theta)
    if len(trace) == 0 or not steps:
        return []
    thetas = np.interp([s.t for s in steps], trace.t, theta_t)
    observations = []
    for step, theta in zip(steps, thetas):
        theta = float(theta)
        observations.append(
            HeadingObservation(k=step.index, h_o=(math.cos(theta), math.sin(theta)), theta=theta)
        )
    return observations
