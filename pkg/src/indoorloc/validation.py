"""Input validation helpers used across configs and public entry points."""

from __future__ import annotations

import math
from typing import Sequence

from .errors import ConfigError


def check_positive(name: str, value: float) -> float:
    if not math.isfinite(value) or value <= 0:
        raise ConfigError(f"{name} must be positive and finite, got {value!r}")
    return value


def check_nonnegative(name: str, value: float) -> float:
    if not math.isfinite(value) or value < 0:
        raise ConfigError(f"{name} must be >= 0 and finite, got {value!r}")
    return value


def check_int_at_least(name: str, value: int, minimum: int) -> int:
    if int(value) != value or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_in_range(name: str, value: float, lo: float, hi: float) -> float:
    if not (lo <= value <= hi):
        raise ConfigError(f"{name} must be in [{lo}, {hi}], got {value!r}")
    return value


def check_unit_vector(name: str, v: Sequence[float], tol: float = 1e-9) -> tuple[float, float]:
    x, y = float(v[0]), float(v[1])
    n = math.hypot(x, y)
    if abs(n - 1.0) > tol:
        raise ConfigError(f"{name} must be a unit 2-vector, got norm {n!r}")
    return (x, y)


def check_finite_point(name: str, p: Sequence[float]) -> tuple[float, float]:
    x, y = float(p[0]), float(p[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ConfigError(f"{name} must be finite, got ({x!r}, {y!r})")
    return (x, y)
