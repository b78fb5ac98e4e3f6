"""WiFi routers as vicinity indicators, plus the synthetic RSSI model.

A router whose RSSI exceeds phi in M of the last W scans marks the phone
as within rho of it; the position estimate is then calibrated to the
router's mapped location. No distance is ever estimated from RSSI.

The synthetic generator follows a two-slope propagation curve: steep
decay out to the breakpoint rho, near-flat beyond it, a constant body
shadowing loss when the user faces away, and Gaussian noise with the
per-scenario variances of the propagation study.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, UnknownRouterError
from .mapmodel import IndoorMap

# scenario id -> (mean dBm, variance dBm^2) measured at a fixed range:
# 1 = LOS quiet, 2 = LOS busy, 3 = body toward router, 4 = body away
TABLE_SCENARIOS: dict[int, tuple[float, float]] = {
    1: (-59.05, 0.46),
    2: (-59.22, 1.95),
    3: (-57.83, 4.22),
    4: (-65.71, 9.45),
}

# near-field anchor: mean at 1.5 m is 35% lower (more negative) than at 0.3 m
_P_NEAR_DBM = -29.0
_D_NEAR_M = 0.3
_DEFAULT_SLOPE1 = 0.35 * abs(_P_NEAR_DBM) / math.log10(1.5 / _D_NEAR_M)
# body shadowing: toward-minus-away gap between scenarios 3 and 4
_DEFAULT_AWAY_OFFSET = TABLE_SCENARIOS[3][0] - TABLE_SCENARIOS[4][0]

RSSI_FLOOR_DBM = -100.0
RSSI_CEIL_DBM = 0.0


@dataclass(frozen=True)
class RssiScan:
    t: float
    readings: dict[str, float]

    def __post_init__(self) -> None:
        for router, dbm in self.readings.items():
            if not (RSSI_FLOOR_DBM <= dbm <= RSSI_CEIL_DBM):
                raise ValueError(
                    f"RSSI for {router!r} must be in [{RSSI_FLOOR_DBM}, {RSSI_CEIL_DBM}] dBm, "
                    f"got {dbm!r}"
                )


@dataclass(frozen=True)
class IndicatorConfig:
    phi: float = -40.0  # dBm threshold
    rho: float = 2.0  # meters, vicinity radius the threshold stands for
    m_of_w: tuple[int, int] = (3, 5)  # M required hits out of W scans

    def __post_init__(self) -> None:
        m, w = self.m_of_w
        if w < 1 or m < 1 or m > w:
            raise ConfigError(f"m_of_w must satisfy 1 <= M <= W, got {self.m_of_w!r}")
        if not self.phi < 0:
            raise ConfigError(f"phi must be negative dBm, got {self.phi!r}")
        if not self.rho > 0:
            raise ConfigError(f"rho must be positive, got {self.rho!r}")


@dataclass(frozen=True)
class RssiStats:
    mean: float
    variance: float
    count: int


@dataclass(frozen=True)
class RssiModelParams:
    """Two-slope propagation curve parameters; all tunable, none hard-coded."""

    p_near_dbm: float = _P_NEAR_DBM  # mean at d_near_m, facing toward
    d_near_m: float = _D_NEAR_M
    breakpoint_m: float = 2.0
    slope1_db_per_decade: float = _DEFAULT_SLOPE1
    slope2_db_per_decade: float = 5.0
    away_offset_db: float = _DEFAULT_AWAY_OFFSET
    scenario: int = 3

    def __post_init__(self) -> None:
        if self.scenario not in TABLE_SCENARIOS:
            raise ConfigError(f"scenario must be one of {sorted(TABLE_SCENARIOS)}, got {self.scenario!r}")
        if self.d_near_m <= 0 or self.breakpoint_m <= self.d_near_m:
            raise ConfigError("need 0 < d_near_m < breakpoint_m")


def mean_rssi(distance: float, facing: str, params: RssiModelParams) -> float:
    """Noiseless two-slope mean at the given distance, in dBm."""
    if distance <= 0:
        raise ValueError(f"distance must be positive, got {distance!r}")
    d = max(distance, params.d_near_m)  # curve saturates inside the near anchor
    if d <= params.breakpoint_m:
        level = params.p_near_dbm - params.slope1_db_per_decade * math.log10(d / params.d_near_m)
    else:
        at_break = params.p_near_dbm - params.slope1_db_per_decade * math.log10(
            params.breakpoint_m / params.d_near_m
        )
        level = at_break - params.slope2_db_per_decade * math.log10(d / params.breakpoint_m)
    if facing == "away":
        level -= params.away_offset_db
    elif facing != "toward":
        raise ValueError(f"facing must be 'toward' or 'away', got {facing!r}")
    return level


def synth_rssi(
    distance: float,
    facing: str,
    params: RssiModelParams,
    rng: np.random.Generator | None = None,
) -> float:
    """One synthetic RSSI sample; rng None means noiseless."""
    level = mean_rssi(distance, facing, params)
    if rng is not None:
        _, variance = TABLE_SCENARIOS[params.scenario]
        level += rng.normal(0.0, math.sqrt(variance))
    return min(RSSI_CEIL_DBM, max(RSSI_FLOOR_DBM, level))


def sample_scenario(scenario: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """n RSSI draws from the given scenario's Gaussian, clipped to legal dBm."""
    mean, variance = TABLE_SCENARIOS[scenario]
    return np.clip(rng.normal(mean, math.sqrt(variance), n), RSSI_FLOOR_DBM, RSSI_CEIL_DBM)


def rssi_stats(samples: Sequence[float]) -> RssiStats:
    """Arithmetic mean and population variance of a sample set."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("rssi_stats needs at least one sample")
    return RssiStats(mean=float(x.mean()), variance=float(x.var()), count=int(x.size))


def vicinity_check(
    history: Sequence[RssiScan],
    cfg: IndicatorConfig,
    indoor_map: IndoorMap,
) -> str | None:
    """Router the phone is near, judged over the last W scans.

    A router qualifies when its reading exceeds phi in at least M of the
    last W scans; among qualifiers the one with the highest window mean
    wins, ties going to the lexicographically smallest id.
    """
    m_required, window = cfg.m_of_w
    recent = list(history)[-window:]
    if not recent:
        return None
    best: tuple[float, str] | None = None
    for router in sorted(indoor_map.indicators):
        readings = [scan.readings[router] for scan in recent if router in scan.readings]
        hits = sum(1 for dbm in readings if dbm > cfg.phi)
        if hits < m_required:
            continue
        mean = sum(readings) / len(readings)
        if best is None or (-mean, router) < best:
            best = (-mean, router)
    return best[1] if best is not None else None


def router_position(indoor_map: IndoorMap, router: str) -> tuple[float, float]:
    """Mapped location of an indicator router; unknown ids are an error."""
    try:
        return indoor_map.indicators[router]
    except KeyError:
        raise UnknownRouterError(f"router {router!r} is not an indicator on the map") from None


def calibrate(state, router: str, indoor_map: IndoorMap):
    """Positional state snapped to the router's location, heading kept.

    Idempotent; the caller is responsible for setting the calibration flag
    on the surrounding joint state.
    """
    from .engine import PositionalState

    x, y = router_position(indoor_map, router)
    return PositionalState(x, y, state.h, state.theta)
