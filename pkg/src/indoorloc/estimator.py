"""Estimator facade over the replay pipeline.

AreaStateLocalizer follows the fit/predict convention: fit() binds a map,
predict() replays a trace from a known start and returns the positions.
Everything it does is also reachable through the functional API; this
class exists for pipeline-style composition and grid search over the
engine parameters.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import replay
from .engine import EngineConfig
from .errors import ConfigError
from .mapmodel import IndoorMap, parse_osm
from .signals import FilterConfig, SensorTrace
from .wifi import IndicatorConfig, RssiScan


class AreaStateLocalizer(BaseEstimator):
    """Indoor localizer constrained by map area states.

    Parameters mirror the engine, indicator and filter configurations;
    angles are radians. `variant` picks the fused subsystems: "imu"
    (dead reckoning only), "area" (map constraints), "indicator" (WiFi
    calibration), or "full" (both).
    """

    def __init__(
        self,
        variant: str = "full",
        step_length: float = 0.7,
        eta_str: float = np.radians(30.0),
        turn_snap_radius: float = 3.0,
        k_win: int = 5,
        sigma_h: float = np.radians(15.0),
        phi: float = -40.0,
        rho: float = 2.0,
        m_of_w: tuple[int, int] = (3, 5),
        filter_order: int = 2,
        cutoff_hz: float = 3.0,
        sample_rate_hz: float = 50.0,
        bias_window: int = 100,
        step_delta: float = 0.05,
        step_t_min: float = 0.3,
    ):
        self.variant = variant
        self.step_length = step_length
        self.eta_str = eta_str
        self.turn_snap_radius = turn_snap_radius
        self.k_win = k_win
        self.sigma_h = sigma_h
        self.phi = phi
        self.rho = rho
        self.m_of_w = m_of_w
        self.filter_order = filter_order
        self.cutoff_hz = cutoff_hz
        self.sample_rate_hz = sample_rate_hz
        self.bias_window = bias_window
        self.step_delta = step_delta
        self.step_t_min = step_t_min

    # ------------------------------------------------------------------ api

    def fit(self, map_source: IndoorMap | str, y=None) -> "AreaStateLocalizer":
        """Bind the indoor map (an IndoorMap or OSM XML text)."""
        if self.variant not in replay.VARIANTS:
            raise ConfigError(
                f"variant must be one of {sorted(replay.VARIANTS)}, got {self.variant!r}"
            )
        self.map_ = map_source if isinstance(map_source, IndoorMap) else parse_osm(map_source)
        return self

    def predict(
        self,
        trace: SensorTrace,
        start: tuple[float, float, float, str],
        scans: list[RssiScan] | None = None,
    ) -> np.ndarray:
        """Positions per step, shape (n_steps + 1, 2); row 0 is the start.

        `start` is (x, y, theta, area_label). Also sets `trajectory_`
        (the full rows) and `diagnostics_`.
        """
        self._check_fitted()
        x, y, theta, label = start
        positional, area = replay.resolve_start(self.map_, float(x), float(y), float(theta), label)
        spec = replay.VARIANTS[self.variant]
        rows, diagnostics = replay.run_pipeline(
            self.map_,
            trace,
            scans or [],
            positional,
            area if spec.use_area_state else None,
            spec,
            engine_cfg=EngineConfig(
                step_length=self.step_length,
                eta_str=self.eta_str,
                turn_snap_radius=self.turn_snap_radius,
                k_win=self.k_win,
                sigma_h=self.sigma_h,
            ),
            indicator_cfg=IndicatorConfig(
                phi=self.phi, rho=self.rho, m_of_w=tuple(self.m_of_w)
            ),
            filter_cfg=FilterConfig(
                order=self.filter_order,
                cutoff_hz=self.cutoff_hz,
                sample_rate_hz=self.sample_rate_hz,
                bias_window=self.bias_window,
            ),
            step_delta=self.step_delta,
            step_t_min=self.step_t_min,
        )
        self.trajectory_ = rows
        self.diagnostics_ = diagnostics
        return np.array([[row.x, row.y] for row in rows], dtype=float)

    def score(
        self,
        trace: SensorTrace,
        truth,
        start=None,
        scans: list[RssiScan] | None = None,
        reference: str = "waypoints",
    ) -> float:
        """Negative mean reference-point error (higher is better)."""
        self.predict(trace, start if start is not None else truth.start, scans)
        report = replay.evaluate(self.trajectory_, truth, reference=reference)
        return -report.mean

    def _check_fitted(self) -> None:
        if not hasattr(self, "map_"):
            raise ConfigError("localizer is not fitted; call fit(map) first")
