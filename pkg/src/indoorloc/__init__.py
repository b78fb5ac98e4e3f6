"""Map-constrained indoor localization from smartphone sensor traces.

Dead-reckoned steps and headings are fused with an indoor map (corridors,
intersections, open areas) and WiFi vicinity indicators. The package
exposes a functional pipeline (parse_osm / synth_walk / run_pipeline), an
estimator facade (AreaStateLocalizer), and the `indoorloc` CLI.
"""

from .engine import (
    FLAG_CALIBRATED,
    FLAG_COMPENSATED,
    FLAG_SNAPPED,
    CorridorArea,
    Engine,
    EngineConfig,
    IntersectionArea,
    JointState,
    Observation,
    OpenArea,
    PositionalState,
    area_label,
)
from .errors import (
    ConfigError,
    EngineInitError,
    LocalizationError,
    MapParseError,
    MapValidationError,
    ScriptError,
    TraceFormatError,
    UnknownRouterError,
)
from .estimator import AreaStateLocalizer
from .mapmodel import IndoorMap, parse_osm
from .replay import (
    VARIANTS,
    ErrorReport,
    compute_cdf,
    evaluate,
    run_batch,
    run_pipeline,
    run_replay,
)
from .signals import FilterConfig, SensorTrace, detect_steps, estimate_heading
from .synth import GroundTruth, NoiseProfile, WalkScript, synth_walk
from .traceio import read_trace, write_trace
from .wifi import IndicatorConfig, RssiModelParams, RssiScan, synth_rssi, vicinity_check

__all__ = [
    "AreaStateLocalizer",
    "ConfigError",
    "CorridorArea",
    "Engine",
    "EngineConfig",
    "EngineInitError",
    "ErrorReport",
    "FilterConfig",
    "FLAG_CALIBRATED",
    "FLAG_COMPENSATED",
    "FLAG_SNAPPED",
    "GroundTruth",
    "IndicatorConfig",
    "IndoorMap",
    "IntersectionArea",
    "JointState",
    "LocalizationError",
    "MapParseError",
    "MapValidationError",
    "NoiseProfile",
    "Observation",
    "OpenArea",
    "PositionalState",
    "RssiModelParams",
    "RssiScan",
    "ScriptError",
    "SensorTrace",
    "TraceFormatError",
    "UnknownRouterError",
    "VARIANTS",
    "WalkScript",
    "area_label",
    "compute_cdf",
    "detect_steps",
    "estimate_heading",
    "evaluate",
    "parse_osm",
    "read_trace",
    "run_batch",
    "run_pipeline",
    "run_replay",
    "synth_rssi",
    "synth_walk",
    "vicinity_check",
    "write_trace",
]

__version__ = "0.1.0"
