"""Slot-level simulator of beamforming-based spectrum sharing between a
multi-antenna secondary network and a carrier-sensing primary network."""

from .beamforming import (PrecodingMatrix, Scheme, expected_sinr_mrt,
                          expected_sinr_zf, mrt_precoder, omni_precoder,
                          select_scheme, zf_precoder)
from .channel import NodePosition, PathLossModel, ScenarioGeometry
from .config import ScenarioConfig, dump_config, parse_config
from .errors import BeamshareError, ConfigError, SimulationError
from .experiments import report, run_sweep
from .sim import RunMetrics, jain_index, run_scenario

__version__ = "0.1.0"

__all__ = [
    "BeamshareError", "ConfigError", "NodePosition", "PathLossModel",
    "PrecodingMatrix", "RunMetrics", "ScenarioConfig", "ScenarioGeometry",
    "Scheme", "SimulationError", "dump_config", "expected_sinr_mrt",
    "expected_sinr_zf", "jain_index", "mrt_precoder", "omni_precoder",
    "parse_config", "report", "run_scenario", "run_sweep", "select_scheme",
    "zf_precoder",
]
