"""Monte-Carlo simulation of the WAK and SD-BC achievability schemes."""

from .bc import SPLIT_NAMES, bc_joint, bc_plan, deterministic_output_aux, simulate_bc
from .common import SimConfig, SimConfigError, TrialReport, reports_to_csv, stages_to_long_csv, wilson_interval
from .decode import DecodeResult, covering_search, typicality_decode
from .kernels import backend_name
from .wak import WakCodebookSet, simulate_wak_corner1, simulate_wak_corner2, wak_rates

__all__ = [
    "SPLIT_NAMES", "bc_joint", "bc_plan", "deterministic_output_aux", "simulate_bc",
    "SimConfig", "SimConfigError", "TrialReport", "reports_to_csv", "stages_to_long_csv", "wilson_interval",
    "DecodeResult", "covering_search", "typicality_decode", "backend_name",
    "WakCodebookSet", "simulate_wak_corner1", "simulate_wak_corner2", "wak_rates",
]
