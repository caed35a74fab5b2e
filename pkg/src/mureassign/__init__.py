"""Small-cell UE reassignment with MU-MIMO pairing and cell sleep modes."""

from .config import ConfigError, RunConfig, SimConfig, parse_config
from .engine import RunSummary, SnapshotMetrics, run_snapshot, run_sweep, simulate_taus

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "RunConfig", "SimConfig", "parse_config",
    "RunSummary", "SnapshotMetrics", "run_snapshot", "run_sweep", "simulate_taus",
]
