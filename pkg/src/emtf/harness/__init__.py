"""Configuration, persistence, experiment orchestration and the command line."""
from .config import ConfigError, InitialData, RunConfig, build_config, load_config
from .io import load_snapshot, save_snapshot
from .runs import Trajectory, convergence_study, run
from .verify import verify_suite

__all__ = ["ConfigError", "InitialData", "RunConfig", "build_config", "load_config", "load_snapshot",
           "save_snapshot", "Trajectory", "convergence_study", "run", "verify_suite"]
