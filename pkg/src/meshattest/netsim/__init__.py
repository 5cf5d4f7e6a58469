from .config import AttestationPlan, ConfigError, ScenarioConfig
from .delay import DelayModel
from .metrics import Metrics, write_csv
from .sim import InvariantViolation, Simulation, run_scenario
from .topology import (
    GraphTopology, GridTopology, MobileTopology, TreeTopology, build_topology,
)

__all__ = [
    "AttestationPlan", "ConfigError", "DelayModel", "GraphTopology",
    "GridTopology", "InvariantViolation", "Metrics", "MobileTopology",
    "ScenarioConfig", "Simulation", "TreeTopology", "build_topology",
    "run_scenario", "write_csv",
]
