"""Heartbeat-based absence detection and scalable attestation for mesh networks."""

from .aggregation import (
    DynamicReport, TreeReport, Verdict, dynamic_merge, make_attest,
    rle_decode, rle_encode, tree_merge, verify_dynamic, verify_tree,
)
from .crypto import (
    Ciphertext, ComputeCosts, Digest, KeyPair, NullCrypto, RealCrypto,
    SymmetricKey, get_backend, sample_heartbeat,
)
from .netsim.config import AttestationPlan, ConfigError, ScenarioConfig
from .netsim.metrics import Metrics, write_csv
from .netsim.sim import Simulation, run_scenario
from .tee import Phase, Tee, TimeConfig, checktime
from .verifier import NetworkOperator

__all__ = [
    "AttestationPlan", "Ciphertext", "ComputeCosts", "ConfigError", "Digest",
    "DynamicReport", "KeyPair", "Metrics", "NetworkOperator", "NullCrypto",
    "Phase", "RealCrypto", "ScenarioConfig", "Simulation", "SymmetricKey",
    "Tee", "TimeConfig", "TreeReport", "Verdict", "checktime", "dynamic_merge",
    "get_backend", "make_attest", "rle_decode", "rle_encode", "run_scenario",
    "sample_heartbeat", "tree_merge", "verify_dynamic", "verify_tree",
    "write_csv",
]
