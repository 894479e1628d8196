"""Credit-network rebalancing: balance transfers, bailouts, and the audit trail."""

from .config import SimConfig, parse_config
from .model import CreditLink, CreditNetwork, NetworkConfig, NodeId, generate_network
from .scenarios import MetricsRecord, ScenarioResult, run_scenario

__all__ = [
    "CreditLink",
    "CreditNetwork",
    "MetricsRecord",
    "NetworkConfig",
    "NodeId",
    "ScenarioResult",
    "SimConfig",
    "generate_network",
    "parse_config",
    "run_scenario",
]

__version__ = "0.1.0"
