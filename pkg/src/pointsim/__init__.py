"""IP multicast over an ICN core, simulated alongside an L2 snooping baseline."""
from .fid import Fid, assign_tags, encode_path, forward_decision, matches, merge
from .model import Link, NodeKind, Topology, failover_groups, validate_topology
from .scenario import Scenario, load_scenario
from .sim import run

__version__ = "0.1.0"

__all__ = [
    "Fid", "Link", "NodeKind", "Scenario", "Topology", "assign_tags", "encode_path", "failover_groups",
    "forward_decision", "load_scenario", "matches", "merge", "run", "validate_topology",
]
