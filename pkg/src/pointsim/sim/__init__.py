from .engine import Engine, EventKind
from .metrics import Metrics, Outage, detect_outages
from .runner import BACKENDS, Simulation, run

__all__ = ["BACKENDS", "Engine", "EventKind", "Metrics", "Outage", "Simulation", "detect_outages", "run"]
