"""fablink: deterministic discrete-event simulation of a 5G-connected
flexible production line, plus compliance scoring of the generated traffic
against Rel-16 factory use-case requirement profiles."""

__version__ = "0.1.0"

from .sim_core import Engine, RngStream, SimTime
from .scenario import Scenario, default_scenario, load_scenario
from .simulation import Simulation

__all__ = [
    "Engine",
    "RngStream",
    "SimTime",
    "Scenario",
    "Simulation",
    "default_scenario",
    "load_scenario",
    "__version__",
]
