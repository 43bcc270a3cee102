"""Energy minimization for load-coupled cellular downlinks with joint transmission.

Fixed-point load coupling, uniform power scaling (POLO), load-reducing
association growth (AOLO) and their alternation (PALO), plus a seeded
scenario harness.
"""
__version__ = "0.1.0"

from .model import (Association, NetworkInstance, PathLossModel, PhysicalConstants,
                    TopologySpec, generate_instance, initial_association, path_loss_db)
from .coupling import (FixedPointReport, SolverOptions, cell_load, energy, fixed_point_load,
                       is_feasible, load_map, sinr)
from .optimizer import (AoloOptions, OptimizerTrace, PoloOptions, aolo, jt_link_test,
                        nonjt_fullload_power, palo, polo)

__all__ = [
    "Association", "NetworkInstance", "PathLossModel", "PhysicalConstants", "TopologySpec",
    "generate_instance", "initial_association", "path_loss_db",
    "FixedPointReport", "SolverOptions", "cell_load", "energy", "fixed_point_load",
    "is_feasible", "load_map", "sinr",
    "AoloOptions", "OptimizerTrace", "PoloOptions", "aolo", "jt_link_test",
    "nonjt_fullload_power", "palo", "polo",
]
