"""rodlab: nonlinear statics and dynamics of shear- and torsion-free rods.

Five semi-discrete formulations of the same rod model share one assembly
core: an isogeometric scheme built on smooth B-splines and four nodal
schemes built on cubic Hermite elements that differ in how (and whether)
the unit nodal director constraint is enforced.  A benchmark CLI runs the
canonical scenarios (planar roll-up, catenary, mooring line, conditioning
sweeps) and writes CSV/JSON outputs.
"""

from .assembly import (
    AssembledSystem,
    EndMoment,
    Formulation,
    LoadModel,
    PointLoad,
    RodModel,
    SCHEMES,
    assemble_system,
    build_model,
    dof_count,
    straight_state,
)
from .diagnostics import EnergyBreakdown, ErrorNorms, energies, error_norms, momenta
from .mechanics import (
    BarrierModel,
    FlowProfile,
    RodProperties,
    SingularConfigurationError,
)
from .solve import (
    ConvergenceError,
    IllConditionedSystemError,
    NewtonConfig,
    RodState,
    SolveReport,
    dynamic_march,
    newton_solve,
    static_march,
)

__version__ = "0.1.0"

__all__ = [
    "AssembledSystem", "BarrierModel", "ConvergenceError", "EndMoment",
    "EnergyBreakdown", "ErrorNorms", "FlowProfile", "Formulation",
    "IllConditionedSystemError", "LoadModel", "NewtonConfig", "PointLoad",
    "RodModel", "RodProperties", "RodState", "SCHEMES",
    "SingularConfigurationError", "SolveReport", "assemble_system",
    "build_model", "dof_count", "dynamic_march", "energies", "error_norms",
    "momenta", "newton_solve", "static_march", "straight_state",
]
